#include "otdp/grid_field.hpp"

#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "otdp/error.hpp"

namespace otdp {

namespace {

std::string fmt(double v) {
  char buf[32];
  auto r = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, r.ptr);
}

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  const auto e = s.find_last_not_of(" \t\r");
  return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(trim(cur));
  return out;
}

double to_double(const std::string& s, const std::filesystem::path& path) {
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size())
    throw Error(path.string() + ": cannot parse number '" + s + "'");
  return v;
}

}  // namespace

void write_grid_field(const std::filesystem::path& path, const std::string& name, const Grid& g,
                      const std::vector<std::string>& columns, const Eigen::MatrixXd& values) {
  if (values.rows() != g.size() || values.cols() != static_cast<Index>(columns.size()))
    throw Error("field shape does not match the grid and column list");
  std::ofstream out(path);
  if (!out) throw Error("cannot open " + path.string() + " for writing");
  const int n = g.dim();
  auto join = [&](auto get) {
    std::string s;
    for (int a = 0; a < n; ++a) {
      if (a) s += ',';
      s += get(a);
    }
    return s;
  };
  out << "# otdp grid field\n";
  out << "# name: " << name << '\n';
  out << "# lower: " << join([&](int a) { return fmt(g.box()[static_cast<std::size_t>(a)].lo); }) << '\n';
  out << "# upper: " << join([&](int a) { return fmt(g.box()[static_cast<std::size_t>(a)].hi); }) << '\n';
  out << "# counts: " << join([&](int a) { return std::to_string(g.count(a)); }) << '\n';
  out << "# spacing: " << join([&](int a) { return fmt(g.spacing(a)); }) << '\n';
  out << "# columns: " << join([&](int a) { return "x" + std::to_string(a + 1); });
  for (const auto& c : columns) out << ',' << c;
  out << '\n';
  std::vector<double> x(static_cast<std::size_t>(n));
  std::string line;
  for (Index i = 0; i < g.size(); ++i) {
    g.node(i, x);
    line.clear();
    for (int a = 0; a < n; ++a) {
      if (a) line += ',';
      line += fmt(x[static_cast<std::size_t>(a)]);
    }
    for (Index c = 0; c < values.cols(); ++c) {
      line += ',';
      line += fmt(values(i, c));
    }
    line += '\n';
    out << line;
  }
  if (!out) throw Error("failed writing " + path.string());
}

GridFieldFile read_grid_field(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open " + path.string());
  GridFieldFile f;
  std::vector<std::string> lower, upper, counts, cols;
  std::string line;
  std::vector<std::vector<double>> rows;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    if (line[0] == '#') {
      const auto colon = line.find(':');
      if (colon == std::string::npos) continue;
      std::string key = trim(line.substr(1, colon - 1));
      std::string val = line.substr(colon + 1);
      if (key == "name") f.name = trim(val);
      else if (key == "lower") lower = split(val, ',');
      else if (key == "upper") upper = split(val, ',');
      else if (key == "counts") counts = split(val, ',');
      else if (key == "columns") cols = split(val, ',');
      continue;
    }
    std::vector<double> r;
    for (const auto& tok : split(line, ',')) r.push_back(to_double(tok, path));
    rows.push_back(std::move(r));
  }
  if (lower.empty() || lower.size() != upper.size() || lower.size() != counts.size())
    throw Error(path.string() + ": missing or inconsistent grid header");
  const std::size_t n = lower.size();
  for (std::size_t a = 0; a < n; ++a) {
    f.box.push_back({to_double(lower[a], path), to_double(upper[a], path)});
    f.counts.push_back(static_cast<int>(to_double(counts[a], path)));
  }
  if (cols.size() < n) throw Error(path.string() + ": missing column header");
  f.columns.assign(cols.begin() + static_cast<std::ptrdiff_t>(n), cols.end());
  const Grid g(f.box, f.counts);
  if (static_cast<Index>(rows.size()) != g.size())
    throw Error(path.string() + ": expected " + std::to_string(g.size()) + " rows, found " +
                std::to_string(rows.size()));
  f.values.resize(g.size(), static_cast<Index>(f.columns.size()));
  std::vector<double> x(n);
  for (Index i = 0; i < g.size(); ++i) {
    const auto& r = rows[static_cast<std::size_t>(i)];
    if (r.size() != cols.size()) throw Error(path.string() + ": row " + std::to_string(i + 1) + " has the wrong width");
    g.node(i, x);
    for (std::size_t a = 0; a < n; ++a)
      if (std::abs(r[a] - x[a]) > 1e-9 * std::max(1.0, g.box()[a].width()))
        throw Error(path.string() + ": row " + std::to_string(i + 1) + " coordinates do not match the header");
    for (std::size_t c = 0; c < f.columns.size(); ++c) f.values(i, static_cast<Index>(c)) = r[n + c];
  }
  return f;
}

}  // namespace otdp
