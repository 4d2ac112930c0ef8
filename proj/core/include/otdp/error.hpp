#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>
#include <vector>

namespace otdp {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class SyntaxError : public Error {
 public:
  SyntaxError(std::size_t offset, std::vector<std::string> expected, const std::string& what)
      : Error(what), offset_(offset), expected_(std::move(expected)) {}

  /// Byte offset into the source text.
  std::size_t offset() const noexcept { return offset_; }
  const std::vector<std::string>& expected() const noexcept { return expected_; }

 private:
  std::size_t offset_;
  std::vector<std::string> expected_;
};

class UnknownIdentifier : public Error {
 public:
  UnknownIdentifier(std::string name, std::size_t offset)
      : Error("unknown identifier '" + name + "' at byte " + std::to_string(offset)),
        name_(std::move(name)),
        offset_(offset) {}

  const std::string& name() const noexcept { return name_; }
  std::size_t offset() const noexcept { return offset_; }

 private:
  std::string name_;
  std::size_t offset_;
};

class DomainError : public Error {
 public:
  using Error::Error;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

class InvalidGrid : public Error {
 public:
  using Error::Error;
};

class OutOfDomain : public Error {
 public:
  using Error::Error;
};

class AssemblyError : public Error {
 public:
  using Error::Error;
};

class StepTooLarge : public Error {
 public:
  StepTooLarge(double requested, double admissible)
      : Error("time step " + std::to_string(requested) +
              " can produce negative masses; largest admissible step is " +
              std::to_string(admissible)),
        requested_(requested),
        admissible_(admissible) {}

  double requested() const noexcept { return requested_; }
  /// Zero when no step size is positivity preserving (non-monotone flux).
  double admissible() const noexcept { return admissible_; }

 private:
  double requested_;
  double admissible_;
};

class PositivityViolation : public Error {
 public:
  using Error::Error;
};

class LinearSolveFailure : public Error {
 public:
  using Error::Error;
};

class NoConvergence : public Error {
 public:
  NoConvergence(const std::string& what, long iterations, double residual)
      : Error(what), iterations_(iterations), residual_(residual) {}

  long iterations() const noexcept { return iterations_; }
  double residual() const noexcept { return residual_; }

 private:
  long iterations_;
  double residual_;
};

class InsufficientData : public Error {
 public:
  using Error::Error;
};

/// A check needs problem data (Q, P, ...) that the problem does not carry.
class MissingData : public Error {
 public:
  using Error::Error;
};

class PNotPositive : public Error {
 public:
  using Error::Error;
};

}  // namespace otdp
