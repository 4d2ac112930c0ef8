#pragma once

#include <functional>
#include <vector>

#include <Eigen/Core>

#include "otdp/conjugate.hpp"
#include "otdp/operators.hpp"

namespace otdp {

/// y_k and the feedback u_k it was computed with; J_k(p) = y_k' E p.
struct ValueIterate {
  Vector y;
  Eigen::MatrixXd u;  // size() x nu
  long k = 0;
  double offset_per_step = 0.0;
};

/// One backward step E'y_k = A'y_{k+1} + D(B'y_{k+1}).
///
/// In mass representation the perspective weights are the step length:
/// D_i = h d(x_i, lambda_i / h) with the split multipliers
/// lambda_i = ((Bf'y)_i, (Bb'y)_i).
ValueIterate dp_step(const DiscreteSystem& sys, const DualCost& dc, const Vector& y_next);

struct FiniteHorizonSolution {
  Vector y0;
  std::vector<Eigen::MatrixXd> feedback;  // u_0 .. u_{N-1}
};

/// Backward sweep from y_N = 0. J(T, p0) = y0' E p0.
FiniteHorizonSolution solve_finite_horizon(const DiscreteSystem& sys, const DualCost& dc, long N,
                                           bool keep_schedule = true);

struct ConvergenceRecord {
  long iteration = 0;
  double residual = 0.0;  // max |u_k - u_{k-1}| over one outer step
  double ell = 0.0;       // offset / h
};

struct ErgodicOptions {
  double tol = 1e-6;
  double offset_tol = 1e-8;
  Index anchor = -1;  // negative: node nearest the domain center
  long max_iter = 200000;
  int substeps = 1;   // steps of sys.h per outer step
  std::function<void(const ConvergenceRecord&)> on_iteration;
};

struct ErgodicSolution {
  Vector V_inf;            // anchored: V_inf[anchor] = 0
  Eigen::MatrixXd mu_inf;  // size() x nu
  double ell_inf = 0.0;
  long iterations = 0;     // outer steps
  double residual = 0.0;
  Index anchor = 0;
  std::vector<ConvergenceRecord> trace;
};

/// Relative value iteration. Terminates when the feedback changes by at
/// most `tol` over one outer step and the relative change of offset / h
/// over the same step is at most `offset_tol`. Throws NoConvergence.
ErgodicSolution solve_ergodic(const DiscreteSystem& sys, const DualCost& dc,
                              const ErgodicOptions& opt = {});

const Eigen::MatrixXd& extract_feedback(const ValueIterate& v);
const Eigen::MatrixXd& extract_feedback(const ErgodicSolution& s);

/// V_inf shifted to have zero mean against the masses p.
Vector centered_value(const ErgodicSolution& s, const Vector& p);

}  // namespace otdp
