#pragma once

#include <Eigen/Core>

#include <cstddef>
#include <functional>
#include <string>
#include <vector>

namespace lampdet {

/// Least-squares objective: cost(x) = sum_i r_i(x)^2.
struct ResidualProblem {
  std::size_t n_params = 0;
  std::size_t n_residuals = 0;
  std::function<Eigen::VectorXd(const Eigen::VectorXd&)> evaluate;
};

enum class Termination {
  GradientTolerance,
  StepTolerance,
  MaxIterations,
  DampingExhausted,  // no downhill step found even with maximal damping
};

const char* to_string(Termination t);

/// Reported once per solve to LMOptions::on_solve.
struct SolveSummary {
  std::string tag;
  int total_parameters = 0;
  int free_parameters = 0;
  int iterations = 0;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  Termination reason = Termination::MaxIterations;
};

struct LMOptions {
  int max_iterations = 100;
  double initial_damping = 1e-6;
  double damping_up = 10.0;
  double damping_down = 0.1;
  double max_damping = 1e16;
  double gradient_tolerance = 1e-10;
  double step_tolerance = 1e-12;
  double fd_step = 1e-6;

  /// Label attached to the SolveSummary (e.g. "pnp", "pnp-constrained", "d2co").
  std::string tag;
  /// Called after every accepted step with the iteration index, parameters and cost.
  std::function<void(int, const Eigen::VectorXd&, double)> on_iteration;
  /// Called once when the solve finishes.
  std::function<void(const SolveSummary&)> on_solve;
};

struct LMResult {
  Eigen::VectorXd x_opt;
  double initial_cost = 0.0;
  double final_cost = 0.0;
  int iterations = 0;
  bool converged = false;
  Termination reason = Termination::MaxIterations;
  int free_parameters = 0;
  int total_parameters = 0;
};

/// Sum of squared residuals; throws NonFiniteResidual if any residual is not finite.
double evaluate_cost(const ResidualProblem& problem, const Eigen::VectorXd& x,
                     Eigen::VectorXd* residuals = nullptr);

/// Central-difference Jacobian, step max(h, h*|x_i|) per column.
/// Columns whose mask entry is false are left zero.
Eigen::MatrixXd numeric_jacobian(const ResidualProblem& problem, const Eigen::VectorXd& x,
                                 double h, const std::vector<bool>* free_mask = nullptr);

/// Levenberg-Marquardt with Marquardt scaling lambda * diag(J^T J).
/// Parameters whose mask entry is false are copied bit-for-bit from x0.
LMResult lm_minimize(const ResidualProblem& problem, const Eigen::VectorXd& x0,
                     const std::vector<bool>& free_mask, const LMOptions& opts = {});

}  // namespace lampdet
