#include "lampdet/optim.hpp"

#include "lampdet/error.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>

namespace lampdet {

const char* to_string(Termination t) {
  switch (t) {
    case Termination::GradientTolerance: return "gradient_tolerance";
    case Termination::StepTolerance: return "step_tolerance";
    case Termination::MaxIterations: return "max_iterations";
    case Termination::DampingExhausted: return "damping_exhausted";
  }
  return "unknown";
}

namespace {

Eigen::VectorXd checked_residuals(const ResidualProblem& problem, const Eigen::VectorXd& x) {
  Eigen::VectorXd r = problem.evaluate(x);
  if (static_cast<std::size_t>(r.size()) != problem.n_residuals) {
    throw Error(ErrorCode::ValidationError, "residual vector has unexpected size");
  }
  if (!r.allFinite()) {
    throw Error(ErrorCode::NonFiniteResidual, "residual evaluation returned a non-finite value");
  }
  return r;
}

}  // namespace

double evaluate_cost(const ResidualProblem& problem, const Eigen::VectorXd& x,
                     Eigen::VectorXd* residuals) {
  Eigen::VectorXd r = checked_residuals(problem, x);
  const double cost = r.squaredNorm();
  if (residuals) *residuals = std::move(r);
  return cost;
}

Eigen::MatrixXd numeric_jacobian(const ResidualProblem& problem, const Eigen::VectorXd& x,
                                 double h, const std::vector<bool>* free_mask) {
  if (!x.allFinite()) {
    throw Error(ErrorCode::NonFiniteResidual, "non-finite evaluation point");
  }
  Eigen::MatrixXd J = Eigen::MatrixXd::Zero(problem.n_residuals, problem.n_params);
  Eigen::VectorXd probe = x;
  for (Eigen::Index j = 0; j < x.size(); ++j) {
    if (free_mask && !(*free_mask)[j]) continue;
    const double step = std::max(h, h * std::abs(x[j]));
    probe[j] = x[j] + step;
    const Eigen::VectorXd rp = checked_residuals(problem, probe);
    probe[j] = x[j] - step;
    const Eigen::VectorXd rm = checked_residuals(problem, probe);
    probe[j] = x[j];
    J.col(j) = (rp - rm) / (2.0 * step);
  }
  return J;
}

LMResult lm_minimize(const ResidualProblem& problem, const Eigen::VectorXd& x0,
                     const std::vector<bool>& free_mask, const LMOptions& opts) {
  const auto n = static_cast<Eigen::Index>(problem.n_params);
  if (x0.size() != n || free_mask.size() != problem.n_params) {
    throw Error(ErrorCode::ValidationError, "parameter vector and mask must match n_params");
  }
  if (problem.n_residuals < 1) {
    throw Error(ErrorCode::ValidationError, "problem needs at least one residual");
  }
  std::vector<Eigen::Index> free_idx;
  for (Eigen::Index i = 0; i < n; ++i) {
    if (free_mask[i]) free_idx.push_back(i);
  }
  if (free_idx.empty()) {
    throw Error(ErrorCode::ValidationError, "at least one parameter must be free");
  }
  const auto m = static_cast<Eigen::Index>(free_idx.size());

  LMResult result;
  result.total_parameters = static_cast<int>(n);
  result.free_parameters = static_cast<int>(m);

  Eigen::VectorXd x = x0;
  Eigen::VectorXd r;
  double cost = evaluate_cost(problem, x, &r);
  result.initial_cost = cost;
  double lambda = opts.initial_damping;

  int iter = 0;
  bool done = false;
  while (!done && iter < opts.max_iterations) {
    ++iter;
    const Eigen::MatrixXd Jfull = numeric_jacobian(problem, x, opts.fd_step, &free_mask);
    Eigen::MatrixXd J(Jfull.rows(), m);
    for (Eigen::Index k = 0; k < m; ++k) J.col(k) = Jfull.col(free_idx[k]);

    const Eigen::VectorXd g = J.transpose() * r;
    if (g.cwiseAbs().maxCoeff() <= opts.gradient_tolerance) {
      result.reason = Termination::GradientTolerance;
      result.converged = true;
      break;
    }
    const Eigen::MatrixXd A = J.transpose() * J;
    const double diag_floor = std::max(1e-12 * A.diagonal().maxCoeff(), 1e-300);

    // Inner loop: raise damping until a downhill step is found.
    while (true) {
      Eigen::MatrixXd damped = A;
      for (Eigen::Index k = 0; k < m; ++k) {
        damped(k, k) += lambda * std::max(A(k, k), diag_floor);
      }
      const Eigen::VectorXd delta = damped.ldlt().solve(-g);
      const bool solvable = delta.allFinite();

      if (solvable) {
        Eigen::VectorXd x_new = x;
        for (Eigen::Index k = 0; k < m; ++k) x_new[free_idx[k]] += delta[k];

        if (delta.norm() <= opts.step_tolerance * (x.norm() + opts.step_tolerance)) {
          result.reason = Termination::StepTolerance;
          result.converged = true;
          done = true;
          break;
        }

        Eigen::VectorXd r_new;
        double cost_new = 0.0;
        bool finite = true;
        try {
          cost_new = evaluate_cost(problem, x_new, &r_new);
        } catch (const Error& e) {
          if (e.code() != ErrorCode::NonFiniteResidual) throw;
          finite = false;
        }
        if (finite && cost_new < cost) {
          x = std::move(x_new);
          r = std::move(r_new);
          cost = cost_new;
          lambda *= opts.damping_down;
          if (opts.on_iteration) opts.on_iteration(iter, x, cost);
          break;
        }
      }
      lambda *= opts.damping_up;
      if (lambda > opts.max_damping) {
        result.reason = Termination::DampingExhausted;
        done = true;
        break;
      }
    }
    if (!done && iter >= opts.max_iterations) result.reason = Termination::MaxIterations;
  }

  result.x_opt = std::move(x);
  result.final_cost = cost;
  result.iterations = iter;
  if (opts.on_solve) {
    SolveSummary s;
    s.tag = opts.tag;
    s.total_parameters = result.total_parameters;
    s.free_parameters = result.free_parameters;
    s.iterations = result.iterations;
    s.initial_cost = result.initial_cost;
    s.final_cost = result.final_cost;
    s.reason = result.reason;
    opts.on_solve(s);
  }
  return result;
}

}  // namespace lampdet
