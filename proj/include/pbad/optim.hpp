#pragma once

#include <memory>
#include <optional>
#include <utility>
#include <vector>

#include "pbad/math_types.hpp"
#include "pbad/objective.hpp"

namespace pbad {

enum class OptimizerKind { lbfgs, lm };

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::lm;
  int max_iters = 512;
  double grad_tol = 1e-8;   // absolute, scaled by max(1, |x|_inf)
  double grad_rtol = 0.0;   // relative to the first gradient (0 = disabled)
  double ftol = 1e-14;      // accepted-decrease stagnation threshold
  int lbfgs_memory = 8;
  double lm_lambda0 = 1e-3;
  double lm_lambda_factor = 10.0;
  double lm_lambda_max = 1e12;
  double armijo_c1 = 1e-4;
  double backtrack_factor = 0.5;
  int max_line_search = 40;
};

struct SolveReport {
  int iterations = 0;
  double final_value = 0.0;
  double final_grad_norm = 0.0;
  bool converged = false;
  std::vector<double> per_iteration_values;  // value after each iteration
};

/// Dense SPD solve via Cholesky. Returns nothing when a non-positive
/// pivot signals an indefinite matrix.
std::optional<VecX> spd_solve(const MatX& a, const VecX& b);

/// Resumable minimization state: one iterate() call performs exactly one
/// optimizer iteration (one LM trial or one LBFGS line search), which is
/// the lockstep granularity of the batch scheduler.
class StepSolver {
 public:
  enum class Status { running, converged, failed };

  virtual ~StepSolver() = default;
  virtual Status iterate(const ObjectiveFunction& f) = 0;
  virtual const VecX& current_x() const = 0;
  virtual SolveReport report() const = 0;
};

std::unique_ptr<StepSolver> make_solver(const OptimizerConfig& config, VecX x0,
                                        const ObjectiveFunction& f);

/// Runs iterate() to completion (convergence, failure, or max_iters).
std::pair<VecX, SolveReport> minimize(const ObjectiveFunction& f, const VecX& x0,
                                      const OptimizerConfig& config);

}  // namespace pbad
