#include "pbad/optim.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <deque>
#include <stdexcept>

namespace pbad {

std::optional<VecX> spd_solve(const MatX& a, const VecX& b) {
  Eigen::LLT<MatX> llt(a);
  if (llt.info() != Eigen::Success) return std::nullopt;
  return llt.solve(b);
}

namespace {

double scaled_tol(const OptimizerConfig& cfg, const VecX& x) {
  return cfg.grad_tol * std::max(1.0, x.lpNorm<Eigen::Infinity>());
}

class SolverBase : public StepSolver {
 public:
  SolverBase(const OptimizerConfig& config, VecX x0)
      : cfg_(config), x_(std::move(x0)) {}

  const VecX& current_x() const override { return x_; }

  SolveReport report() const override {
    SolveReport r;
    r.iterations = iterations_;
    r.final_value = value_;
    r.final_grad_norm = grad_.size() ? grad_.lpNorm<Eigen::Infinity>() : 0.0;
    r.converged = status_ == Status::converged;
    r.per_iteration_values = values_;
    return r;
  }

 protected:
  void init_check(double v0) {
    if (!std::isfinite(v0)) {
      throw std::invalid_argument("objective is non-finite at the initial point");
    }
  }

  bool grad_converged() const {
    const double g = grad_.lpNorm<Eigen::Infinity>();
    if (g <= scaled_tol(cfg_, x_)) return true;
    if (cfg_.grad_rtol > 0.0 && g <= cfg_.grad_rtol * grad0_norm_) return true;
    return false;
  }

  // Tracks consecutive negligible accepted decreases.
  bool stagnation_update(double old_value, double new_value) {
    if (old_value - new_value <= cfg_.ftol * std::max(1.0, std::abs(old_value))) {
      ++stagnant_;
    } else {
      stagnant_ = 0;
    }
    return stagnant_ >= 2;
  }

  void finish_iteration() {
    ++iterations_;
    values_.push_back(value_);
  }

  const OptimizerConfig cfg_;
  VecX x_;
  double value_ = 0.0;
  VecX grad_;
  double grad0_norm_ = 0.0;
  Status status_ = Status::running;
  int iterations_ = 0;
  int stagnant_ = 0;
  std::vector<double> values_;
};

class LmSolver final : public SolverBase {
 public:
  LmSolver(const OptimizerConfig& config, VecX x0, const ObjectiveFunction& f)
      : SolverBase(config, std::move(x0)), lambda_(config.lm_lambda0) {
    auto eval = f.evaluate(x_, true);
    init_check(eval.value);
    value_ = eval.value;
    grad_ = std::move(eval.grad);
    if (!eval.gn_matrix) {
      throw std::invalid_argument("LM requires an objective with a Gauss-Newton matrix");
    }
    gn_ = std::move(*eval.gn_matrix);
    grad0_norm_ = grad_.lpNorm<Eigen::Infinity>();
  }

  Status iterate(const ObjectiveFunction& f) override {
    if (status_ != Status::running) return status_;
    if (iterations_ >= cfg_.max_iters) {
      status_ = Status::failed;
      return status_;
    }
    if (grad_converged()) {
      status_ = Status::converged;
      return status_;
    }

    MatX damped = gn_;
    damped.diagonal().array() += lambda_;
    const auto step = spd_solve(damped, -grad_);
    bool accepted = false;
    if (step && step->allFinite()) {
      const VecX trial = x_ + *step;
      const double trial_value = f.value(trial);
      if (std::isfinite(trial_value) && trial_value < value_) {
        const double old_value = value_;
        x_ = trial;
        auto eval = f.evaluate(x_, true);
        value_ = eval.value;
        grad_ = std::move(eval.grad);
        gn_ = std::move(*eval.gn_matrix);
        lambda_ = std::max(lambda_ / cfg_.lm_lambda_factor, 1e-12);
        accepted = true;
        if (stagnation_update(old_value, value_)) status_ = Status::converged;
      }
    }
    if (!accepted) {
      lambda_ *= cfg_.lm_lambda_factor;
      if (lambda_ > cfg_.lm_lambda_max) status_ = Status::failed;
    }
    finish_iteration();
    if (status_ == Status::running && iterations_ >= cfg_.max_iters) {
      status_ = Status::failed;
    }
    return status_;
  }

 private:
  MatX gn_;
  double lambda_;
};

class LbfgsSolver final : public SolverBase {
 public:
  LbfgsSolver(const OptimizerConfig& config, VecX x0, const ObjectiveFunction& f)
      : SolverBase(config, std::move(x0)) {
    auto eval = f.evaluate(x_, false);
    init_check(eval.value);
    value_ = eval.value;
    grad_ = std::move(eval.grad);
    grad0_norm_ = grad_.lpNorm<Eigen::Infinity>();
  }

  Status iterate(const ObjectiveFunction& f) override {
    if (status_ != Status::running) return status_;
    if (iterations_ >= cfg_.max_iters) {
      status_ = Status::failed;
      return status_;
    }
    if (grad_converged()) {
      status_ = Status::converged;
      return status_;
    }

    VecX dir = -two_loop(grad_);
    double slope = dir.dot(grad_);
    if (!(slope < 0.0)) {
      history_.clear();
      dir = -grad_;
      slope = dir.dot(grad_);
    }

    double t = 1.0;
    bool accepted = false;
    for (int trial = 0; trial < cfg_.max_line_search; ++trial) {
      const VecX cand = x_ + t * dir;
      if (cand.allFinite()) {
        const double v = f.value(cand);
        if (std::isfinite(v) && v <= value_ + cfg_.armijo_c1 * t * slope && v < value_) {
          auto eval = f.evaluate(cand, false);
          const VecX s = t * dir;
          const VecX y = eval.grad - grad_;
          const double sy = s.dot(y);
          if (sy > 1e-12) {
            history_.push_back({s, y, sy});
            if (static_cast<int>(history_.size()) > cfg_.lbfgs_memory) {
              history_.pop_front();
            }
          }
          const double old_value = value_;
          x_ = cand;
          value_ = eval.value;
          grad_ = std::move(eval.grad);
          accepted = true;
          if (stagnation_update(old_value, value_)) status_ = Status::converged;
          break;
        }
      }
      t *= cfg_.backtrack_factor;
    }
    if (!accepted) status_ = Status::failed;  // best-so-far state retained
    finish_iteration();
    if (status_ == Status::running && iterations_ >= cfg_.max_iters) {
      status_ = Status::failed;
    }
    return status_;
  }

 private:
  struct Pair {
    VecX s, y;
    double sy;
  };

  VecX two_loop(const VecX& g) const {
    VecX q = g;
    std::vector<double> alpha(history_.size());
    for (int i = static_cast<int>(history_.size()) - 1; i >= 0; --i) {
      alpha[i] = history_[i].s.dot(q) / history_[i].sy;
      q -= alpha[i] * history_[i].y;
    }
    if (!history_.empty()) {
      const auto& last = history_.back();
      q *= last.sy / last.y.squaredNorm();
    }
    for (size_t i = 0; i < history_.size(); ++i) {
      const double beta = history_[i].y.dot(q) / history_[i].sy;
      q += (alpha[i] - beta) * history_[i].s;
    }
    return q;
  }

  std::deque<Pair> history_;
};

}  // namespace

std::unique_ptr<StepSolver> make_solver(const OptimizerConfig& config, VecX x0,
                                        const ObjectiveFunction& f) {
  if (config.kind == OptimizerKind::lm) {
    return std::make_unique<LmSolver>(config, std::move(x0), f);
  }
  return std::make_unique<LbfgsSolver>(config, std::move(x0), f);
}

std::pair<VecX, SolveReport> minimize(const ObjectiveFunction& f, const VecX& x0,
                                      const OptimizerConfig& config) {
  auto solver = make_solver(config, x0, f);
  while (solver->iterate(f) == StepSolver::Status::running) {
  }
  return {solver->current_x(), solver->report()};
}

}  // namespace pbad
