#pragma once

#include <string>
#include <vector>

#include "pbad/scene.hpp"
#include "pbad/stepper.hpp"

namespace pbad {

void write_trajectory_csv(const std::string& path, const Trajectory& trajectory);
void write_energy_csv(const std::string& path, const Trajectory& trajectory);

/// Finite-difference audit of the analytic derivative stack on random
/// configurations of a scene's model.
struct DerivativeReport {
  struct Entry {
    std::string category;
    double max_rel_err = 0.0;
  };
  std::vector<Entry> entries;

  double worst() const {
    double w = 0.0;
    for (const auto& e : entries) w = std::max(w, e.max_rel_err);
    return w;
  }
};

DerivativeReport check_derivatives(const Scene& scene, int trials, unsigned seed);

/// Runtime-vs-N measurements of the adjoint passes with fitted log-log
/// exponents.
struct ScalingResult {
  std::vector<int> sizes;
  std::vector<double> grad_ms;
  std::vector<double> hess_bb_ms;
  std::vector<double> hess_ab_ms;
  double grad_exponent = 0.0;
  double hess_bb_exponent = 0.0;
  double hess_ab_exponent = 0.0;
};

ScalingResult run_scaling_suite(const std::vector<int>& sizes, unsigned seed);

struct TimestepResult {
  std::vector<double> dts;
  std::vector<double> per_step_ms;
  std::vector<double> mean_iterations;
};

TimestepResult run_timestep_suite(double duration);

struct IterationsResult {
  double lm_mean_n10 = 0.0;
  double lm_mean_n40 = 0.0;
  double lbfgs_mean_n10 = 0.0;
};

IterationsResult run_iterations_suite(double duration);

struct BatchResult {
  double serial_seconds = 0.0;
  double parallel_seconds = 0.0;
  double max_deviation = 0.0;  // vs per-trajectory serial simulate
  int workers = 1;
};

BatchResult run_batch_suite(int trajectories, int steps, int workers, unsigned seed);

struct SwingRun {
  std::string label;
  double dt = 0.0;
  double initial_energy = 0.0;
  double final_energy = 0.0;
  double max_energy = 0.0;
  bool finite = true;
};

std::vector<SwingRun> run_swing_suite(const std::string& out_dir);

/// Least-squares slope of log(y) against log(x).
double fit_log_exponent(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace pbad
