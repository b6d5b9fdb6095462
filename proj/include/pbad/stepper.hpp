#pragma once

#include <optional>
#include <string>
#include <vector>

#include "pbad/baseline.hpp"
#include "pbad/collocation.hpp"
#include "pbad/model.hpp"
#include "pbad/objective.hpp"
#include "pbad/optim.hpp"

namespace pbad {

struct EnergySample {
  double time = 0.0;
  double kinetic = 0.0;
  double potential = 0.0;
  double total() const { return kinetic + potential; }
};

struct Trajectory {
  std::vector<std::pair<double, Configuration>> samples;
  std::vector<EnergySample> energy_log;
  std::vector<SolveReport> solve_reports;
  std::optional<std::string> error;  // set when a run aborted early
};

struct SimConfig {
  double dt = 0.01;
  double duration = 1.0;
  int order = 2;
  ObjectiveKind objective = ObjectiveKind::energy_form;
  OptimizerConfig optimizer;
  Configuration q0;
  VecX qdot0;
  int consecutive_fail_limit = 25;
  // Seed the first collocation window with fine Runge-Kutta substeps
  // instead of the linear extrapolation default.
  bool refined_bootstrap = false;
  // Constant-velocity extrapolation of the window as the optimizer seed;
  // off seeds every unknown with the step-start configuration.
  bool warm_start = true;
};

/// PBAD time integration: one optimization per step over the collocation
/// window. Throws when the optimizer fails consecutive_fail_limit steps
/// in a row.
Trajectory simulate(const KinematicModel& model, const ForceModel& forces,
                    const SimConfig& sim);

/// Newton-Euler comparison runs using the same trajectory bookkeeping.
/// Divergence (non-finite state) truncates and flags the trajectory.
Trajectory simulate_baseline(const KinematicModel& model, const ForceModel& forces,
                             BaselineScheme scheme, const SimConfig& sim);

/// Runs all trajectories in lockstep rounds: every round advances each
/// unfinished trajectory by exactly one optimizer iteration on a pool of
/// workers. Per-trajectory results are identical to simulate(); one
/// trajectory failing does not abort the batch.
std::vector<Trajectory> batch_simulate(const KinematicModel& model,
                                       const ForceModel& forces,
                                       const std::vector<SimConfig>& sims,
                                       int workers);

}  // namespace pbad
