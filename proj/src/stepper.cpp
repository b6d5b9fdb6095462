#include "pbad/stepper.hpp"

#include <cmath>
#include <limits>
#include <memory>
#include <stdexcept>

#include "pbad/thread_pool.hpp"

namespace pbad {

namespace {

double fd_kinetic(const KinematicModel& model, const std::vector<Mat4>& world_prev,
                  const std::vector<Mat4>& world_next, double dt) {
  double ke = 0.0;
  for (int i = 0; i < model.link_count(); ++i) {
    const Mat4 tdot = (world_next[i] - world_prev[i]) / dt;
    ke += 0.5 * ddot(tdot * model.body_integrals[i].S, tdot);
  }
  return ke;
}

// State of one PBAD run: the two history configurations of the current
// collocation window plus bookkeeping shared by simulate and the batch
// scheduler.
struct PbadRun {
  CollocationScheme scheme;
  Configuration hist0;  // q at local time times[0]
  Configuration hist1;  // q at local time 0 (the step start)
  std::vector<Mat4> world_hist1;
  int step = 0;
  int total_steps = 0;
  int fail_streak = 0;
  Trajectory trajectory;

  // per-step scratch, rebuilt each step
  std::unique_ptr<StepProblem> problem;
  std::unique_ptr<StepObjective> objective;
  std::unique_ptr<StepSolver> solver;
};

Configuration bootstrap_history(const KinematicModel& model, const ForceModel& forces,
                                const SimConfig& sim, double t_local_dt) {
  // t_local_dt < 0: the history instant before the start of the run.
  if (!sim.refined_bootstrap) {
    return sim.q0 + t_local_dt * sim.qdot0;
  }
  // Fine reversed-velocity integration: q(-s) of the forward system equals
  // the state reached from (q0, -qdot0) after time s for conservative
  // forces, which is all the refined path is used for.
  DynamicsState state{sim.q0, -sim.qdot0};
  const double span = -t_local_dt;
  const int substeps = 32;
  const double h = span / substeps;
  for (int i = 0; i < substeps; ++i) {
    state = baseline_step(model, state, forces, h, BaselineScheme::rk4);
  }
  return state.q;
}

void init_pbad_run(PbadRun& run, const KinematicModel& model,
                   const ForceModel& forces, const SimConfig& sim) {
  validate_configuration(model, sim.q0);
  if (sim.qdot0.size() != model.total_dofs) {
    throw ModelError("initial velocity length does not match model DOF count");
  }
  if (sim.dt <= 0.0 || sim.duration <= 0.0) {
    throw ModelError("dt and duration must be positive");
  }
  run.scheme = build_scheme(sim.order, sim.dt);
  run.hist0 = bootstrap_history(model, forces, sim, run.scheme.times[0] * sim.dt);
  run.hist1 = sim.q0;
  run.world_hist1 = forward_pass(model, run.hist1);
  run.total_steps = static_cast<int>(std::ceil(sim.duration / sim.dt - 1e-9));
  run.trajectory.samples.push_back({0.0, sim.q0});
  run.trajectory.energy_log.push_back(
      {0.0, kinetic_energy(model, sim.q0, sim.qdot0),
       gravity_potential(model, forces.gravity, sim.q0)});
}

// Builds the step problem, warm start, and solver for the current step.
void begin_step(PbadRun& run, const KinematicModel& model, const ForceModel& forces,
                const SimConfig& sim) {
  const int n = model.total_dofs;
  const double t0 = run.step * sim.dt;

  auto problem = std::make_unique<StepProblem>();
  problem->model = &model;
  problem->scheme = &run.scheme;
  problem->history = {run.hist0, run.hist1};
  problem->dt = sim.dt;
  problem->forces = forces;
  problem->kind = sim.objective;
  const int unknowns = run.scheme.unknown_count();
  for (int m = 0; m < unknowns; ++m) {
    const double t = t0 + run.scheme.times[run.scheme.unknown_index(m)] * sim.dt;
    problem->tau_at_instants.push_back(forces.tau_at(t, n));
  }

  // constant-velocity extrapolation of the window
  const double span = -run.scheme.times[0];
  VecX x0(n * unknowns);
  for (int m = 0; m < unknowns; ++m) {
    const double tau_m = run.scheme.times[run.scheme.unknown_index(m)];
    x0.segment(m * n, n) =
        sim.warm_start ? VecX(run.hist1 + (tau_m / span) * (run.hist1 - run.hist0))
                       : run.hist1;
  }

  run.problem = std::move(problem);
  run.objective = std::make_unique<StepObjective>(*run.problem);
  run.solver = make_solver(sim.optimizer, std::move(x0), *run.objective);
}

// Accepts the solver's result, shifts the window, records the sample.
// Returns false when the consecutive-failure limit was hit.
bool finish_step(PbadRun& run, const KinematicModel& model, const ForceModel& forces,
                 const SimConfig& sim) {
  const int n = model.total_dofs;
  const VecX& x = run.solver->current_x();
  const SolveReport report = run.solver->report();
  run.trajectory.solve_reports.push_back(report);
  run.fail_streak = report.converged ? 0 : run.fail_streak + 1;
  if (run.fail_streak > sim.consecutive_fail_limit) return false;

  const int unknowns = run.scheme.unknown_count();
  Configuration new_hist0 =
      (sim.order == 2) ? run.hist1 : Configuration(x.segment((unknowns - 2) * n, n));
  Configuration new_hist1 = x.segment((unknowns - 1) * n, n);

  const std::vector<Mat4> world_next = forward_pass(model, new_hist1);
  ++run.step;
  const double t = run.step * sim.dt;
  run.trajectory.samples.push_back({t, new_hist1});
  run.trajectory.energy_log.push_back(
      {t, fd_kinetic(model, run.world_hist1, world_next, sim.dt),
       gravity_potential(model, forces.gravity, new_hist1)});

  run.hist0 = std::move(new_hist0);
  run.hist1 = std::move(new_hist1);
  run.world_hist1 = world_next;
  run.problem.reset();
  run.objective.reset();
  run.solver.reset();
  return true;
}

}  // namespace

Trajectory simulate(const KinematicModel& model, const ForceModel& forces,
                    const SimConfig& sim) {
  PbadRun run;
  init_pbad_run(run, model, forces, sim);
  while (run.step < run.total_steps) {
    begin_step(run, model, forces, sim);
    while (run.solver->iterate(*run.objective) == StepSolver::Status::running) {
    }
    if (!finish_step(run, model, forces, sim)) {
      throw std::runtime_error(
          "optimizer failed " + std::to_string(run.fail_streak) +
          " consecutive steps around t=" + std::to_string(run.step * sim.dt));
    }
  }
  return run.trajectory;
}

Trajectory simulate_baseline(const KinematicModel& model, const ForceModel& forces,
                             BaselineScheme scheme, const SimConfig& sim) {
  validate_configuration(model, sim.q0);
  if (sim.qdot0.size() != model.total_dofs) {
    throw ModelError("initial velocity length does not match model DOF count");
  }
  Trajectory out;
  DynamicsState state{sim.q0, sim.qdot0};
  out.samples.push_back({0.0, state.q});
  out.energy_log.push_back({0.0, kinetic_energy(model, state.q, state.qdot),
                            gravity_potential(model, forces.gravity, state.q)});
  const int steps = static_cast<int>(std::ceil(sim.duration / sim.dt - 1e-9));
  for (int k = 0; k < steps; ++k) {
    if (!state.q.allFinite() || !state.qdot.allFinite()) {
      out.error = "diverged to a non-finite state at t=" + std::to_string(k * sim.dt);
      break;
    }
    try {
      state = baseline_step(model, state, forces, sim.dt, scheme);
    } catch (const std::exception& e) {
      out.error = std::string("step failed: ") + e.what();
      break;
    }
    const double t = (k + 1) * sim.dt;
    out.samples.push_back({t, state.q});
    const double ke = state.q.allFinite() && state.qdot.allFinite()
                          ? kinetic_energy(model, state.q, state.qdot)
                          : std::numeric_limits<double>::infinity();
    const double pe = state.q.allFinite()
                          ? gravity_potential(model, forces.gravity, state.q)
                          : std::numeric_limits<double>::infinity();
    out.energy_log.push_back({t, ke, pe});
  }
  return out;
}

std::vector<Trajectory> batch_simulate(const KinematicModel& model,
                                       const ForceModel& forces,
                                       const std::vector<SimConfig>& sims,
                                       int workers) {
  if (workers < 1) throw ModelError("worker count must be >= 1");
  const int count = static_cast<int>(sims.size());
  std::vector<PbadRun> runs(count);
  std::vector<char> done(count, 0);
  std::vector<Trajectory> out(count);

  WorkerPool pool(workers);

  // Initialization round (first-step solver construction included).
  const std::function<void(int)> init_item = [&](int t) {
    try {
      init_pbad_run(runs[t], model, forces, sims[t]);
      if (runs[t].total_steps > 0) {
        begin_step(runs[t], model, forces, sims[t]);
      } else {
        done[t] = 1;
      }
    } catch (const std::exception& e) {
      runs[t].trajectory.error = e.what();
      done[t] = 1;
    }
  };
  pool.run(count, init_item);

  // Lockstep rounds: one optimizer iteration per unfinished trajectory.
  std::vector<int> active;
  active.reserve(count);
  const std::function<void(int)> round_item = [&](int idx) {
    const int t = active[idx];
    PbadRun& run = runs[t];
    try {
      if (run.solver->iterate(*run.objective) != StepSolver::Status::running) {
        if (!finish_step(run, model, forces, sims[t])) {
          run.trajectory.error =
              "optimizer failed " + std::to_string(run.fail_streak) +
              " consecutive steps around t=" + std::to_string(run.step * sims[t].dt);
          done[t] = 1;
          return;
        }
        if (run.step >= run.total_steps) {
          done[t] = 1;
        } else {
          begin_step(run, model, forces, sims[t]);
        }
      }
    } catch (const std::exception& e) {
      run.trajectory.error = e.what();
      done[t] = 1;
    }
  };

  while (true) {
    active.clear();
    for (int t = 0; t < count; ++t) {
      if (!done[t]) active.push_back(t);
    }
    if (active.empty()) break;
    pool.run(static_cast<int>(active.size()), round_item);
  }

  for (int t = 0; t < count; ++t) out[t] = std::move(runs[t].trajectory);
  return out;
}

}  // namespace pbad
