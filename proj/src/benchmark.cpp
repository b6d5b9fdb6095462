#include "pbad/benchmark.hpp"

#include <chrono>
#include <cmath>
#include <random>

#include "pbad/adjoint.hpp"
#include "pbad/csv.hpp"

namespace pbad {

void write_trajectory_csv(const std::string& path, const Trajectory& trajectory) {
  const int n =
      trajectory.samples.empty() ? 0 : static_cast<int>(trajectory.samples[0].second.size());
  std::vector<std::string> header{"time"};
  for (int i = 0; i < n; ++i) header.push_back("q_" + std::to_string(i));
  CsvWriter csv(path, header);
  std::vector<double> row(n + 1);
  for (const auto& [t, q] : trajectory.samples) {
    row[0] = t;
    for (int i = 0; i < n; ++i) row[i + 1] = q[i];
    csv.row(row);
  }
}

void write_energy_csv(const std::string& path, const Trajectory& trajectory) {
  CsvWriter csv(path, {"time", "kinetic", "potential", "total", "iterations"});
  for (size_t i = 0; i < trajectory.energy_log.size(); ++i) {
    const auto& e = trajectory.energy_log[i];
    const double iters =
        (i > 0 && i - 1 < trajectory.solve_reports.size())
            ? static_cast<double>(trajectory.solve_reports[i - 1].iterations)
            : 0.0;
    csv.row({e.time, e.kinetic, e.potential, e.total(), iters});
  }
}

namespace {

double rel_err(const MatX& analytic, const MatX& reference) {
  const double scale = std::max(1.0, reference.cwiseAbs().maxCoeff());
  return (analytic - reference).cwiseAbs().maxCoeff() / scale;
}

double rel_err(const VecX& analytic, const VecX& reference) {
  const double scale = std::max(1.0, reference.cwiseAbs().maxCoeff());
  return (analytic - reference).cwiseAbs().maxCoeff() / scale;
}

constexpr double kFdStep = 1e-5;

}  // namespace

DerivativeReport check_derivatives(const Scene& scene, int trials, unsigned seed) {
  DerivativeReport report;
  if (trials <= 0) return report;

  const KinematicModel model = scene_model(scene);
  const ForceModel forces = scene_forces(scene);
  const int n = model.total_dofs;
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> uni(-0.8, 0.8);
  auto random_q = [&] {
    VecX q(n);
    for (int i = 0; i < n; ++i) q[i] = uni(rng);
    return q;
  };

  double jet_d1 = 0.0, jet_d2 = 0.0, corr_grad = 0.0, corr_bb = 0.0, corr_ab = 0.0,
         obj_grad = 0.0;

  for (int trial = 0; trial < trials; ++trial) {
    const VecX qa = random_q();
    const VecX qb = random_q();

    // joint jets against central differences of the local transform
    for (int link = 0; link < model.link_count(); ++link) {
      const JointSpec& joint = model.links[link].joint;
      const int dof = joint.dof_count();
      VecX ql = qb.segment(model.dof_offset(link), dof);
      const JointJet jet = joint_jet(joint, ql);
      for (int j = 0; j < dof; ++j) {
        VecX qp = ql, qm = ql;
        qp[j] += kFdStep;
        qm[j] -= kFdStep;
        const Mat4 fd1 =
            (joint_transform(joint, qp) - joint_transform(joint, qm)) / (2 * kFdStep);
        jet_d1 = std::max(jet_d1, rel_err(MatX(jet.d1[j]), MatX(fd1)));
        const JointJet jet_p = joint_jet(joint, qp);
        const JointJet jet_m = joint_jet(joint, qm);
        for (int l = 0; l < dof; ++l) {
          const Mat4 fd2 = (jet_p.d1[l] - jet_m.d1[l]) / (2 * kFdStep);
          jet_d2 = std::max(jet_d2, rel_err(MatX(jet.d2_at(l, j)), MatX(fd2)));
        }
      }
    }

    // correlation derivatives
    CorrelationRequest req{&model, qa, qb, VecX()};
    const auto [value, grad_b] = correlation_and_grad(req);
    (void)value;
    VecX fd_grad(n);
    MatX fd_bb(n, n), fd_ab(n, n);
    for (int j = 0; j < n; ++j) {
      CorrelationRequest rp = req, rm = req;
      rp.qb[j] += kFdStep;
      rm.qb[j] -= kFdStep;
      fd_grad[j] =
          (correlation_and_grad(rp).first - correlation_and_grad(rm).first) /
          (2 * kFdStep);
      fd_bb.col(j) =
          (correlation_and_grad(rp).second - correlation_and_grad(rm).second) /
          (2 * kFdStep);
      CorrelationRequest ap = req, am = req;
      ap.qa[j] += kFdStep;
      am.qa[j] -= kFdStep;
      fd_ab.row(j) =
          ((correlation_and_grad(ap).second - correlation_and_grad(am).second) /
           (2 * kFdStep))
              .transpose();
    }
    corr_grad = std::max(corr_grad, rel_err(grad_b, fd_grad));
    corr_bb = std::max(corr_bb, rel_err(hessian_bb(req), fd_bb));
    corr_ab = std::max(corr_ab, rel_err(hessian_ab(req), fd_ab));

    // objective gradient at a random window
    CollocationScheme scheme = build_scheme(scene.integrator.order, scene.dt);
    StepProblem problem;
    problem.model = &model;
    problem.scheme = &scheme;
    VecX qk = random_q();
    VecX qdot = random_q();
    problem.history = {Configuration(qk + scheme.times[0] * scene.dt * qdot), qk};
    problem.dt = scene.dt;
    problem.forces = forces;
    problem.kind = scene.integrator.objective == "energy" ? ObjectiveKind::energy_form
                                                          : ObjectiveKind::residual_form;
    StepObjective objective(problem);
    VecX x(objective.dim());
    for (int m = 0; m < scheme.unknown_count(); ++m) {
      x.segment(m * n, n) =
          qk + scheme.times[scheme.unknown_index(m)] * scene.dt * qdot;
    }
    const ObjectiveEval eval = objective.evaluate(x, false);
    VecX fd_obj(x.size());
    for (int j = 0; j < x.size(); ++j) {
      VecX xp = x, xm = x;
      xp[j] += kFdStep;
      xm[j] -= kFdStep;
      fd_obj[j] = (objective.value(xp) - objective.value(xm)) / (2 * kFdStep);
    }
    obj_grad = std::max(obj_grad, rel_err(eval.grad, fd_obj));
  }

  report.entries = {{"joint_jet_d1", jet_d1},       {"joint_jet_d2", jet_d2},
                    {"correlation_grad", corr_grad}, {"correlation_hess_bb", corr_bb},
                    {"correlation_hess_ab", corr_ab}, {"objective_grad", obj_grad}};
  return report;
}

double fit_log_exponent(const std::vector<double>& x, const std::vector<double>& y) {
  const size_t n = x.size();
  double sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (size_t i = 0; i < n; ++i) {
    const double lx = std::log(x[i]);
    const double ly = std::log(y[i]);
    sx += lx;
    sy += ly;
    sxx += lx * lx;
    sxy += lx * ly;
  }
  return (n * sxy - sx * sy) / (n * sxx - sx * sx);
}

namespace {

using Clock = std::chrono::steady_clock;

double time_per_call_ms(const std::function<void()>& fn, double min_total_ms) {
  // one warmup call, then enough repetitions to pass the time floor
  fn();
  int loops = 1;
  while (true) {
    const auto start = Clock::now();
    for (int i = 0; i < loops; ++i) fn();
    const double ms =
        std::chrono::duration<double, std::milli>(Clock::now() - start).count();
    if (ms >= min_total_ms || loops > (1 << 20)) return ms / loops;
    loops = ms <= 0.01 ? loops * 16 : static_cast<int>(loops * (min_total_ms / ms) + 1);
  }
}

}  // namespace

ScalingResult run_scaling_suite(const std::vector<int>& sizes, unsigned seed) {
  ScalingResult out;
  out.sizes = sizes;
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> uni(-0.5, 0.5);
  for (int n : sizes) {
    const Scene scene = make_single_hinge_chain_scene(n);
    const KinematicModel model = scene_model(scene);
    VecX qa(n), qb(n);
    for (int i = 0; i < n; ++i) {
      qa[i] = uni(rng);
      qb[i] = uni(rng);
    }
    CorrelationRequest req{&model, qa, qb, VecX()};
    out.grad_ms.push_back(
        time_per_call_ms([&] { correlation_and_grad(req); }, 60.0));
    out.hess_bb_ms.push_back(time_per_call_ms([&] { hessian_bb(req); }, 60.0));
    out.hess_ab_ms.push_back(time_per_call_ms([&] { hessian_ab(req); }, 60.0));
  }
  std::vector<double> xs(sizes.begin(), sizes.end());
  out.grad_exponent = fit_log_exponent(xs, out.grad_ms);
  out.hess_bb_exponent = fit_log_exponent(xs, out.hess_bb_ms);
  out.hess_ab_exponent = fit_log_exponent(xs, out.hess_ab_ms);
  return out;
}

TimestepResult run_timestep_suite(double duration) {
  TimestepResult out;
  out.dts = {0.001, 0.002, 0.004, 0.008, 0.016, 0.032, 0.064, 0.128};
  const Scene scene = make_chain_scene(10);
  const KinematicModel model = scene_model(scene);
  const ForceModel forces = scene_forces(scene);
  for (double dt : out.dts) {
    SimConfig sim = scene_sim_config(scene);
    sim.dt = dt;
    sim.duration = duration;
    const auto start = Clock::now();
    const Trajectory traj = simulate(model, forces, sim);
    const double ms =
        std::chrono::duration<double, std::milli>(Clock::now() - start).count();
    const double steps = static_cast<double>(traj.samples.size() - 1);
    out.per_step_ms.push_back(ms / steps);
    double iters = 0.0;
    for (const auto& r : traj.solve_reports) iters += r.iterations;
    out.mean_iterations.push_back(iters / steps);
  }
  return out;
}

namespace {

double mean_iterations(const Trajectory& traj) {
  if (traj.solve_reports.empty()) return 0.0;
  double sum = 0.0;
  for (const auto& r : traj.solve_reports) sum += r.iterations;
  return sum / static_cast<double>(traj.solve_reports.size());
}

}  // namespace

IterationsResult run_iterations_suite(double duration) {
  IterationsResult out;
  auto run = [&](int segments, OptimizerKind kind) {
    const Scene scene = make_chain_scene(segments);
    const KinematicModel model = scene_model(scene);
    SimConfig sim = scene_sim_config(scene);
    sim.dt = 0.05;
    sim.duration = duration;
    sim.optimizer.kind = kind;
    return mean_iterations(simulate(model, scene_forces(scene), sim));
  };
  out.lm_mean_n10 = run(10, OptimizerKind::lm);
  out.lm_mean_n40 = run(40, OptimizerKind::lm);
  out.lbfgs_mean_n10 = run(10, OptimizerKind::lbfgs);
  return out;
}

BatchResult run_batch_suite(int trajectories, int steps, int workers, unsigned seed) {
  BatchResult out;
  out.workers = workers;
  const Scene scene = make_chain_scene(10);
  const KinematicModel model = scene_model(scene);
  const ForceModel forces = scene_forces(scene);
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> uni(-0.3, 0.3);

  std::vector<SimConfig> sims;
  sims.reserve(trajectories);
  for (int t = 0; t < trajectories; ++t) {
    SimConfig sim = scene_sim_config(scene);
    sim.dt = 0.05;
    sim.duration = steps * sim.dt;
    for (int i = 0; i < sim.q0.size(); ++i) sim.q0[i] = uni(rng);
    sims.push_back(sim);
  }

  std::vector<Trajectory> serial_ref(sims.size());
  for (size_t t = 0; t < sims.size(); ++t) {
    serial_ref[t] = simulate(model, forces, sims[t]);
  }

  auto start = Clock::now();
  const auto batch1 = batch_simulate(model, forces, sims, 1);
  out.serial_seconds = std::chrono::duration<double>(Clock::now() - start).count();

  start = Clock::now();
  const auto batchw = batch_simulate(model, forces, sims, workers);
  out.parallel_seconds = std::chrono::duration<double>(Clock::now() - start).count();

  for (size_t t = 0; t < sims.size(); ++t) {
    for (size_t s = 0; s < serial_ref[t].samples.size(); ++s) {
      const VecX d1 = batch1[t].samples[s].second - serial_ref[t].samples[s].second;
      const VecX dw = batchw[t].samples[s].second - serial_ref[t].samples[s].second;
      out.max_deviation = std::max(
          {out.max_deviation, d1.cwiseAbs().maxCoeff(), dw.cwiseAbs().maxCoeff()});
    }
  }
  return out;
}

std::vector<SwingRun> run_swing_suite(const std::string& out_dir) {
  std::vector<SwingRun> out;
  const Scene scene = make_chain_scene(10);
  const KinematicModel model = scene_model(scene);
  const ForceModel forces = scene_forces(scene);

  auto record = [&](const std::string& label, const Trajectory& traj, double dt) {
    SwingRun run;
    run.label = label;
    run.dt = dt;
    run.initial_energy = traj.energy_log.front().total();
    run.final_energy = traj.energy_log.back().total();
    run.max_energy = -1e300;
    for (const auto& e : traj.energy_log) {
      if (!std::isfinite(e.total())) run.finite = false;
      run.max_energy = std::max(run.max_energy, e.total());
    }
    if (traj.error) run.finite = false;
    write_energy_csv(out_dir + "/swing_" + label + ".csv", traj);
    out.push_back(run);
  };

  for (const auto& [label, order, dt] :
       {std::tuple<std::string, int, double>{"pbad_k2_dt0.0025", 2, 0.0025},
        {"pbad_k3_dt0.0025", 3, 0.0025},
        {"pbad_k2_dt0.05", 2, 0.05}}) {
    SimConfig sim = scene_sim_config(scene);
    sim.dt = dt;
    sim.order = order;
    sim.objective = order == 2 ? ObjectiveKind::energy_form : ObjectiveKind::residual_form;
    record(label, simulate(model, forces, sim), dt);
  }
  for (const auto& [label, scheme, dt] :
       {std::tuple<std::string, BaselineScheme, double>{
            "semi_implicit_dt0.0025", BaselineScheme::semi_implicit, 0.0025},
        {"semi_implicit_dt0.05", BaselineScheme::semi_implicit, 0.05},
        {"forward_euler_dt0.0025", BaselineScheme::forward_euler, 0.0025}}) {
    SimConfig sim = scene_sim_config(scene);
    sim.dt = dt;
    record(label, simulate_baseline(model, forces, scheme, sim), dt);
  }
  return out;
}

}  // namespace pbad
