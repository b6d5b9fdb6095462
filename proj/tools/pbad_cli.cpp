#include <CLI11.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>

#include "pbad/benchmark.hpp"
#include "pbad/csv.hpp"
#include "pbad/scene.hpp"

namespace fs = std::filesystem;
using namespace pbad;

namespace {

struct Overrides {
  double dt = 0.0;
  double duration = 0.0;
  int order = 0;
  std::string optimizer;
  std::string objective;
};

void apply_overrides(Scene& scene, const Overrides& o) {
  if (o.dt > 0.0) scene.dt = o.dt;
  if (o.duration > 0.0) scene.duration = o.duration;
  if (o.order > 0) {
    scene.integrator.order = o.order;
    if (o.objective.empty()) {
      scene.integrator.objective = o.order == 2 ? scene.integrator.objective : "residual";
    }
  }
  if (!o.optimizer.empty()) scene.integrator.optimizer = o.optimizer;
  if (!o.objective.empty()) scene.integrator.objective = o.objective;
  if (scene.integrator.objective == "energy" && scene.integrator.order != 2) {
    throw SceneError("scene: the energy objective requires order 2");
  }
}

int run_simulate(const std::string& scene_path, const std::string& out_dir,
                 const Overrides& overrides) {
  Scene scene = load_scene(scene_path);
  apply_overrides(scene, overrides);
  const KinematicModel model = scene_model(scene);
  const ForceModel forces = scene_forces(scene);
  const SimConfig sim = scene_sim_config(scene);

  fs::create_directories(out_dir);
  Trajectory traj;
  if (scene_is_pbad(scene)) {
    traj = simulate(model, forces, sim);
  } else {
    traj = simulate_baseline(model, forces, scene_baseline_scheme(scene), sim);
  }
  write_trajectory_csv(out_dir + "/trajectory.csv", traj);
  write_energy_csv(out_dir + "/energy.csv", traj);
  if (traj.error) {
    std::cerr << "warning: trajectory ended early: " << *traj.error << "\n";
  }
  std::cout << "wrote " << out_dir << "/trajectory.csv and energy.csv ("
            << traj.samples.size() << " samples)\n";
  return 0;
}

int run_check_derivatives(const std::string& scene_path, int trials, unsigned seed) {
  const Scene scene = load_scene(scene_path);
  const DerivativeReport report = check_derivatives(scene, trials, seed);
  for (const auto& e : report.entries) {
    std::printf("%-22s max relative error %.3e\n", e.category.c_str(), e.max_rel_err);
  }
  if (report.entries.empty()) {
    std::printf("no trials requested\n");
    return 0;
  }
  return report.worst() <= 1e-4 ? 0 : 1;
}

int run_benchmark(const std::string& suite, const std::string& out_dir, int workers,
                  unsigned seed) {
  fs::create_directories(out_dir);
  if (suite == "swing") {
    const auto runs = run_swing_suite(out_dir);
    std::ofstream summary(out_dir + "/swing_summary.csv", std::ios::binary);
    summary << "label,dt,initial_energy,final_energy,max_energy,finite\n";
    char buf[160];
    for (const auto& r : runs) {
      std::snprintf(buf, sizeof(buf), "%s,%.17g,%.17g,%.17g,%.17g,%d\n",
                    r.label.c_str(), r.dt, r.initial_energy, r.final_energy,
                    r.max_energy, r.finite ? 1 : 0);
      summary << buf;
    }
    std::cout << "swing suite written to " << out_dir << "\n";
  } else if (suite == "scaling") {
    const auto result = run_scaling_suite({10, 20, 40, 80, 160}, seed);
    CsvWriter csv(out_dir + "/scaling.csv", {"n", "grad_ms", "hess_bb_ms", "hess_ab_ms"});
    for (size_t i = 0; i < result.sizes.size(); ++i) {
      csv.row({static_cast<double>(result.sizes[i]), result.grad_ms[i],
               result.hess_bb_ms[i], result.hess_ab_ms[i]});
    }
    CsvWriter exps(out_dir + "/scaling_exponents.csv",
                   {"grad_exponent", "hess_bb_exponent", "hess_ab_exponent"});
    exps.row({result.grad_exponent, result.hess_bb_exponent, result.hess_ab_exponent});
    std::printf("fitted exponents: grad %.3f, hess_bb %.3f, hess_ab %.3f\n",
                result.grad_exponent, result.hess_bb_exponent, result.hess_ab_exponent);
  } else if (suite == "timestep") {
    const auto result = run_timestep_suite(10.0);
    CsvWriter csv(out_dir + "/timestep.csv", {"dt", "per_step_ms", "mean_iterations"});
    for (size_t i = 0; i < result.dts.size(); ++i) {
      csv.row({result.dts[i], result.per_step_ms[i], result.mean_iterations[i]});
    }
    std::cout << "timestep suite written to " << out_dir << "/timestep.csv\n";
  } else if (suite == "iterations") {
    const auto result = run_iterations_suite(2.0);
    CsvWriter csv(out_dir + "/iterations.csv",
                  {"lm_mean_n10", "lm_mean_n40", "lbfgs_mean_n10"});
    csv.row({result.lm_mean_n10, result.lm_mean_n40, result.lbfgs_mean_n10});
    std::printf("mean iterations: LM n=10 %.2f, LM n=40 %.2f, LBFGS n=10 %.2f\n",
                result.lm_mean_n10, result.lm_mean_n40, result.lbfgs_mean_n10);
  } else if (suite == "batch") {
    const auto result = run_batch_suite(100, 10, workers, seed);
    CsvWriter csv(out_dir + "/batch.csv",
                  {"trajectories", "steps", "workers", "serial_seconds",
                   "parallel_seconds", "speedup", "max_deviation"});
    csv.row({100.0, 10.0, static_cast<double>(result.workers), result.serial_seconds,
             result.parallel_seconds, result.serial_seconds / result.parallel_seconds,
             result.max_deviation});
    std::printf("batch: serial %.3fs, %d workers %.3fs, speedup %.2fx\n",
                result.serial_seconds, result.workers, result.parallel_seconds,
                result.serial_seconds / result.parallel_seconds);
  } else {
    std::cerr << "unknown suite '" << suite << "'\n";
    return 2;
  }
  return 0;
}

int run_emit_scenes(const std::string& dir) {
  fs::create_directories(dir);
  const std::pair<std::string, Scene> scenes[] = {
      {"chain10", make_chain_scene(10)},
      {"chain100", make_chain_scene(100)},
      {"swimmer", make_swimmer_scene()},
      {"spider", make_spider_scene()},
  };
  for (const auto& [name, scene] : scenes) {
    std::ofstream out(dir + "/" + name + ".json", std::ios::binary);
    out << serialize_scene(scene);
    std::cout << "wrote " << dir << "/" << name << ".json\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"position-based articulated dynamics engine"};
  app.require_subcommand(1);

  std::string scene_path, out_dir = "out", suite = "swing", scenes_dir = "scenes";
  Overrides overrides;
  int trials = 50;
  int workers = 4;
  unsigned seed = 0;

  auto* sim = app.add_subcommand("simulate", "run a scene and write CSV outputs");
  sim->add_option("--scene", scene_path, "scene JSON file")->required();
  sim->add_option("--out", out_dir, "output directory");
  sim->add_option("--dt", overrides.dt, "timestep override [s]");
  sim->add_option("--duration", overrides.duration, "duration override [s]");
  sim->add_option("--order", overrides.order, "collocation order override");
  sim->add_option("--optimizer", overrides.optimizer, "lm or lbfgs")
      ->check(CLI::IsMember({"lm", "lbfgs"}));
  sim->add_option("--objective", overrides.objective, "energy or residual")
      ->check(CLI::IsMember({"energy", "residual"}));

  auto* chk = app.add_subcommand("check-derivatives",
                                 "finite-difference audit of the derivative stack");
  chk->add_option("--scene", scene_path, "scene JSON file")->required();
  chk->add_option("--trials", trials, "number of random trials");
  chk->add_option("--seed", seed, "RNG seed");

  auto* bench = app.add_subcommand("benchmark", "run a benchmark suite");
  bench->add_option("--suite", suite, "swing | scaling | timestep | iterations | batch")
      ->required()
      ->check(CLI::IsMember({"swing", "scaling", "timestep", "iterations", "batch"}));
  bench->add_option("--out", out_dir, "output directory");
  bench->add_option("--workers", workers, "worker count for the batch suite");
  bench->add_option("--seed", seed, "RNG seed");

  auto* emit = app.add_subcommand("emit-scenes", "write the bundled scene files");
  emit->add_option("--dir", scenes_dir, "target directory");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim->parsed()) return run_simulate(scene_path, out_dir, overrides);
    if (chk->parsed()) return run_check_derivatives(scene_path, trials, seed);
    if (bench->parsed()) return run_benchmark(suite, out_dir, workers, seed);
    if (emit->parsed()) return run_emit_scenes(scenes_dir);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
