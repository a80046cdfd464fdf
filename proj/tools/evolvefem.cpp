// evolvefem: experiment driver for evolving-surface finite elements with linearly
// implicit BDF time stepping.

#include <CLI11.hpp>

#include <iostream>

#include "evolvefem/experiment.hpp"

using namespace evolvefem;
using experiment::RunConfig;

namespace {

// Flags override the config file, so everything is captured first and applied after.
struct Overrides {
  std::string config;
  std::string law, start, geometry, output_dir;
  int order = 0, degree = 0, stride = 0, tau_count = 0;
  double tau = 0, end_time = 0, alpha = 0, beta = 0, r0 = 0, r1 = 0, half_width = 0;
  std::vector<int> levels;
  std::vector<double> taus;
  bool no_vtk = false, allow_zero_alpha = false, no_manufactured = false;
  std::vector<CLI::Option*> opts;

  void attach(CLI::App* app) {
    app->add_option("-c,--config", config, "flat TOML run configuration")->check(CLI::ExistingFile);
    opts = {
        app->add_option("--law", law, "regularized | dynamic | coupled | mcf-demo"),
        app->add_option("-p,--order", order, "BDF order"),
        app->add_option("-k,--degree", degree, "finite element degree (1 or 2)"),
        app->add_option("--tau", tau, "time step"),
        app->add_option("-T,--end-time", end_time, "final time"),
        app->add_option("--alpha", alpha, "velocity regularization"),
        app->add_option("--beta", beta, "mean curvature weight"),
        app->add_option("-l,--levels", levels, "sphere refinement levels"),
        app->add_option("--taus", taus, "explicit time steps"),
        app->add_option("--tau-count", tau_count, "number of halvings from 0.1"),
        app->add_option("--start", start, "exact | bootstrap"),
        app->add_option("--geometry", geometry, "sphere | rounded-cube"),
        app->add_option("--half-width", half_width, "rounded cube half width"),
        app->add_option("--r0", r0, "initial sphere radius"),
        app->add_option("--r1", r1, "limit radius of the logistic growth"),
        app->add_option("-o,--output", output_dir, "output directory"),
        app->add_option("--stride", stride, "observe every n-th step"),
        app->add_flag("--no-vtk", no_vtk, "skip VTK output"),
        app->add_flag("--allow-zero-alpha", allow_zero_alpha, "accept alpha = 0"),
        app->add_flag("--no-manufactured", no_manufactured, "drop the manufactured forcing"),
    };
  }

  bool given(const char* name) const {
    for (auto* o : opts)
      if (o->check_lname(name)) return o->count() > 0;
    return false;
  }

  RunConfig resolve(RunConfig base) const {
    if (!config.empty()) base = experiment::load_run_config(config, base);
    if (given("law")) {
      base.law = law;
      if (law == "mcf-demo") base = preset_with_output(base);
    }
    if (given("order")) base.order = order;
    if (given("degree")) base.degree = degree;
    if (given("tau")) base.tau = tau;
    if (given("end-time")) base.end_time = end_time;
    if (given("alpha")) base.alpha = alpha;
    if (given("beta")) base.beta = beta;
    if (given("levels")) base.levels = levels;
    if (given("taus")) base.taus = taus;
    if (given("tau-count")) base.tau_count = tau_count;
    if (given("start")) base.start = start;
    if (given("geometry")) base.geometry = geometry;
    if (given("half-width")) base.cube_half_width = half_width;
    if (given("r0")) base.r0 = r0;
    if (given("r1")) base.r1 = r1;
    if (given("output")) base.output_dir = output_dir;
    if (given("stride")) base.stride = stride;
    if (no_vtk) base.write_vtk = false;
    if (allow_zero_alpha) base.allow_zero_alpha = true;
    if (no_manufactured) base.manufactured = false;
    return base;
  }

  static RunConfig preset_with_output(const RunConfig& c) {
    RunConfig p = experiment::mcf_demo_preset();
    p.output_dir = c.output_dir == RunConfig{}.output_dir ? p.output_dir : c.output_dir;
    return p;
  }
};

void print_table(const verify::ConvergenceTable& t) { t.write_csv(std::cout); }

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Evolving surface finite elements with linearly implicit BDF methods"};
  app.require_subcommand(1);

  Overrides run_o, time_o, space_o, demo_o;
  auto* run = app.add_subcommand("run", "simulate one configuration, write VTK and summary.json");
  run_o.attach(run);
  auto* ctime = app.add_subcommand("converge-time", "temporal convergence tables");
  time_o.attach(ctime);
  auto* cspace = app.add_subcommand("converge-space", "spatial convergence tables");
  space_o.attach(cspace);
  auto* demo = app.add_subcommand("mcf-demo", "rounded cube under regularized mean curvature flow");
  demo_o.attach(demo);
  int coeff_p = 2;
  auto* coeff = app.add_subcommand("coefficients", "BDF coefficients and stability data");
  coeff->add_option("p", coeff_p, "order")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  const int threads = verify::thread_count_from_env();
  try {
    if (*run) {
      const RunConfig cfg = run_o.resolve(RunConfig{});
      const auto records = experiment::cmd_run(cfg, std::cerr);
      for (const auto& r : records) {
        std::cout << r.name << ": t = " << r.summary.final_state.time << ", steps "
                  << r.summary.steps << ", area " << r.areas.back();
        if (r.position_error)
          std::cout << ", position error L2 " << r.position_error->l2 << " H1 "
                    << r.position_error->h1;
        std::cout << '\n';
      }
    } else if (*demo) {
      const RunConfig cfg = demo_o.resolve(experiment::mcf_demo_preset());
      const auto records = experiment::cmd_run(cfg, std::cerr);
      for (const auto& r : records)
        std::cout << r.name << ": area " << r.areas.front() << " -> " << r.areas.back() << '\n';
    } else if (*ctime) {
      RunConfig base;
      base.end_time = 5.0;
      for (const auto& t : experiment::cmd_converge_time(time_o.resolve(base), threads))
        print_table(t);
    } else if (*cspace) {
      RunConfig base;
      base.end_time = 5.0;
      base.levels = {1, 2, 3};
      for (const auto& t : experiment::cmd_converge_space(space_o.resolve(base), threads))
        print_table(t);
    } else if (*coeff) {
      experiment::cmd_coefficients(coeff_p, std::cout);
    }
  } catch (const ConfigError& e) {
    std::cerr << "configuration error: " << e.what() << '\n';
    return 2;
  } catch (const InputError& e) {
    std::cerr << "input error: " << e.what() << '\n';
    return 2;
  } catch (const SolverError& e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return 3;
  } catch (const DegenerateElementError& e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return 3;
  } catch (const ProjectionError& e) {
    std::cerr << "solver failure: " << e.what() << '\n';
    return 3;
  } catch (const IoError& e) {
    std::cerr << "io error: " << e.what() << '\n';
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
