#include <doctest.h>

#include "evolvefem/laws.hpp"
#include "evolvefem/verify.hpp"

#include <cmath>

using namespace evolvefem;
using namespace evolvefem::laws;

namespace {

std::shared_ptr<const mesh::SurfaceMesh> sphere(int level, int k = 2) {
  return std::make_shared<const mesh::SurfaceMesh>(mesh::generate_sphere_mesh(level, k));
}

// A state whose whole history sits at the initial surface.
SimulationState constant_history(const ProblemConfig& cfg, const mesh::SurfaceMesh& m) {
  SimulationState s;
  s.step = cfg.order - 1;
  s.time = s.step * cfg.tau;
  s.x = History(cfg.order);
  s.v = History(cfg.order);
  s.mv = History(cfg.order);
  s.u = History(cfg.order);
  s.mu = History(cfg.order);
  for (int j = 0; j < cfg.order; ++j) s.x.push(m.initial_positions().values);
  s.velocity = Vector::Zero(3 * m.num_nodes());
  return s;
}

}  // namespace

TEST_CASE("configuration validation") {
  ProblemConfig cfg;
  CHECK_NOTHROW(cfg.validate());
  cfg.law = Law::Dynamic;
  cfg.order = 6;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.law = Law::Coupled;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.law = Law::Regularized;
  CHECK_NOTHROW(cfg.validate());
  cfg.order = 7;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.order = 2;
  cfg.alpha = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.allow_zero_alpha = true;
  CHECK_NOTHROW(cfg.validate());
  cfg.beta = -1.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  cfg.beta = 1.0;
  cfg.tau = 0.0;
  CHECK_THROWS_AS(cfg.validate(), ConfigError);
  CHECK_THROWS_AS(parse_law("curvature"), ConfigError);
  CHECK(parse_law("dynamic") == Law::Dynamic);
  CHECK(parse_start_mode("exact") == StartMode::Exact);
}

TEST_CASE("history keeps the newest entries first") {
  History h(2);
  h.push(Vector::Constant(1, 1.0));
  h.push(Vector::Constant(1, 2.0));
  h.push(Vector::Constant(1, 3.0));
  CHECK(h.size() == 2);
  CHECK(h[0][0] == 3.0);
  CHECK(h[1][0] == 2.0);
}

TEST_CASE("step count") {
  CHECK(step_count(5.0, 0.1) == 50);
  CHECK(step_count(5.0, 0.00625) == 800);
  CHECK(step_count(0.25, 0.1) == 2);
  CHECK(step_count(0.05, 0.1) == 0);
}

TEST_CASE("stationary data stay stationary") {
  const auto m = sphere(2);
  const fem::Assembler asmb(m);
  for (int p : {1, 2, 4, 6}) {
    CAPTURE(p);
    ProblemConfig cfg;
    cfg.order = p;
    cfg.beta = 0.0;
    cfg.tau = 0.05;
    cfg.solver.rel_tol = 1e-12;
    SimulationState s = constant_history(cfg, *m);
    step_regularized(s, cfg, asmb);
    CHECK((s.x.newest() - m->initial_positions().values).cwiseAbs().maxCoeff() < 1e-10);
    CHECK(s.velocity.cwiseAbs().maxCoeff() < 1e-8);
    CHECK(s.step == p);
  }
  for (int p : {1, 3, 5}) {
    ProblemConfig cfg;
    cfg.law = Law::Dynamic;
    cfg.order = p;
    SimulationState s = constant_history(cfg, *m);
    for (int j = 0; j < p; ++j) {
      s.v.push(Vector::Zero(3 * m->num_nodes()));
      s.mv.push(Vector::Zero(3 * m->num_nodes()));
    }
    step_dynamic(s, cfg, asmb);
    CHECK(s.velocity.cwiseAbs().maxCoeff() == 0.0);
    CHECK((s.x.newest() - m->initial_positions().values).cwiseAbs().maxCoeff() < 1e-13);
  }
}

TEST_CASE("dynamic and coupled steppers reject order 6") {
  const auto m = sphere(0);
  const fem::Assembler asmb(m);
  ProblemConfig cfg;
  cfg.order = 6;
  SimulationState s = constant_history(cfg, *m);
  cfg.law = Law::Dynamic;
  CHECK_THROWS_AS(step_dynamic(s, cfg, asmb), ConfigError);
  cfg.law = Law::Coupled;
  CHECK_THROWS_AS(step_coupled(s, cfg, asmb), ConfigError);
}

TEST_CASE("each step is affine in the driving data") {
  const auto m = sphere(2);
  const fem::Assembler asmb(m);
  auto solve_with = [&](double scale) {
    ProblemConfig cfg;
    cfg.order = 2;
    cfg.tau = 0.1;
    cfg.beta = 0.0;
    cfg.solver.rel_tol = 1e-13;
    cfg.g = [scale](const Vec3& x, double) { return scale * (1.0 + x.z()); };
    SimulationState s = constant_history(cfg, *m);
    step_regularized(s, cfg, asmb);
    return Vector(s.x.newest());
  };
  const Vector x0 = solve_with(0.0), x1 = solve_with(1.0), x2 = solve_with(2.0);
  CHECK(((x2 - x0) - 2.0 * (x1 - x0)).norm() < 1e-10 * (x1 - x0).norm());
}

TEST_CASE("coupled law without feedback reproduces the regularized trajectory bitwise") {
  const auto m = sphere(2);
  const verify::ManufacturedSolution ms;
  ProblemConfig reg = ms.problem(Law::Regularized, 2, 0.1, 0.5);
  ProblemConfig cpl = reg;
  cpl.law = Law::Coupled;
  const PointForcing g = reg.g;
  cpl.g_coupled = [g](double, const Vec3&, const Vec3& x, double t) { return g(x, t); };
  cpl.f = {};
  cpl.initial_u = {};

  const RunSummary a = run(reg, m);
  const RunSummary b = run(cpl, m);
  REQUIRE(a.final_state.step == b.final_state.step);
  CHECK(a.final_state.x.newest() == b.final_state.x.newest());
  CHECK(a.final_state.velocity == b.final_state.velocity);
  CHECK(b.final_state.u.newest().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("u is conserved on a static surface without sources") {
  const auto m = sphere(2);
  ProblemConfig cfg;
  cfg.law = Law::Coupled;
  cfg.order = 3;
  cfg.tau = 0.05;
  cfg.end_time = 0.5;
  cfg.beta = 0.0;
  cfg.solver.rel_tol = 1e-13;
  cfg.initial_u = [](const Vec3& x) { return 1.0 + x.x() * x.y() + x.z(); };
  const fem::Assembler asmb(m);
  std::vector<double> mass;
  auto record = [&](const Observation& o) {
    const fem::SparseSymMatrix mm = asmb.mass(o.positions);
    mass.push_back(Vector::Ones(m->num_nodes()).dot(mm * o.u->values));
  };
  run(cfg, m, {record});
  REQUIRE(mass.size() == 11);
  for (double v : mass) CHECK(v == doctest::Approx(mass[0]).epsilon(1e-9));
}

TEST_CASE("starting values") {
  const auto m = sphere(2);
  const fem::Assembler asmb(m);
  const verify::ManufacturedSolution ms;
  const ExactFlow flow = ms.flow(m);

  SUBCASE("p = 1 returns the initial surface") {
    const ProblemConfig cfg = ms.problem(Law::Regularized, 1, 0.1, 1.0);
    const SimulationState s = starting_values(cfg, asmb, StartMode::Bootstrap);
    CHECK(s.x.size() == 1);
    CHECK(s.x.newest() == m->initial_positions().values);
  }
  SUBCASE("exact mode interpolates the flow") {
    const ProblemConfig cfg = ms.problem(Law::Dynamic, 3, 0.1, 1.0);
    const SimulationState s = starting_values(cfg, asmb, StartMode::Exact, &flow);
    CHECK(s.step == 2);
    for (int i = 0; i < 3; ++i) CHECK(s.x[2 - i] == ms.positions(*m, 0.1 * i).values);
    CHECK(s.v[0] == ms.velocity(*m, 0.2).values);
    CHECK_THROWS_AS(starting_values(cfg, asmb, StartMode::Exact), ConfigError);
  }
  SUBCASE("bootstrap accuracy") {
    for (int p : {2, 3}) {
      CAPTURE(p);
      std::vector<double> errs;
      for (double tau : {0.1, 0.05, 0.025}) {
        const ProblemConfig cfg = ms.problem(Law::Regularized, p, tau, 1.0);
        const SimulationState s = starting_values(cfg, asmb, StartMode::Bootstrap);
        const NodalVector exact = ms.positions(*m, (p - 1) * tau);
        errs.push_back(verify::error_norms(s.positions(), exact, asmb).h1);
      }
      // BDF2 starts with order 2; higher orders inherit the order-2 BDF1 start
      CHECK(std::log2(errs[1] / errs[2]) > 1.8);
    }
  }
}

TEST_CASE("run bookkeeping") {
  const auto m = sphere(1);
  const verify::ManufacturedSolution ms;
  SUBCASE("trajectory length and observer stride") {
    ProblemConfig cfg = ms.problem(Law::Regularized, 3, 0.1, 1.0);
    int calls = 0;
    std::vector<int> seen;
    RunOptions opts;
    opts.stride = 3;
    const RunSummary sum = run(cfg, m, {[&](const Observation& o) {
                                 ++calls;
                                 seen.push_back(o.step);
                               }},
                               opts);
    CHECK(sum.steps == 10);
    CHECK(sum.final_state.step == 10);
    CHECK(calls == 4);  // ceil(11 / 3)
    CHECK(seen == std::vector<int>{0, 3, 6, 9});
    CHECK(sum.observer_calls == 4);
  }
  SUBCASE("T = p tau") {
    ProblemConfig cfg = ms.problem(Law::Regularized, 3, 0.1, 0.3);
    int calls = 0;
    const RunSummary sum = run(cfg, m, {[&](const Observation&) { ++calls; }});
    CHECK(calls == 4);
    CHECK(sum.final_state.step == 3);
  }
  SUBCASE("tau larger than T") {
    ProblemConfig cfg = ms.problem(Law::Regularized, 2, 1.0, 0.5);
    const RunSummary sum = run(cfg, m);
    CHECK(sum.steps == 0);
    CHECK(sum.start_only);
  }
  SUBCASE("solver failures carry the step index") {
    ProblemConfig cfg = ms.problem(Law::Regularized, 2, 0.1, 1.0);
    cfg.solver.max_iterations = 1;
    try {
      run(cfg, m);
      FAIL("expected SolverError");
    } catch (const SolverError& e) {
      CHECK(std::string(e.what()).rfind("step ", 0) == 0);
    }
  }
  SUBCASE("determinism") {
    ProblemConfig cfg = ms.problem(Law::Dynamic, 2, 0.1, 0.5);
    CHECK(run(cfg, m).final_state.x.newest() == run(cfg, m).final_state.x.newest());
  }
}

TEST_CASE("regularized law converges with order p in time on a coarse mesh") {
  verify::StudyConfig cfg;
  cfg.end_time = 2.0;
  const auto runs = verify::time_sweep(cfg, 2, {0.1, 0.05, 0.025}, 1);
  const verify::ConvergenceTable t = verify::table_in_tau(runs, verify::Quantity::Position);
  CHECK(t.rows[1].eoc_h1 == doctest::Approx(2.0).epsilon(0.15));
}

TEST_CASE("dynamic law: velocity stays bounded without forcing") {
  const auto m = sphere(2);
  for (int p = 1; p <= 5; ++p) {
    CAPTURE(p);
    ProblemConfig cfg;
    cfg.law = Law::Dynamic;
    cfg.order = p;
    cfg.tau = 0.02;
    cfg.end_time = 1.0;
    cfg.initial_velocity = [](const Vec3& x) -> Vec3 { return Vec3(x.y(), -x.x(), 0.3) * 0.2; };
    const fem::Assembler asmb(m);
    std::vector<double> norms;
    run(cfg, m, {[&](const Observation& o) {
          norms.push_back(fem::norm_M(o.velocity.values, asmb.mass(o.positions)));
        }});
    const double start = *std::max_element(norms.begin(), norms.begin() + p);
    for (double v : norms) CHECK(v <= 1.05 * start);
    CHECK(norms.back() < norms.front());  // alpha A damps the rotation and the constant
  }
}

TEST_CASE("mean curvature flow shrinks a rounded cube") {
  const auto base = mesh::scaled(mesh::generate_sphere_mesh(2, 2), 2.0);
  const auto cube = std::make_shared<const mesh::SurfaceMesh>(
      mesh::generate_implicit_mesh(mesh::rounded_cube_level_set(2.0, 4), base));
  ProblemConfig cfg;
  cfg.order = 4;
  cfg.alpha = 0.01;
  cfg.beta = 1.0;
  cfg.tau = 0.01;
  cfg.end_time = 0.1;
  const fem::Assembler asmb(cube);
  std::vector<double> area;
  run(cfg, cube, {[&](const Observation& o) { area.push_back(verify::surface_area(asmb, o.positions)); }});
  REQUIRE(area.size() == 11);
  for (std::size_t i = 1; i < area.size(); ++i) CHECK(area[i] < area[i - 1]);
}
