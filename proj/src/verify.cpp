#include "evolvefem/verify.hpp"

#include <atomic>
#include <cmath>
#include <cstdlib>
#include <exception>
#include <iomanip>
#include <ostream>
#include <random>
#include <sstream>
#include <thread>

namespace evolvefem::verify {

namespace {

// Closed form without argument checks; also valid for small negative t (central
// differences at t = 0).
double radius_unchecked(double t, double r0, double r1) {
  const double e = std::exp(-t);
  return r0 * r1 / (r0 * (1.0 - e) + r1 * e);
}

}  // namespace

Radius logistic_radius(double t, double r0, double r1) {
  if (!(t >= 0.0)) throw InputError("logistic_radius: t must be >= 0");
  if (!(r0 > 0.0) || !(r1 >= r0)) throw InputError("logistic_radius: need r1 >= r0 > 0");
  const double r = radius_unchecked(t, r0, r1);
  return {r, (1.0 - r / r1) * r};
}

double ManufacturedSolution::radius(double t) const { return radius_unchecked(t, r0, r1); }

double ManufacturedSolution::c(double t) const { return 1.0 - radius(t) / r1; }

double ManufacturedSolution::cdot(double t) const {
  const double r = radius(t);
  return -(1.0 - r / r1) * r / r1;
}

namespace {

void require_on_sphere(const Vec3& x, double r, const char* who) {
  if (std::abs(x.norm() - r) > 1e-8 * r) {
    std::ostringstream msg;
    msg << who << ": point with |x| = " << x.norm() << " is not on the sphere of radius " << r;
    throw InputError(msg.str());
  }
}

double g_regularized_t(const ManufacturedSolution& ms, double t) {
  const double r = ms.radius(t), c = ms.c(t);
  return c * r + 2.0 * ms.alpha * c / r + 2.0 * ms.beta / r;
}

double g_dynamic_t(const ManufacturedSolution& ms, double t) {
  const double r = ms.radius(t), c = ms.c(t);
  return (ms.cdot(t) + 3.0 * c * c) * r + 2.0 * ms.alpha * c / r;
}

}  // namespace

Vec3 ManufacturedSolution::exact_velocity(const Vec3& x, double t) const {
  require_on_sphere(x, radius(t), "exact_velocity");
  return c(t) * x;
}

double ManufacturedSolution::forcing_regularized(const Vec3& x, double t) const {
  require_on_sphere(x, radius(t), "forcing_regularized");
  return g_regularized_t(*this, t);
}

double ManufacturedSolution::forcing_dynamic(const Vec3& x, double t) const {
  require_on_sphere(x, radius(t), "forcing_dynamic");
  return g_dynamic_t(*this, t);
}

double ManufacturedSolution::u_exact(const Vec3& x, double t) const {
  const double r = radius(t);
  return std::exp(-t) * x.x() * x.y() / (r * r);
}

double ManufacturedSolution::f_coupled(double u, const Vec3&, double t) const {
  const double r = radius(t);
  return (2.0 * c(t) - 1.0 + 6.0 / (r * r)) * u;
}

double ManufacturedSolution::g_coupled(double u, const Vec3& x, double t) const {
  return g_regularized_t(*this, t) + kappa * (u - u_exact(x, t));
}

NodalVector ManufacturedSolution::positions(const mesh::SurfaceMesh& mesh, double t) const {
  NodalVector x = mesh.initial_positions();
  x.values *= radius(t) / r0;
  return x;
}

NodalVector ManufacturedSolution::velocity(const mesh::SurfaceMesh& mesh, double t) const {
  NodalVector v = positions(mesh, t);
  v.values *= c(t);
  return v;
}

NodalVector ManufacturedSolution::u(const mesh::SurfaceMesh& mesh, double t) const {
  return fem::interpolate_scalar(positions(mesh, t), [&](const Vec3& x) { return u_exact(x, t); });
}

laws::ExactFlow ManufacturedSolution::flow(std::shared_ptr<const mesh::SurfaceMesh> mesh) const {
  const ManufacturedSolution ms = *this;
  return {[ms, mesh](double t) { return ms.positions(*mesh, t); },
          [ms, mesh](double t) { return ms.velocity(*mesh, t); },
          [ms, mesh](double t) { return ms.u(*mesh, t); }};
}

CoupledData coupled_manufactured(const ManufacturedSolution& ms) {
  return {[ms](const Vec3& x, double t) { return ms.u_exact(x, t); },
          [ms](double u, const Vec3&, const Vec3& x, double t) { return ms.f_coupled(u, x, t); },
          [ms](double u, const Vec3&, const Vec3& x, double t) { return ms.g_coupled(u, x, t); }};
}

laws::ProblemConfig ManufacturedSolution::problem(laws::Law law, int order, double tau,
                                                  double end_time) const {
  laws::ProblemConfig cfg;
  cfg.law = law;
  cfg.alpha = alpha;
  cfg.beta = beta;
  cfg.order = order;
  cfg.tau = tau;
  cfg.end_time = end_time;
  const ManufacturedSolution ms = *this;
  // Forcings are evaluated at quadrature points of the discrete surface, which lie off
  // the exact sphere, so the t-only closed forms are used directly.
  switch (law) {
    case laws::Law::Regularized:
      cfg.g = [ms](const Vec3&, double t) { return g_regularized_t(ms, t); };
      break;
    case laws::Law::Dynamic:
      cfg.g = [ms](const Vec3&, double t) { return g_dynamic_t(ms, t); };
      cfg.initial_velocity = [ms](const Vec3& x) -> Vec3 { return ms.c(0.0) * x; };
      break;
    case laws::Law::Coupled: {
      const CoupledData data = coupled_manufactured(ms);
      cfg.f = data.f;
      cfg.g_coupled = data.g;
      cfg.initial_u = [ms](const Vec3& x) { return ms.u_exact(x, 0.0); };
      break;
    }
  }
  return cfg;
}

ErrorNorms error_norms(const Vector& numeric, const Vector& exact,
                       const fem::Assembler& assembler, const NodalVector& surface) {
  if (numeric.size() != exact.size()) throw InputError("error_norms: dimension mismatch");
  const int n = assembler.mesh().num_nodes();
  if (numeric.size() != n && numeric.size() != 3 * n)
    throw InputError("error_norms: vector does not match the mesh");
  const auto [m, a] = assembler.mass_stiffness(surface);
  const Vector w = numeric - exact;
  ErrorNorms out;
  out.l2 = fem::norm_M(w, m);
  const double semi = fem::norm_A(w, a);
  out.h1 = std::sqrt(out.l2 * out.l2 + semi * semi);
  return out;
}

ErrorNorms error_norms(const NodalVector& numeric, const NodalVector& exact_nodes,
                       const fem::Assembler& assembler) {
  return error_norms(numeric.values, exact_nodes.values, assembler, exact_nodes);
}

double radial_lift_l2(const Vector& error, const fem::Assembler& assembler,
                      const NodalVector& surface, double r) {
  const int n = assembler.mesh().num_nodes();
  const NodalVector field(error, error.size() == n ? Arity::Scalar : Arity::Vector3);
  // dA on the sphere = (r / |y|)^2 (nu_h . y / |y|) dA_h for the central projection
  const double sq = assembler.integrate_field(
      surface, field, [r](const Vec3& y, const Vec3& nu, const Vec3& e) {
        const double ny = y.norm();
        return e.squaredNorm() * (r * r) / (ny * ny) * nu.dot(y) / ny;
      });
  return std::sqrt(std::max(sq, 0.0));
}

ErrorNorms lifted_position_error(const mesh::SurfaceMesh& mesh, const NodalVector& numeric,
                                 const NodalVector& exact_nodes, double r) {
  const int n = mesh.num_nodes();
  if (numeric.values.size() != 3 * n || exact_nodes.values.size() != 3 * n)
    throw InputError("lifted_position_error: size mismatch");
  const auto& ref = mesh::ReferenceElement::get(mesh.degree());
  const mesh::QuadratureRule quad = mesh::quadrature_rule(2 * mesh.degree() + 4);
  const int nloc = ref.node_count();
  std::array<Vec3, mesh::kMaxNodesPerElement> xh{}, xs{}, x0{};
  double l2 = 0.0, grad = 0.0;
  for (int e = 0; e < mesh.num_elements(); ++e) {
    mesh::gather_element(mesh, numeric.values, e, xh);
    mesh::gather_element(mesh, exact_nodes.values, e, xs);
    mesh::gather_element(mesh, mesh.initial_positions().values, e, x0);
    for (int q = 0; q < quad.size(); ++q) {
      const mesh::BasisEval b = ref.evaluate(quad.points[q]);
      const mesh::ElementGeometry g =
          mesh::element_geometry(std::span<const Vec3>(xs.data(), nloc), b, e);
      Vec3 y = Vec3::Zero(), err = Vec3::Zero();
      Eigen::Matrix<double, 3, 2> dy = Eigen::Matrix<double, 3, 2>::Zero();
      Eigen::Matrix<double, 3, 2> derr = Eigen::Matrix<double, 3, 2>::Zero();
      for (int i = 0; i < nloc; ++i) {
        y += b.values[i] * x0[i];
        err += b.values[i] * xh[i];
        dy += x0[i] * b.gradients[i].transpose();
        derr += xh[i] * b.gradients[i].transpose();
      }
      const double ny = y.norm();
      const Vec3 yhat = y / ny;
      err -= r * yhat;
      derr -= (r / ny) * (Eigen::Matrix3d::Identity() - yhat * yhat.transpose()) * dy;
      const double w = quad.weights[q] * g.area_element;
      l2 += w * err.squaredNorm();
      for (int c = 0; c < 3; ++c) {
        const Eigen::Vector2d d = derr.row(c).transpose();
        grad += w * d.dot(g.inv_gram * d);
      }
    }
  }
  return {std::sqrt(l2), std::sqrt(l2 + grad)};
}

double surface_area(const fem::Assembler& assembler, const NodalVector& positions) {
  return assembler.integrate(positions, [](const Vec3&, const Vec3&) { return 1.0; });
}

double surface_area(const mesh::SurfaceMesh& mesh, const NodalVector& positions) {
  const fem::SparseSymMatrix m = fem::assemble_mass(mesh, positions);
  const Vector ones = Vector::Ones(mesh.num_nodes());
  return ones.dot(m * ones);
}

double eoc_value(double e0, double e1, double p0, double p1) {
  if (!(e0 > 0.0) || !(e1 > 0.0)) return std::numeric_limits<double>::quiet_NaN();
  return std::log(e0 / e1) / std::log(p0 / p1);
}

ConvergenceTable eoc(std::vector<ConvergenceRow> rows) {
  if (rows.empty()) throw InputError("eoc: empty table");
  for (std::size_t i = 1; i < rows.size(); ++i) {
    if (!(rows[i].param < rows[i - 1].param))
      throw InputError("eoc: parameters must be strictly decreasing");
    rows[i].eoc_l2 = eoc_value(rows[i - 1].l2, rows[i].l2, rows[i - 1].param, rows[i].param);
    rows[i].eoc_h1 = eoc_value(rows[i - 1].h1, rows[i].h1, rows[i - 1].param, rows[i].param);
  }
  rows[0].eoc_l2 = rows[0].eoc_h1 = std::numeric_limits<double>::quiet_NaN();
  return {std::move(rows)};
}

void ConvergenceTable::write_csv(std::ostream& out) const {
  auto num = [&out](double v) {
    if (std::isnan(v)) out << "nan";
    else out << v;
  };
  out << "param,L2,H1,EOC_L2,EOC_H1\n";
  const auto flags = out.flags();
  const auto prec = out.precision();
  out << std::setprecision(10);
  for (const auto& r : rows) {
    num(r.param);
    out << ',';
    num(r.l2);
    out << ',';
    num(r.h1);
    out << ',';
    num(r.eoc_l2);
    out << ',';
    num(r.eoc_h1);
    out << '\n';
  }
  out.flags(flags);
  out.precision(prec);
}

int thread_count_from_env() {
  const char* env = std::getenv("EVOLVEFEM_THREADS");
  if (!env || !*env) return 1;
  char* end = nullptr;
  const long v = std::strtol(env, &end, 10);
  if (end == env || *end != '\0') throw ConfigError("EVOLVEFEM_THREADS must be an integer");
  return static_cast<int>(std::max(1L, v));
}

namespace {

std::shared_ptr<const mesh::SurfaceMesh> sphere(int level, int degree, double r0) {
  return std::make_shared<const mesh::SurfaceMesh>(
      mesh::scaled(mesh::generate_sphere_mesh(level, degree), r0));
}

// Runs `count` independent jobs on up to `threads` workers; the first exception (in
// job order) is rethrown after all workers finish.
template <typename Job>
void parallel_for(int count, int threads, Job job) {
  if (threads <= 0) threads = thread_count_from_env();
  threads = std::min(threads, count);
  std::vector<std::exception_ptr> errors(count);
  if (threads <= 1) {
    for (int i = 0; i < count; ++i) {
      try {
        job(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  } else {
    std::atomic<int> next{0};
    std::vector<std::thread> pool;
    for (int w = 0; w < threads; ++w)
      pool.emplace_back([&] {
        for (int i = next++; i < count; i = next++) {
          try {
            job(i);
          } catch (...) {
            errors[i] = std::current_exception();
          }
        }
      });
    for (auto& th : pool) th.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

}  // namespace

SimulationErrors simulate_errors(const StudyConfig& cfg, int level, double tau) {
  const auto mesh = sphere(level, cfg.degree, cfg.ms.r0);
  laws::ProblemConfig problem = cfg.ms.problem(cfg.law, cfg.order, tau, cfg.end_time);
  problem.solver = cfg.solver;
  const laws::ExactFlow flow = cfg.ms.flow(mesh);
  laws::RunOptions opts;
  opts.start = cfg.start;
  opts.exact = &flow;
  const laws::RunSummary sum = laws::run(problem, mesh, {}, opts);

  const fem::Assembler assembler(mesh);
  const double t = sum.final_state.time;
  const NodalVector xs = cfg.ms.positions(*mesh, t);
  SimulationErrors out;
  out.tau = tau;
  out.level = level;
  out.h = mesh::mesh_width(*mesh, mesh->initial_positions());
  out.iterations = sum.total_iterations;
  out.x = error_norms(sum.final_state.positions(), xs, assembler);
  out.x_lift = lifted_position_error(*mesh, sum.final_state.positions(), xs, cfg.ms.radius(t));
  out.v = error_norms(sum.final_state.velocity, cfg.ms.velocity(*mesh, t).values, assembler, xs);
  if (cfg.law == laws::Law::Coupled)
    out.u = error_norms(sum.final_state.u.newest(), cfg.ms.u(*mesh, t).values, assembler, xs);
  return out;
}

std::vector<SimulationErrors> time_sweep(const StudyConfig& cfg, int level,
                                         const std::vector<double>& taus, int threads) {
  std::vector<SimulationErrors> out(taus.size());
  parallel_for(static_cast<int>(taus.size()), threads,
               [&](int i) { out[i] = simulate_errors(cfg, level, taus[i]); });
  return out;
}

std::vector<SimulationErrors> space_sweep(const StudyConfig& cfg, const std::vector<int>& levels,
                                          double tau, int threads) {
  std::vector<SimulationErrors> out(levels.size());
  parallel_for(static_cast<int>(levels.size()), threads,
               [&](int i) { out[i] = simulate_errors(cfg, levels[i], tau); });
  return out;
}

namespace {

const ErrorNorms& pick(const SimulationErrors& e, Quantity q) {
  switch (q) {
    case Quantity::PositionLifted: return e.x_lift;
    case Quantity::Velocity: return e.v;
    case Quantity::U: return e.u;
    default: return e.x;
  }
}

}  // namespace

ConvergenceTable table_in_tau(const std::vector<SimulationErrors>& runs, Quantity q) {
  std::vector<ConvergenceRow> rows;
  for (const auto& r : runs) rows.push_back({r.tau, pick(r, q).l2, pick(r, q).h1});
  return eoc(std::move(rows));
}

ConvergenceTable table_in_h(const std::vector<SimulationErrors>& runs, Quantity q) {
  std::vector<ConvergenceRow> rows;
  for (const auto& r : runs) rows.push_back({r.h, pick(r, q).l2, pick(r, q).h1});
  return eoc(std::move(rows));
}

Defects regularized_defects(const ManufacturedSolution& ms,
                            std::shared_ptr<const mesh::SurfaceMesh> mesh, int order, double tau,
                            const std::vector<double>& times, const fem::SolverOptions& solver) {
  const bdf::BdfScheme scheme = bdf::BdfScheme::make(order);
  const fem::Assembler assembler(mesh);
  const laws::ProblemConfig problem = ms.problem(laws::Law::Regularized, order, tau, 0.0);
  Defects out;
  for (double tt : times) {
    const int n = std::max(order, static_cast<int>(std::lround(tt / tau)));
    const double t = n * tau;
    std::vector<Vector> hist;  // x*^{n-j}, j = 0..p
    for (int j = 0; j <= order; ++j) hist.push_back(ms.positions(*mesh, (n - j) * tau).values);
    const NodalVector xs(hist[0], Arity::Vector3);
    const Vector vs = ms.velocity(*mesh, t).values;

    Vector bdf_v = scheme.delta[0] * hist[0];
    for (int j = 1; j <= order; ++j) bdf_v += scheme.delta[j] * hist[j];
    const Vector dx = bdf_v / tau - vs;

    const auto [m, a] = assembler.mass_stiffness(xs);
    const fem::KOperator k(m, a, ms.alpha);
    out.dx_K = std::max(out.dx_K, fem::norm_K(dx, k));

    Vector xt_values = scheme.gamma[0] * hist[1];
    for (int j = 1; j < order; ++j) xt_values += scheme.gamma[j] * hist[j + 1];
    const NodalVector xt(std::move(xt_values), Arity::Vector3);
    const auto [mt, at] = assembler.mass_stiffness(xt);
    Vector r = mt * vs + ms.alpha * (at * vs) + ms.beta * (at * hist[0]);
    r -= assembler.normal_rhs(xt, problem.g, t).values;
    const Vector dv = fem::solve_spd(fem::MatrixOperator(mt, Arity::Vector3), r, solver);
    out.dv_star = std::max(out.dv_star, fem::dual_norm_star(dv, m, k, solver));
  }
  return out;
}

namespace {

// Smooth random test field psi(x) = sum_k a_k sin(b_k . x + c_k), componentwise.
struct TestFunctionFactory {
  std::mt19937_64 rng;
  explicit TestFunctionFactory(unsigned seed) : rng(seed) {}

  std::function<Vec3(const Vec3&)> next() {
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> phase(0.0, 2.0 * M_PI);
    constexpr int kModes = 3;
    std::array<Vec3, kModes> amp, freq;
    std::array<double, kModes> shift;
    for (int k = 0; k < kModes; ++k) {
      amp[k] = Vec3(normal(rng), normal(rng), normal(rng));
      freq[k] = 1.5 * Vec3(normal(rng), normal(rng), normal(rng));
      shift[k] = phase(rng);
    }
    return [amp, freq, shift](const Vec3& x) -> Vec3 {
      Vec3 out = Vec3::Zero();
      for (int k = 0; k < kModes; ++k) out += amp[k] * std::sin(freq[k].dot(x) + shift[k]);
      return out;
    };
  }
};

WeakResidual measure(const Vector& r, const fem::SparseSymMatrix& m, const fem::SparseSymMatrix& a,
                     const NodalVector& surface, Arity arity, int tests, unsigned seed) {
  const fem::KOperator k(m, a, 1.0);
  TestFunctionFactory factory(seed);
  WeakResidual out;
  for (int i = 0; i < tests; ++i) {
    const auto fn = factory.next();
    Vector psi;
    if (arity == Arity::Vector3) {
      psi = fem::interpolate_field(surface, fn).values;
    } else {
      psi = fem::interpolate_scalar(surface, [&](const Vec3& x) { return fn(x).x(); }).values;
    }
    Vector mpsi = m * psi, apsi = a * psi;
    const double knorm = std::sqrt(psi.dot(mpsi) + psi.dot(apsi));
    out.max_relative = std::max(out.max_relative, std::abs(psi.dot(r)) / knorm);
  }
  if (arity == Arity::Vector3) {
    fem::SolverOptions tight;
    tight.rel_tol = 1e-12;
    out.star = fem::dual_norm_of_residual(r, k, tight);
  } else {
    fem::SolverOptions tight;
    tight.rel_tol = 1e-12;
    const fem::SparseSymMatrix kk = fem::SparseSymMatrix::combine(1.0, m, 1.0, a);
    const Vector y = fem::solve_spd(fem::MatrixOperator(kk, Arity::Scalar), r, tight);
    out.star = std::sqrt(std::max(0.0, r.dot(y)));
  }
  return out;
}

constexpr double kTimeStep = 1e-5;  // central difference of the transported mass term

}  // namespace

WeakResidual weak_residual(const ManufacturedSolution& ms, laws::Law law,
                           std::shared_ptr<const mesh::SurfaceMesh> mesh, double t, int tests,
                           unsigned seed) {
  const fem::Assembler assembler(mesh);
  const laws::ProblemConfig problem = ms.problem(law, 1, 1.0, 0.0);
  const NodalVector xs = ms.positions(*mesh, t);
  const Vector vs = ms.velocity(*mesh, t).values;
  const auto [m, a] = assembler.mass_stiffness(xs);

  Vector r;
  switch (law) {
    case laws::Law::Regularized:
      r = m * vs + ms.alpha * (a * vs) + ms.beta * (a * xs.values) -
          assembler.normal_rhs(xs, problem.g, t).values;
      break;
    case laws::Law::Coupled: {
      const NodalVector us = ms.u(*mesh, t);
      r = m * vs + ms.alpha * (a * vs) + ms.beta * (a * xs.values) -
          assembler.normal_rhs(xs, problem.g_coupled, t, &us).values;
      break;
    }
    case laws::Law::Dynamic: {
      const double e = kTimeStep;
      const Vector mv_plus = assembler.mass(ms.positions(*mesh, t + e)) * ms.velocity(*mesh, t + e).values;
      const Vector mv_minus = assembler.mass(ms.positions(*mesh, t - e)) * ms.velocity(*mesh, t - e).values;
      r = (mv_plus - mv_minus) / (2.0 * e) + ms.alpha * (a * vs) -
          assembler.normal_rhs(xs, problem.g, t).values;
      break;
    }
  }
  return measure(r, m, a, xs, Arity::Vector3, tests, seed);
}

WeakResidual weak_residual_u(const ManufacturedSolution& ms,
                             std::shared_ptr<const mesh::SurfaceMesh> mesh, double t, int tests,
                             unsigned seed) {
  const fem::Assembler assembler(mesh);
  const laws::ProblemConfig problem = ms.problem(laws::Law::Coupled, 1, 1.0, 0.0);
  const NodalVector xs = ms.positions(*mesh, t);
  const NodalVector us = ms.u(*mesh, t);
  const auto [m, a] = assembler.mass_stiffness(xs);
  const double e = kTimeStep;
  const Vector mu_plus = assembler.mass(ms.positions(*mesh, t + e)) * ms.u(*mesh, t + e).values;
  const Vector mu_minus = assembler.mass(ms.positions(*mesh, t - e)) * ms.u(*mesh, t - e).values;
  const Vector r = (mu_plus - mu_minus) / (2.0 * e) + a * us.values -
                   assembler.scalar_rhs(xs, problem.f, us, t).values;
  return measure(r, m, a, xs, Arity::Scalar, tests, seed);
}

}  // namespace evolvefem::verify
