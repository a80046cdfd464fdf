#include "evolvefem/laws.hpp"

#include <cmath>
#include <sstream>

namespace evolvefem::laws {

std::string to_string(Law law) {
  switch (law) {
    case Law::Regularized: return "regularized";
    case Law::Dynamic: return "dynamic";
    case Law::Coupled: return "coupled";
  }
  return "unknown";
}

Law parse_law(const std::string& name) {
  if (name == "regularized") return Law::Regularized;
  if (name == "dynamic") return Law::Dynamic;
  if (name == "coupled") return Law::Coupled;
  throw ConfigError("unknown law '" + name + "' (expected regularized, dynamic or coupled)");
}

std::string to_string(StartMode mode) { return mode == StartMode::Exact ? "exact" : "bootstrap"; }

StartMode parse_start_mode(const std::string& name) {
  if (name == "exact") return StartMode::Exact;
  if (name == "bootstrap") return StartMode::Bootstrap;
  throw ConfigError("unknown starting-value mode '" + name + "' (expected exact or bootstrap)");
}

void ProblemConfig::validate() const {
  const int max_order = law == Law::Regularized ? 6 : 5;
  if (order < 1 || order > max_order) {
    std::ostringstream msg;
    msg << "BDF order " << order << " not supported for the " << to_string(law)
        << " law (1.." << max_order << ")";
    throw ConfigError(msg.str());
  }
  if (!(alpha > 0.0) && !(alpha == 0.0 && allow_zero_alpha))
    throw ConfigError("alpha must be positive");
  if (!(beta >= 0.0)) throw ConfigError("beta must be non-negative");
  if (!(tau > 0.0) || !std::isfinite(tau)) throw ConfigError("time step must be positive");
  if (!(end_time >= 0.0) || !std::isfinite(end_time)) throw ConfigError("end time must be >= 0");
  if (!(solver.rel_tol > 0.0)) throw ConfigError("solver tolerance must be positive");
  if (solver.max_iterations < 0) throw ConfigError("solver iteration limit must be >= 0");
}

int step_count(double end_time, double tau) {
  const double ratio = end_time / tau;
  const double nearest = std::round(ratio);
  if (std::abs(ratio - nearest) <= 1e-9 * std::max(1.0, ratio)) return static_cast<int>(nearest);
  return static_cast<int>(std::floor(ratio));
}

namespace {

Vector weighted(const History& h, const std::vector<double>& c, int first_coeff) {
  // sum_{j} c[first_coeff + j] h[j] over the whole history
  Vector out = c[first_coeff] * h[0];
  for (int j = 1; j < h.size(); ++j) out += c[first_coeff + j] * h[j];
  return out;
}

Vector extrapolated(const History& h, const std::vector<double>& gamma) {
  if (h.size() != static_cast<int>(gamma.size()))
    throw InputError("history length does not match the BDF order");
  return weighted(h, gamma, 0);
}

void require_history(const SimulationState& s, const ProblemConfig& cfg) {
  if (s.x.size() != cfg.order) throw InputError("position history not populated");
}

Vector normal_forcing(const fem::Assembler& assembler, const NodalVector& x, double t,
                      const ProblemConfig& cfg, const NodalVector* u) {
  if (cfg.law == Law::Coupled) {
    if (!cfg.g_coupled) return Vector::Zero(x.values.size());
    return assembler.normal_rhs(x, cfg.g_coupled, t, u).values;
  }
  if (!cfg.g) return Vector::Zero(x.values.size());
  return assembler.normal_rhs(x, cfg.g, t).values;
}

Vector apply_k(const fem::SparseSymMatrix& m, const fem::SparseSymMatrix& a, double alpha,
               const Vector& w) {
  Vector out = m * w;
  if (alpha != 0.0) out += alpha * (a * w);
  return out;
}

// Position solve shared by the regularized and coupled laws:
// ((delta_0/tau) K + beta A) x = g - (1/tau) K sum_{j>=1} delta_j x^{n-j}.
Vector solve_position(SimulationState& s, const ProblemConfig& cfg, const bdf::BdfScheme& scheme,
                      const fem::SparseSymMatrix& m, const fem::SparseSymMatrix& a,
                      const Vector& g, const Vector& guess) {
  const double d0 = scheme.delta[0] / cfg.tau;
  const Vector hist = weighted(s.x, scheme.delta, 1);
  const Vector rhs = g - apply_k(m, a, cfg.alpha, hist) / cfg.tau;
  const fem::SparseSymMatrix sys = fem::SparseSymMatrix::combine(d0, m, d0 * cfg.alpha + cfg.beta, a);
  Vector x = guess;
  const fem::SolveReport rep =
      fem::solve_spd(fem::MatrixOperator(sys, Arity::Vector3), rhs, x, cfg.solver);
  s.last.iterations = rep.iterations;
  s.last.residual = rep.residual;
  return x;
}

// v^n = (1/tau) sum_{j=0}^p delta_j x^{n-j}, before x^n is pushed.
Vector bdf_velocity(const Vector& xn, const History& x, const bdf::BdfScheme& scheme, double tau) {
  return (scheme.delta[0] * xn + weighted(x, scheme.delta, 1)) / tau;
}

void advance_clock(SimulationState& s, const ProblemConfig& cfg) {
  ++s.step;
  s.time = s.step * cfg.tau;
}

}  // namespace

Vector regularized_velocity(const ProblemConfig& cfg, const fem::Assembler& assembler,
                            const Vector& x, double t, const Vector* u) {
  const NodalVector pos(x, Arity::Vector3);
  const auto [m, a] = assembler.mass_stiffness(pos);
  std::optional<NodalVector> uf;
  if (u) uf.emplace(*u, Arity::Scalar);
  Vector rhs = normal_forcing(assembler, pos, t, cfg, uf ? &*uf : nullptr);
  if (cfg.beta != 0.0) rhs -= cfg.beta * (a * x);
  const fem::KOperator k(m, a, cfg.alpha);
  return fem::solve_spd(k, rhs, cfg.solver);
}

void step_regularized(SimulationState& s, const ProblemConfig& cfg,
                      const fem::Assembler& assembler) {
  require_history(s, cfg);
  const bdf::BdfScheme scheme = bdf::BdfScheme::make(cfg.order);
  const double t = (s.step + 1) * cfg.tau;
  const NodalVector xt(extrapolated(s.x, scheme.gamma), Arity::Vector3);
  const auto [m, a] = assembler.mass_stiffness(xt);
  const Vector g = normal_forcing(assembler, xt, t, cfg, nullptr);
  Vector x = solve_position(s, cfg, scheme, m, a, g, xt.values);
  s.velocity = bdf_velocity(x, s.x, scheme, cfg.tau);
  s.x.push(std::move(x));
  advance_clock(s, cfg);
}

void step_dynamic(SimulationState& s, const ProblemConfig& cfg, const fem::Assembler& assembler) {
  if (cfg.order > 5) throw ConfigError("the dynamic law supports BDF orders 1..5");
  require_history(s, cfg);
  if (s.v.size() != cfg.order || s.mv.size() != cfg.order)
    throw InputError("velocity history not populated");
  const bdf::BdfScheme scheme = bdf::BdfScheme::make(cfg.order);
  const double t = (s.step + 1) * cfg.tau;
  const double d0 = scheme.delta[0] / cfg.tau;

  const NodalVector xt(extrapolated(s.x, scheme.gamma), Arity::Vector3);
  const auto [m, a] = assembler.mass_stiffness(xt);
  const Vector g = normal_forcing(assembler, xt, t, cfg, nullptr);
  const Vector rhs = g - weighted(s.mv, scheme.delta, 1) / cfg.tau;
  const fem::SparseSymMatrix sys = fem::SparseSymMatrix::combine(d0, m, cfg.alpha, a);
  Vector v = extrapolated(s.v, scheme.gamma);
  const fem::SolveReport rep =
      fem::solve_spd(fem::MatrixOperator(sys, Arity::Vector3), rhs, v, cfg.solver);
  s.last.iterations = rep.iterations;
  s.last.residual = rep.residual;

  // (1/tau) sum_j delta_j x^{n-j} = v^n solved for x^n
  Vector x = (cfg.tau * v - weighted(s.x, scheme.delta, 1)) / scheme.delta[0];
  s.mv.push(m * v);
  s.v.push(v);
  s.x.push(std::move(x));
  s.velocity = std::move(v);
  advance_clock(s, cfg);
}

void step_coupled(SimulationState& s, const ProblemConfig& cfg, const fem::Assembler& assembler) {
  if (cfg.order > 5) throw ConfigError("the coupled law supports BDF orders 1..5");
  require_history(s, cfg);
  if (s.u.size() != cfg.order || s.mu.size() != cfg.order)
    throw InputError("u history not populated");
  const bdf::BdfScheme scheme = bdf::BdfScheme::make(cfg.order);
  const double t = (s.step + 1) * cfg.tau;
  const double d0 = scheme.delta[0] / cfg.tau;

  const NodalVector xt(extrapolated(s.x, scheme.gamma), Arity::Vector3);
  const NodalVector ut(extrapolated(s.u, scheme.gamma), Arity::Scalar);
  const auto [m, a] = assembler.mass_stiffness(xt);

  Vector rhs_u = -weighted(s.mu, scheme.delta, 1) / cfg.tau;
  if (cfg.f) rhs_u += assembler.scalar_rhs(xt, cfg.f, ut, t).values;
  const fem::SparseSymMatrix sys_u = fem::SparseSymMatrix::combine(d0, m, 1.0, a);
  Vector u = ut.values;
  const fem::SolveReport rep =
      fem::solve_spd(fem::MatrixOperator(sys_u, Arity::Scalar), rhs_u, u, cfg.solver);

  const Vector g = normal_forcing(assembler, xt, t, cfg, &ut);
  Vector x = solve_position(s, cfg, scheme, m, a, g, xt.values);
  s.last.u_iterations = rep.iterations;
  s.last.u_residual = rep.residual;

  s.mu.push(m * u);
  s.u.push(std::move(u));
  s.velocity = bdf_velocity(x, s.x, scheme, cfg.tau);
  s.x.push(std::move(x));
  advance_clock(s, cfg);
}

void step(SimulationState& s, const ProblemConfig& cfg, const fem::Assembler& assembler) {
  switch (cfg.law) {
    case Law::Regularized: return step_regularized(s, cfg, assembler);
    case Law::Dynamic: return step_dynamic(s, cfg, assembler);
    case Law::Coupled: return step_coupled(s, cfg, assembler);
  }
}

namespace {

// Full per-step data, used to rebuild histories and to feed observers.
struct Snapshot {
  Vector x, v, mv, u, mu, velocity;
};

Snapshot snapshot_of(const SimulationState& s, Law law) {
  Snapshot snap;
  snap.x = s.x.newest();
  snap.velocity = s.velocity;
  if (law == Law::Dynamic) {
    snap.v = s.v.newest();
    snap.mv = s.mv.newest();
  }
  if (law == Law::Coupled) {
    snap.u = s.u.newest();
    snap.mu = s.mu.newest();
  }
  return snap;
}

SimulationState state_from(const std::vector<Snapshot>& snaps, Law law, int capacity, int step,
                           double time) {
  SimulationState s;
  s.x = History(capacity);
  if (law == Law::Dynamic) s.v = History(capacity), s.mv = History(capacity);
  if (law == Law::Coupled) s.u = History(capacity), s.mu = History(capacity);
  const int first = std::max(0, static_cast<int>(snaps.size()) - capacity);
  for (std::size_t i = first; i < snaps.size(); ++i) {
    s.x.push(snaps[i].x);
    if (law == Law::Dynamic) s.v.push(snaps[i].v), s.mv.push(snaps[i].mv);
    if (law == Law::Coupled) s.u.push(snaps[i].u), s.mu.push(snaps[i].mu);
  }
  s.velocity = snaps.back().velocity;
  s.step = step;
  s.time = time;
  return s;
}

Snapshot initial_snapshot(const ProblemConfig& cfg, const fem::Assembler& assembler,
                          const Vector& x0, double t0, const ExactFlow* exact) {
  Snapshot snap;
  snap.x = x0;
  const NodalVector pos(x0, Arity::Vector3);
  const int n = pos.num_nodes();
  switch (cfg.law) {
    case Law::Dynamic: {
      if (exact) snap.v = exact->velocity(t0).values;
      else if (cfg.initial_velocity) snap.v = fem::interpolate_field(pos, cfg.initial_velocity).values;
      else snap.v = Vector::Zero(3 * n);
      snap.mv = assembler.mass(pos) * snap.v;
      snap.velocity = snap.v;
      break;
    }
    case Law::Coupled: {
      if (exact) snap.u = exact->u(t0).values;
      else if (cfg.initial_u) snap.u = fem::interpolate_scalar(pos, cfg.initial_u).values;
      else snap.u = Vector::Zero(n);
      snap.mu = assembler.mass(pos) * snap.u;
      snap.velocity = exact ? exact->velocity(t0).values
                            : regularized_velocity(cfg, assembler, x0, t0, &snap.u);
      break;
    }
    case Law::Regularized:
      snap.velocity = exact ? exact->velocity(t0).values
                            : regularized_velocity(cfg, assembler, x0, t0);
      break;
  }
  return snap;
}

struct StartResult {
  SimulationState state;
  std::vector<Snapshot> trail;  // n = 0..p-1
};

StartResult compute_start(const ProblemConfig& cfg, const fem::Assembler& assembler,
                          StartMode mode, const ExactFlow* exact) {
  cfg.validate();
  const int p = cfg.order;
  const Law law = cfg.law;
  StartResult out;

  if (mode == StartMode::Exact) {
    if (!exact || !exact->positions || !exact->velocity || (law == Law::Coupled && !exact->u))
      throw ConfigError("exact starting values need a manufactured solution");
    for (int i = 0; i < p; ++i) {
      const double t = i * cfg.tau;
      out.trail.push_back(initial_snapshot(cfg, assembler, exact->positions(t).values, t, exact));
    }
    out.state = state_from(out.trail, law, p, p - 1, (p - 1) * cfg.tau);
    return out;
  }

  const Vector& x0 = assembler.mesh().initial_positions().values;
  std::vector<Snapshot> level{initial_snapshot(cfg, assembler, x0, 0.0, nullptr)};
  for (int q = 1; q < p; ++q) {
    ProblemConfig sub = cfg;
    sub.order = q;
    sub.tau = cfg.tau / static_cast<double>(1 << (p - q));
    // `level` holds q states at spacing sub.tau; extend to times 0..2q sub.tau
    SimulationState s = state_from(level, law, q, q - 1, (q - 1) * sub.tau);
    while (static_cast<int>(level.size()) < 2 * q + 1) {
      step(s, sub, assembler);
      level.push_back(snapshot_of(s, law));
    }
    std::vector<Snapshot> next;
    for (std::size_t i = 0; i < level.size(); i += 2) next.push_back(std::move(level[i]));
    level = std::move(next);
  }
  out.trail = std::move(level);
  out.state = state_from(out.trail, law, p, p - 1, (p - 1) * cfg.tau);
  return out;
}

template <typename E>
[[noreturn]] void rethrow_with_step(const E& e, int n, double t);

template <>
[[noreturn]] void rethrow_with_step(const SolverError& e, int n, double t) {
  std::ostringstream msg;
  msg << "step " << n << " (t = " << t << "): " << e.what();
  throw SolverError(msg.str(), e.iterations(), e.residual());
}

template <>
[[noreturn]] void rethrow_with_step(const DegenerateElementError& e, int n, double t) {
  std::ostringstream msg;
  msg << "step " << n << " (t = " << t << "): " << e.what();
  throw DegenerateElementError(msg.str(), e.element());
}

}  // namespace

SimulationState starting_values(const ProblemConfig& cfg, const fem::Assembler& assembler,
                                StartMode mode, const ExactFlow* exact) {
  return compute_start(cfg, assembler, mode, exact).state;
}

RunSummary run(const ProblemConfig& cfg, std::shared_ptr<const mesh::SurfaceMesh> mesh,
               const std::vector<Observer>& observers, const RunOptions& options) {
  cfg.validate();
  if (options.stride < 1) throw ConfigError("observer stride must be >= 1");
  const fem::Assembler assembler(std::move(mesh));
  const int n_steps = step_count(cfg.end_time, cfg.tau);

  RunSummary summary;
  summary.steps = n_steps;
  summary.start_only = n_steps < cfg.order - 1;

  auto observe = [&](int n, const Snapshot& snap) {
    if (n % options.stride != 0) return;
    const NodalVector x(snap.x, Arity::Vector3), v(snap.velocity, Arity::Vector3);
    std::optional<NodalVector> u;
    if (cfg.law == Law::Coupled) u.emplace(snap.u, Arity::Scalar);
    const Observation obs{n, n * cfg.tau, x, v, u ? &*u : nullptr};
    for (const auto& o : observers) o(obs);
    ++summary.observer_calls;
  };

  StartResult start;
  try {
    start = compute_start(cfg, assembler, options.start, options.exact);
  } catch (const SolverError& e) {
    rethrow_with_step(e, 0, 0.0);
  } catch (const DegenerateElementError& e) {
    rethrow_with_step(e, 0, 0.0);
  }
  for (int n = 0; n < static_cast<int>(start.trail.size()) && n <= n_steps; ++n)
    observe(n, start.trail[n]);

  SimulationState& s = start.state;
  while (s.step < n_steps) {
    try {
      step(s, cfg, assembler);
    } catch (const SolverError& e) {
      rethrow_with_step(e, s.step + 1, (s.step + 1) * cfg.tau);
    } catch (const DegenerateElementError& e) {
      rethrow_with_step(e, s.step + 1, (s.step + 1) * cfg.tau);
    }
    summary.total_iterations += s.last.iterations + s.last.u_iterations;
    summary.max_iterations = std::max({summary.max_iterations, s.last.iterations, s.last.u_iterations});
    summary.max_residual = std::max({summary.max_residual, s.last.residual, s.last.u_residual});
    observe(s.step, snapshot_of(s, cfg.law));
  }
  summary.final_state = std::move(s);
  return summary;
}

}  // namespace evolvefem::laws
