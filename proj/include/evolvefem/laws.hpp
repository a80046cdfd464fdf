#pragma once

#include "evolvefem/bdf.hpp"
#include "evolvefem/fem.hpp"

#include <deque>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

namespace evolvefem::laws {

enum class Law { Regularized, Dynamic, Coupled };
enum class StartMode { Exact, Bootstrap };

std::string to_string(Law law);
Law parse_law(const std::string& name);  // "regularized" | "dynamic" | "coupled"
std::string to_string(StartMode mode);
StartMode parse_start_mode(const std::string& name);  // "exact" | "bootstrap"

struct ProblemConfig {
  Law law = Law::Regularized;
  double alpha = 1.0;
  double beta = 1.0;
  int order = 2;
  double tau = 0.1;
  double end_time = 1.0;

  PointForcing g;           // Regularized and Dynamic; empty means g = 0
  FieldForcing g_coupled;   // Coupled: g(u, grad u, x, t); empty means g = 0
  FieldForcing f;           // Coupled: f(u, grad u, x, t); empty means f = 0

  std::function<Vec3(const Vec3&)> initial_velocity;  // Dynamic; empty means v0 = 0
  std::function<double(const Vec3&)> initial_u;       // Coupled; empty means u0 = 0

  fem::SolverOptions solver;

  /// alpha = 0 lies outside the convergence theory; runs with it must opt in.
  bool allow_zero_alpha = false;

  /// Throws ConfigError. Orders: 1..6 for Regularized, 1..5 for Dynamic and Coupled.
  void validate() const;
};

/// Fixed-capacity history, newest entry first.
class History {
 public:
  History() = default;
  explicit History(int capacity) : capacity_(capacity) {}

  void push(Vector v) {
    items_.push_front(std::move(v));
    if (static_cast<int>(items_.size()) > capacity_) items_.pop_back();
  }
  const Vector& operator[](int j) const { return items_[j]; }  // j = 0 is the newest
  int size() const { return static_cast<int>(items_.size()); }
  int capacity() const { return capacity_; }
  bool full() const { return size() == capacity_; }
  bool empty() const { return items_.empty(); }
  const Vector& newest() const { return items_.front(); }
  void clear() { items_.clear(); }

 private:
  int capacity_ = 0;
  std::deque<Vector> items_;
};

struct StepDiagnostics {
  int iterations = 0;       // position or velocity solve
  double residual = 0.0;
  int u_iterations = 0;     // Coupled only
  double u_residual = 0.0;
};

/// State after step n. Position-like vectors are component-major of length 3N.
struct SimulationState {
  int step = 0;
  double time = 0.0;
  History x;          // x^n, x^{n-1}, ...
  History v;          // Dynamic: v^n, ...
  History mv;         // Dynamic: M(x~^m) v^m, formed at step m
  History u;          // Coupled: u^n, ...
  History mu;         // Coupled: M(x~^m) u^m, formed at step m
  Vector velocity;    // v^n for every law
  StepDiagnostics last;

  NodalVector positions() const { return {x.newest(), Arity::Vector3}; }
  NodalVector velocity_field() const { return {velocity, Arity::Vector3}; }
  std::optional<NodalVector> u_field() const {
    if (u.empty()) return std::nullopt;
    return NodalVector(u.newest(), Arity::Scalar);
  }
};

/// Nodal values of a known solution at any time; used for exact starting values.
struct ExactFlow {
  std::function<NodalVector(double t)> positions;
  std::function<NodalVector(double t)> velocity;
  std::function<NodalVector(double t)> u;  // Coupled only
};

/// One linearly implicit step n-1 -> n. The history must hold exactly `order` entries.
void step_regularized(SimulationState& state, const ProblemConfig& cfg,
                      const fem::Assembler& assembler);
void step_dynamic(SimulationState& state, const ProblemConfig& cfg,
                  const fem::Assembler& assembler);
void step_coupled(SimulationState& state, const ProblemConfig& cfg,
                  const fem::Assembler& assembler);
void step(SimulationState& state, const ProblemConfig& cfg, const fem::Assembler& assembler);

/// State holding n = 0..p-1 with the history full. Exact mode needs `exact`
/// (ConfigError otherwise). Bootstrap runs BDF q with step tau / 2^(p-q) for q = 1..p-1,
/// each level started from the every-second states of the previous one.
SimulationState starting_values(const ProblemConfig& cfg, const fem::Assembler& assembler,
                                StartMode mode, const ExactFlow* exact = nullptr);

/// Velocity of the regularized law on a given surface: solves
/// K(x) v = g(x, t) - beta A(x) x (for Coupled, g sees u).
Vector regularized_velocity(const ProblemConfig& cfg, const fem::Assembler& assembler,
                            const Vector& x, double t, const Vector* u = nullptr);

struct Observation {
  int step;
  double time;
  const NodalVector& positions;
  const NodalVector& velocity;
  const NodalVector* u;  // Coupled only
};
using Observer = std::function<void(const Observation&)>;

struct RunOptions {
  StartMode start = StartMode::Bootstrap;
  const ExactFlow* exact = nullptr;
  int stride = 1;  // observers see steps n with n % stride == 0
};

struct RunSummary {
  SimulationState final_state;
  int steps = 0;             // floor(T / tau): the trajectory has steps + 1 states
  int observer_calls = 0;    // per observer
  long total_iterations = 0;
  int max_iterations = 0;
  double max_residual = 0.0;
  bool start_only = false;   // T < (p - 1) tau: only part of the starting phase was used
};

/// Advances to T. Errors from a step are rethrown with the step index in the message.
RunSummary run(const ProblemConfig& cfg, std::shared_ptr<const mesh::SurfaceMesh> mesh,
               const std::vector<Observer>& observers = {}, const RunOptions& options = {});

/// Number of steps floor(T / tau), robust to rounding of T / tau.
int step_count(double end_time, double tau);

}  // namespace evolvefem::laws
