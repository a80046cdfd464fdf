#pragma once

#include "evolvefem/laws.hpp"

#include <iosfwd>
#include <limits>
#include <vector>

namespace evolvefem::verify {

struct Radius {
  double r = 0.0;
  double rdot = 0.0;
};

/// r(t) = r0 r1 / (r0 (1 - e^-t) + r1 e^-t), which solves r' = (1 - r/r1) r.
/// Throws InputError unless t >= 0 and r1 >= r0 > 0.
Radius logistic_radius(double t, double r0, double r1);

/// Expanding sphere X(q, t) = (r(t)/r0) q with q on the sphere of radius r0.
/// The velocity is v = c(t) x with c = r'/r = 1 - r/r1.
struct ManufacturedSolution {
  double r0 = 1.0;
  double r1 = 2.0;
  double alpha = 1.0;
  double beta = 1.0;
  double kappa = 1.0;  // coupling strength of u in the coupled g

  double radius(double t) const;
  double c(double t) const;
  double cdot(double t) const;

  /// Throws InputError when |x| differs from r(t) by more than 1e-8 (relative).
  Vec3 exact_velocity(const Vec3& x, double t) const;
  double forcing_regularized(const Vec3& x, double t) const;
  double forcing_dynamic(const Vec3& x, double t) const;

  double u_exact(const Vec3& x, double t) const;
  double f_coupled(double u, const Vec3& x, double t) const;
  double g_coupled(double u, const Vec3& x, double t) const;

  /// Nodal values on the mesh whose initial nodes lie on the sphere of radius r0.
  NodalVector positions(const mesh::SurfaceMesh& mesh, double t) const;
  NodalVector velocity(const mesh::SurfaceMesh& mesh, double t) const;
  NodalVector u(const mesh::SurfaceMesh& mesh, double t) const;

  laws::ExactFlow flow(std::shared_ptr<const mesh::SurfaceMesh> mesh) const;

  /// Problem data for the given law (forcings, alpha, beta, initial velocity / u).
  laws::ProblemConfig problem(laws::Law law, int order, double tau, double end_time) const;
};

struct CoupledData {
  std::function<double(const Vec3&, double)> u_exact;
  FieldForcing f;
  FieldForcing g;
};
CoupledData coupled_manufactured(const ManufacturedSolution& ms);

struct ErrorNorms {
  double l2 = 0.0;
  double h1 = 0.0;  // sqrt(L2^2 + |.|_A^2)
};

/// Discrete norms of numeric - exact with M and A assembled on `surface`.
ErrorNorms error_norms(const Vector& numeric, const Vector& exact,
                       const fem::Assembler& assembler, const NodalVector& surface);
/// Position errors: the surface is the exact nodal positions themselves.
ErrorNorms error_norms(const NodalVector& numeric, const NodalVector& exact_nodes,
                       const fem::Assembler& assembler);

/// L2 norm of the radially lifted error on the sphere of radius r, by quadrature on
/// Gamma_h[surface]. Independent check of the discrete L2 error for sphere problems.
double radial_lift_l2(const Vector& error, const fem::Assembler& assembler,
                      const NodalVector& surface, double r);

/// Error of the discrete position map against the exact sphere flow X(q) = r q / |q|,
/// with q the point of Gamma_h^0 at the same reference coordinates. Unlike the nodal
/// norms this includes the interpolation error of the surface. Norms are taken on
/// Gamma_h[`exact_nodes`].
ErrorNorms lifted_position_error(const mesh::SurfaceMesh& mesh, const NodalVector& numeric,
                                 const NodalVector& exact_nodes, double r);

double surface_area(const fem::Assembler& assembler, const NodalVector& positions);
double surface_area(const mesh::SurfaceMesh& mesh, const NodalVector& positions);

struct ConvergenceRow {
  double param = 0.0;
  double l2 = 0.0;
  double h1 = 0.0;
  double eoc_l2 = std::numeric_limits<double>::quiet_NaN();
  double eoc_h1 = std::numeric_limits<double>::quiet_NaN();
};

struct ConvergenceTable {
  std::vector<ConvergenceRow> rows;
  /// Header "param,L2,H1,EOC_L2,EOC_H1"; undefined EOCs are written as "nan".
  void write_csv(std::ostream& out) const;
};

/// EOC_i = log(e_{i-1}/e_i) / log(param_{i-1}/param_i). Throws InputError for an
/// empty table or a parameter sequence that is not strictly decreasing.
ConvergenceTable eoc(std::vector<ConvergenceRow> rows);
double eoc_value(double e0, double e1, double p0, double p1);

// ---- simulation studies on the expanding sphere ----

struct StudyConfig {
  laws::Law law = laws::Law::Regularized;
  int order = 2;
  int degree = 2;
  double end_time = 5.0;
  laws::StartMode start = laws::StartMode::Exact;
  ManufacturedSolution ms;
  fem::SolverOptions solver;
};

/// Errors at the final time against the interpolated exact solution.
struct SimulationErrors {
  double tau = 0.0;
  double h = 0.0;
  int level = 0;
  ErrorNorms x;  // positions
  ErrorNorms x_lift;  // positions, lifted_position_error
  ErrorNorms v;  // velocity
  ErrorNorms u;  // Coupled only
  long iterations = 0;
};

SimulationErrors simulate_errors(const StudyConfig& cfg, int level, double tau);

enum class Quantity { Position, PositionLifted, Velocity, U };

/// Tables indexed by parameter. Rows are computed concurrently with at most
/// `threads` workers (0: EVOLVEFEM_THREADS or 1) and assembled in order.
std::vector<SimulationErrors> time_sweep(const StudyConfig& cfg, int level,
                                         const std::vector<double>& taus, int threads = 0);
std::vector<SimulationErrors> space_sweep(const StudyConfig& cfg, const std::vector<int>& levels,
                                          double tau, int threads = 0);
ConvergenceTable table_in_tau(const std::vector<SimulationErrors>& runs, Quantity q);
ConvergenceTable table_in_h(const std::vector<SimulationErrors>& runs, Quantity q);

/// Worker count from EVOLVEFEM_THREADS (default 1, clamped to >= 1).
int thread_count_from_env();

// ---- consistency defects of the exact solution in the BDF equations ----

struct Defects {
  double dx_K = 0.0;     // ||(1/tau) sum delta_j x*^{n-j} - v*^n||_{K(x*^n)}
  double dv_star = 0.0;  // ||d_v||_* with M(x~*) d_v = K(x~*) v* + beta A(x~*) x* - g(x~*)
};

/// Defects of the regularized law at t_n = n tau, n >= order, maximized over `times`
/// (each rounded to the nearest multiple of tau).
Defects regularized_defects(const ManufacturedSolution& ms,
                            std::shared_ptr<const mesh::SurfaceMesh> mesh, int order, double tau,
                            const std::vector<double>& times,
                            const fem::SolverOptions& solver = {});

// ---- weak-form residuals of the manufactured forcings ----

struct WeakResidual {
  double max_relative = 0.0;  // max over test functions of |R(psi)| / ||psi||_K
  double star = 0.0;          // dual norm of the full residual vector
};

/// Residual of the exact solution, interpolated on `mesh` at time t, in the weak form of
/// the given law. Dynamic and coupled residuals use a central difference in time for the
/// transported mass term. `tests` random smooth test functions are drawn from `seed`.
WeakResidual weak_residual(const ManufacturedSolution& ms, laws::Law law,
                           std::shared_ptr<const mesh::SurfaceMesh> mesh, double t,
                           int tests = 50, unsigned seed = 2024);

/// Residual of the u-equation of the coupled law.
WeakResidual weak_residual_u(const ManufacturedSolution& ms,
                             std::shared_ptr<const mesh::SurfaceMesh> mesh, double t,
                             int tests = 50, unsigned seed = 2024);

}  // namespace evolvefem::verify
