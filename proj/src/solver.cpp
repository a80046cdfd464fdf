#include "evolvefem/fem.hpp"

#include <cmath>
#include <sstream>

namespace evolvefem::fem {

SolveReport solve_spd(const LinearOperator& op, const Vector& rhs, Vector& x,
                      const SolverOptions& options) {
  const int n = op.size();
  if (rhs.size() != n) throw InputError("solve_spd: right-hand side has wrong dimension");
  if (x.size() != n) x = Vector::Zero(n);

  SolveReport report;
  report.rhs_norm = rhs.norm();
  if (report.rhs_norm == 0.0) {
    x.setZero();
    return report;
  }
  const int max_iter = options.max_iterations > 0
                           ? options.max_iterations
                           : static_cast<int>(std::ceil(10.0 * std::sqrt(static_cast<double>(n))));
  const double target = options.rel_tol * report.rhs_norm;

  const Vector inv_diag = op.diagonal().cwiseInverse();
  Vector r(n), z(n), p(n), q(n);
  op.apply(x, q);
  r = rhs - q;
  double rnorm = r.norm();

  int it = 0;
  // The outer loop restarts from the true residual if the recursive one drifted.
  while (rnorm > target && it < max_iter) {
    z = inv_diag.cwiseProduct(r);
    p = z;
    double rz = r.dot(z);
    while (it < max_iter) {
      op.apply(p, q);
      const double pq = p.dot(q);
      if (!(pq > 0.0)) {
        std::ostringstream msg;
        msg << "conjugate gradients: operator not positive definite (p^T A p = " << pq << ")";
        throw SolverError(msg.str(), it, rnorm);
      }
      const double step = rz / pq;
      x += step * p;
      r -= step * q;
      ++it;
      rnorm = r.norm();
      if (rnorm <= target) break;
      z = inv_diag.cwiseProduct(r);
      const double rz_next = r.dot(z);
      p = z + (rz_next / rz) * p;
      rz = rz_next;
    }
    op.apply(x, q);
    r = rhs - q;
    rnorm = r.norm();
  }

  report.iterations = it;
  report.residual = rnorm;
  if (rnorm > target) {
    std::ostringstream msg;
    msg << "conjugate gradients did not converge in " << it << " iterations (residual "
        << rnorm << ", target " << target << ")";
    throw SolverError(msg.str(), it, rnorm);
  }
  return report;
}

Vector solve_spd(const LinearOperator& op, const Vector& rhs, const SolverOptions& options) {
  Vector x = Vector::Zero(op.size());
  solve_spd(op, rhs, x, options);
  return x;
}

namespace {

double checked_sqrt(double squared, double scale, const char* which) {
  if (squared < -1e-13 * std::max(scale, 1.0)) {
    std::ostringstream msg;
    msg << which << ": negative squared norm " << squared << " (broken assembly?)";
    throw InternalError(msg.str());
  }
  return std::sqrt(std::max(squared, 0.0));
}

double quadratic_form(const Vector& w, const SparseSymMatrix& s) {
  return w.dot(s * w);
}

}  // namespace

double norm_M(const Vector& w, const SparseSymMatrix& mass) {
  return checked_sqrt(quadratic_form(w, mass), w.squaredNorm(), "norm_M");
}

double norm_A(const Vector& w, const SparseSymMatrix& stiffness) {
  return checked_sqrt(quadratic_form(w, stiffness),
                      w.squaredNorm() * stiffness.diagonal().maxCoeff(), "norm_A");
}

double norm_K(const Vector& w, const KOperator& k) {
  Vector kw;
  k.apply(w, kw);
  return checked_sqrt(w.dot(kw), w.squaredNorm() * k.diagonal().maxCoeff(), "norm_K");
}

double dual_norm_of_residual(const Vector& residual, const KOperator& k,
                             const SolverOptions& options) {
  if (residual.size() != k.size()) throw InputError("dual norm: dimension mismatch");
  if (residual.squaredNorm() == 0.0) return 0.0;
  const Vector y = solve_spd(k, residual, options);
  return checked_sqrt(residual.dot(y), residual.squaredNorm(), "dual_norm_star");
}

double dual_norm_star(const Vector& d, const SparseSymMatrix& mass, const KOperator& k,
                      const SolverOptions& options) {
  return dual_norm_of_residual(mass * d, k, options);
}

NodalVector interpolate_field(const NodalVector& positions,
                              const std::function<Vec3(const Vec3&)>& fn) {
  NodalVector out = NodalVector::vector3(positions.num_nodes());
  for (int j = 0; j < positions.num_nodes(); ++j) out.set_node(j, fn(positions.node(j)));
  return out;
}

NodalVector interpolate_scalar(const NodalVector& positions,
                               const std::function<double(const Vec3&)>& fn) {
  NodalVector out = NodalVector::scalar(positions.num_nodes());
  for (int j = 0; j < positions.num_nodes(); ++j) out.values[j] = fn(positions.node(j));
  return out;
}

}  // namespace evolvefem::fem
