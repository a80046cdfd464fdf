#pragma once

#include "evolvefem/mesh.hpp"

#include <iosfwd>
#include <memory>
#include <utility>
#include <vector>

namespace evolvefem::fem {

/// CSR pattern of a symmetric N x N matrix built from element connectivity.
struct SparsityPattern {
  int n = 0;
  std::vector<int> row_ptr;
  std::vector<int> cols;  // sorted within each row
  std::vector<int> diag;  // position of (i, i) in `cols`

  static std::shared_ptr<const SparsityPattern> from_mesh(const mesh::SurfaceMesh& mesh);
  /// Position of (i, j) in the value array, or -1.
  int find(int i, int j) const;
};

/// Assembled mass or stiffness matrix. Vector-valued products act blockwise (I3 (x) S)
/// when the input has length 3N.
class SparseSymMatrix {
 public:
  SparseSymMatrix() = default;
  SparseSymMatrix(std::shared_ptr<const SparsityPattern> pattern, Vector values);

  int dimension() const { return pattern_ ? pattern_->n : 0; }
  const SparsityPattern& pattern() const { return *pattern_; }
  const std::shared_ptr<const SparsityPattern>& shared_pattern() const { return pattern_; }
  const Vector& values() const { return values_; }

  double coeff(int i, int j) const;
  Vector diagonal() const;

  /// y = S x for |x| = N, or y = (I3 (x) S) x for |x| = 3N.
  void apply(const Vector& x, Vector& y) const;
  Vector operator*(const Vector& x) const;

  /// a S1 + b S2 on a shared pattern.
  static SparseSymMatrix combine(double a, const SparseSymMatrix& s1, double b,
                                 const SparseSymMatrix& s2);

  bool is_exactly_symmetric() const;
  void write_matrix_market(std::ostream& out) const;

 private:
  void apply_scalar(const double* x, double* y) const;

  std::shared_ptr<const SparsityPattern> pattern_;
  Vector values_;
};

/// Symmetric linear operator with a diagonal for Jacobi preconditioning.
class LinearOperator {
 public:
  virtual ~LinearOperator() = default;
  virtual int size() const = 0;
  virtual void apply(const Vector& x, Vector& y) const = 0;
  virtual Vector diagonal() const = 0;
};

/// S acting on scalar fields, or I3 (x) S on vector fields.
class MatrixOperator final : public LinearOperator {
 public:
  MatrixOperator(const SparseSymMatrix& matrix, Arity arity) : matrix_(&matrix), arity_(arity) {}
  int size() const override { return matrix_->dimension() * static_cast<int>(arity_); }
  void apply(const Vector& x, Vector& y) const override { matrix_->apply(x, y); }
  Vector diagonal() const override;

 private:
  const SparseSymMatrix* matrix_;
  Arity arity_;
};

/// Matrix-free K = I3 (x) M + alpha I3 (x) A on R^{3N}. Holds references: M and A must
/// outlive the operator.
class KOperator final : public LinearOperator {
 public:
  KOperator(const SparseSymMatrix& mass, const SparseSymMatrix& stiffness, double alpha);
  int size() const override { return 3 * mass_->dimension(); }
  void apply(const Vector& x, Vector& y) const override;
  Vector diagonal() const override;
  double alpha() const { return alpha_; }
  const SparseSymMatrix& mass() const { return *mass_; }
  const SparseSymMatrix& stiffness() const { return *stiffness_; }

 private:
  const SparseSymMatrix* mass_;
  const SparseSymMatrix* stiffness_;
  double alpha_;
};

KOperator k_operator(const SparseSymMatrix& mass, const SparseSymMatrix& stiffness, double alpha);

struct SolverOptions {
  double rel_tol = 1e-10;
  int max_iterations = 0;  // 0: 10 * sqrt(system size)
};

struct SolveReport {
  int iterations = 0;
  double residual = 0.0;  // ||op x - rhs||, recomputed from scratch
  double rhs_norm = 0.0;
};

/// Jacobi-preconditioned conjugate gradients. `x` is the initial guess on entry.
/// Throws SolverError when the iteration limit is hit.
SolveReport solve_spd(const LinearOperator& op, const Vector& rhs, Vector& x,
                      const SolverOptions& options = {});
Vector solve_spd(const LinearOperator& op, const Vector& rhs, const SolverOptions& options = {});

/// Element-loop assembly on Gamma_h[x] for a fixed mesh. Basis tabulation, the sparsity
/// pattern and the element-to-CSR slot map are built once and reused for any positions.
class Assembler {
 public:
  explicit Assembler(std::shared_ptr<const mesh::SurfaceMesh> mesh);
  explicit Assembler(const mesh::SurfaceMesh& mesh);

  const mesh::SurfaceMesh& mesh() const { return *mesh_; }
  const std::shared_ptr<const mesh::SurfaceMesh>& shared_mesh() const { return mesh_; }
  const mesh::QuadratureRule& rule() const { return rule_; }
  const std::shared_ptr<const SparsityPattern>& pattern() const { return pattern_; }

  SparseSymMatrix mass(const NodalVector& positions) const;
  SparseSymMatrix stiffness(const NodalVector& positions) const;
  std::pair<SparseSymMatrix, SparseSymMatrix> mass_stiffness(const NodalVector& positions) const;

  /// g|_{j + N l} = int g (nu_h)_l phi_j. With `u` given, g also sees u_h and its
  /// surface gradient at each quadrature point; otherwise those arguments are zero.
  NodalVector normal_rhs(const NodalVector& positions, const FieldForcing& g, double t,
                         const NodalVector* u = nullptr) const;
  NodalVector normal_rhs(const NodalVector& positions, const PointForcing& g, double t) const;

  /// f|_j = int f(u_h, grad u_h, x, t) phi_j.
  NodalVector scalar_rhs(const NodalVector& positions, const FieldForcing& f,
                         const NodalVector& u, double t) const;

  /// Integral over Gamma_h[x] of a pointwise function of (x, nu).
  double integrate(const NodalVector& positions,
                   const std::function<double(const Vec3& x, const Vec3& normal)>& fn) const;

  /// Same, with the value of a nodal field at the point (scalar fields fill value.x()).
  double integrate_field(
      const NodalVector& positions, const NodalVector& field,
      const std::function<double(const Vec3& x, const Vec3& normal, const Vec3& value)>& fn)
      const;

 private:
  template <typename ElementKernel>
  void for_each_quadrature_point(const NodalVector& positions, ElementKernel&& kernel) const;

  std::shared_ptr<const mesh::SurfaceMesh> mesh_;
  mesh::QuadratureRule rule_;
  std::vector<mesh::BasisEval> tabulated_;
  std::shared_ptr<const SparsityPattern> pattern_;
  std::vector<int> slots_;  // per element, nodes_per_element^2 CSR positions
};

SparseSymMatrix assemble_mass(const mesh::SurfaceMesh& mesh, const NodalVector& positions);
SparseSymMatrix assemble_stiffness(const mesh::SurfaceMesh& mesh, const NodalVector& positions);
NodalVector assemble_normal_rhs(const mesh::SurfaceMesh& mesh, const NodalVector& positions,
                                const PointForcing& g, double t);
NodalVector assemble_scalar_rhs(const mesh::SurfaceMesh& mesh, const NodalVector& positions,
                                const FieldForcing& f, const NodalVector& u, double t);

/// sqrt(w^T S w) for scalar (N) or blockwise vector (3N) w. A squared norm below
/// -1e-13 (relative to the diagonal scale) throws InternalError.
double norm_M(const Vector& w, const SparseSymMatrix& mass);
double norm_A(const Vector& w, const SparseSymMatrix& stiffness);
double norm_K(const Vector& w, const KOperator& k);

/// sqrt(d^T M K^{-1} M d), the discrete H^{-1} norm, via one SPD solve.
double dual_norm_star(const Vector& d, const SparseSymMatrix& mass, const KOperator& k,
                      const SolverOptions& options = {});

/// sqrt(r^T K^{-1} r) for a residual r = M d given directly.
double dual_norm_of_residual(const Vector& residual, const KOperator& k,
                             const SolverOptions& options = {});

NodalVector interpolate_field(const NodalVector& positions,
                              const std::function<Vec3(const Vec3&)>& fn);
NodalVector interpolate_scalar(const NodalVector& positions,
                               const std::function<double(const Vec3&)>& fn);

}  // namespace evolvefem::fem
