#include "evolvefem/fem.hpp"

#include <algorithm>
#include <iomanip>
#include <ostream>

namespace evolvefem::fem {

std::shared_ptr<const SparsityPattern> SparsityPattern::from_mesh(const mesh::SurfaceMesh& mesh) {
  const int n = mesh.num_nodes();
  std::vector<std::vector<int>> neighbours(n);
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const auto el = mesh.element(e);
    for (int a : el)
      for (int b : el) neighbours[a].push_back(b);
  }
  auto p = std::make_shared<SparsityPattern>();
  p->n = n;
  p->row_ptr.assign(n + 1, 0);
  p->diag.assign(n, -1);
  for (int i = 0; i < n; ++i) {
    auto& row = neighbours[i];
    std::sort(row.begin(), row.end());
    row.erase(std::unique(row.begin(), row.end()), row.end());
    p->row_ptr[i + 1] = p->row_ptr[i] + static_cast<int>(row.size());
  }
  p->cols.reserve(p->row_ptr[n]);
  for (int i = 0; i < n; ++i) {
    for (int j : neighbours[i]) {
      if (j == i) p->diag[i] = static_cast<int>(p->cols.size());
      p->cols.push_back(j);
    }
  }
  return p;
}

int SparsityPattern::find(int i, int j) const {
  const auto begin = cols.begin() + row_ptr[i];
  const auto end = cols.begin() + row_ptr[i + 1];
  const auto it = std::lower_bound(begin, end, j);
  return (it != end && *it == j) ? static_cast<int>(it - cols.begin()) : -1;
}

SparseSymMatrix::SparseSymMatrix(std::shared_ptr<const SparsityPattern> pattern, Vector values)
    : pattern_(std::move(pattern)), values_(std::move(values)) {
  if (values_.size() != static_cast<Eigen::Index>(pattern_->cols.size()))
    throw InputError("value array does not match the sparsity pattern");
}

double SparseSymMatrix::coeff(int i, int j) const {
  const int k = pattern_->find(i, j);
  return k < 0 ? 0.0 : values_[k];
}

Vector SparseSymMatrix::diagonal() const {
  Vector d(dimension());
  for (int i = 0; i < dimension(); ++i) d[i] = values_[pattern_->diag[i]];
  return d;
}

void SparseSymMatrix::apply_scalar(const double* x, double* y) const {
  const auto& p = *pattern_;
  const double* v = values_.data();
  for (int i = 0; i < p.n; ++i) {
    double s = 0.0;
    for (int k = p.row_ptr[i]; k < p.row_ptr[i + 1]; ++k) s += v[k] * x[p.cols[k]];
    y[i] = s;
  }
}

void SparseSymMatrix::apply(const Vector& x, Vector& y) const {
  const int n = dimension();
  if (x.size() == n) {
    y.resize(n);
    apply_scalar(x.data(), y.data());
  } else if (x.size() == 3 * n) {
    y.resize(3 * n);
    for (int c = 0; c < 3; ++c) apply_scalar(x.data() + c * n, y.data() + c * n);
  } else {
    throw InputError("matrix-vector dimension mismatch: " + std::to_string(x.size()) + " vs N = " +
                     std::to_string(n));
  }
}

Vector SparseSymMatrix::operator*(const Vector& x) const {
  Vector y;
  apply(x, y);
  return y;
}

SparseSymMatrix SparseSymMatrix::combine(double a, const SparseSymMatrix& s1, double b,
                                         const SparseSymMatrix& s2) {
  if (s1.pattern_ != s2.pattern_) throw InputError("combined matrices must share a pattern");
  return SparseSymMatrix(s1.pattern_, a * s1.values_ + b * s2.values_);
}

bool SparseSymMatrix::is_exactly_symmetric() const {
  const auto& p = *pattern_;
  for (int i = 0; i < p.n; ++i) {
    for (int k = p.row_ptr[i]; k < p.row_ptr[i + 1]; ++k) {
      const int t = p.find(p.cols[k], i);
      if (t < 0 || values_[t] != values_[k]) return false;
    }
  }
  return true;
}

void SparseSymMatrix::write_matrix_market(std::ostream& out) const {
  const auto& p = *pattern_;
  int lower = 0;
  for (int i = 0; i < p.n; ++i)
    for (int k = p.row_ptr[i]; k < p.row_ptr[i + 1]; ++k)
      if (p.cols[k] <= i) ++lower;
  out << "%%MatrixMarket matrix coordinate real symmetric\n";
  out << p.n << ' ' << p.n << ' ' << lower << '\n' << std::setprecision(17);
  for (int i = 0; i < p.n; ++i)
    for (int k = p.row_ptr[i]; k < p.row_ptr[i + 1]; ++k)
      if (p.cols[k] <= i) out << i + 1 << ' ' << p.cols[k] + 1 << ' ' << values_[k] << '\n';
}

Vector MatrixOperator::diagonal() const {
  const Vector d = matrix_->diagonal();
  if (arity_ == Arity::Scalar) return d;
  Vector out(3 * d.size());
  out << d, d, d;
  return out;
}

KOperator::KOperator(const SparseSymMatrix& mass, const SparseSymMatrix& stiffness, double alpha)
    : mass_(&mass), stiffness_(&stiffness), alpha_(alpha) {
  if (mass.dimension() != stiffness.dimension())
    throw InputError("K operator: mass and stiffness dimensions differ");
}

void KOperator::apply(const Vector& x, Vector& y) const {
  if (x.size() != size()) throw InputError("K operator: dimension mismatch");
  Vector ay;
  mass_->apply(x, y);
  if (alpha_ != 0.0) {
    stiffness_->apply(x, ay);
    y += alpha_ * ay;
  }
}

Vector KOperator::diagonal() const {
  const Vector d = mass_->diagonal() + alpha_ * stiffness_->diagonal();
  Vector out(3 * d.size());
  out << d, d, d;
  return out;
}

KOperator k_operator(const SparseSymMatrix& mass, const SparseSymMatrix& stiffness, double alpha) {
  return KOperator(mass, stiffness, alpha);
}

}  // namespace evolvefem::fem
