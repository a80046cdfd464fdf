#include "evolvefem/fem.hpp"

namespace evolvefem::fem {

Assembler::Assembler(std::shared_ptr<const mesh::SurfaceMesh> mesh)
    : mesh_(std::move(mesh)),
      rule_(mesh::quadrature_rule(mesh::assembly_quadrature_degree(mesh_->degree()))),
      pattern_(SparsityPattern::from_mesh(*mesh_)) {
  const auto& ref = mesh::ReferenceElement::get(mesh_->degree());
  tabulated_.reserve(rule_.size());
  for (const Vec2& xi : rule_.points) tabulated_.push_back(ref.evaluate(xi));

  const int npe = mesh_->nodes_per_element();
  slots_.resize(static_cast<std::size_t>(mesh_->num_elements()) * npe * npe);
  for (int e = 0; e < mesh_->num_elements(); ++e) {
    const auto el = mesh_->element(e);
    for (int a = 0; a < npe; ++a)
      for (int b = 0; b < npe; ++b)
        slots_[(static_cast<std::size_t>(e) * npe + a) * npe + b] = pattern_->find(el[a], el[b]);
  }
}

Assembler::Assembler(const mesh::SurfaceMesh& mesh)
    : Assembler(std::make_shared<const mesh::SurfaceMesh>(mesh)) {}

template <typename ElementKernel>
void Assembler::for_each_quadrature_point(const NodalVector& positions,
                                          ElementKernel&& kernel) const {
  if (positions.values.size() != 3 * mesh_->num_nodes())
    throw InputError("positions do not match the mesh node count");
  std::array<Vec3, mesh::kMaxNodesPerElement> coords;
  const int npe = mesh_->nodes_per_element();
  for (int e = 0; e < mesh_->num_elements(); ++e) {
    mesh::gather_element(*mesh_, positions.values, e, coords);
    for (int q = 0; q < rule_.size(); ++q) {
      const mesh::BasisEval& basis = tabulated_[q];
      const mesh::ElementGeometry geo = mesh::element_geometry(
          std::span<const Vec3>(coords.data(), npe), basis, e);
      Vec3 x = Vec3::Zero();
      for (int a = 0; a < npe; ++a) x += basis.values[a] * coords[a];
      kernel(e, basis, geo, x, rule_.weights[q] * geo.area_element);
    }
  }
}

std::pair<SparseSymMatrix, SparseSymMatrix> Assembler::mass_stiffness(
    const NodalVector& positions) const {
  const int npe = mesh_->nodes_per_element();
  Vector mv = Vector::Zero(static_cast<Eigen::Index>(pattern_->cols.size()));
  Vector av = Vector::Zero(mv.size());
  Eigen::Matrix<double, 6, 6> me, ae;
  std::array<Vec3, mesh::kMaxNodesPerElement> grads;
  int current = -1;

  auto flush = [&](int e) {
    const int* slot = slots_.data() + static_cast<std::size_t>(e) * npe * npe;
    for (int a = 0; a < npe; ++a)
      for (int b = 0; b < npe; ++b) {
        // upper triangle is mirrored so both halves receive identical sums
        const int lo = std::min(a, b), hi = std::max(a, b);
        mv[slot[a * npe + b]] += me(lo, hi);
        av[slot[a * npe + b]] += ae(lo, hi);
      }
  };

  for_each_quadrature_point(positions, [&](int e, const mesh::BasisEval& basis,
                                           const mesh::ElementGeometry& geo, const Vec3&,
                                           double w) {
    if (e != current) {
      if (current >= 0) flush(current);
      me.setZero();
      ae.setZero();
      current = e;
    }
    for (int a = 0; a < npe; ++a) grads[a] = geo.surface_gradient(basis.gradients[a]);
    for (int a = 0; a < npe; ++a)
      for (int b = a; b < npe; ++b) {
        me(a, b) += w * basis.values[a] * basis.values[b];
        ae(a, b) += w * grads[a].dot(grads[b]);
      }
  });
  if (current >= 0) flush(current);
  return {SparseSymMatrix(pattern_, std::move(mv)), SparseSymMatrix(pattern_, std::move(av))};
}

SparseSymMatrix Assembler::mass(const NodalVector& positions) const {
  return mass_stiffness(positions).first;
}

SparseSymMatrix Assembler::stiffness(const NodalVector& positions) const {
  return mass_stiffness(positions).second;
}

NodalVector Assembler::normal_rhs(const NodalVector& positions, const FieldForcing& g, double t,
                                  const NodalVector* u) const {
  const int n = mesh_->num_nodes();
  if (u && u->values.size() != n) throw InputError("normal_rhs: u must be a scalar nodal field");
  NodalVector out = NodalVector::vector3(n);
  for_each_quadrature_point(positions, [&](int e, const mesh::BasisEval& basis,
                                           const mesh::ElementGeometry& geo, const Vec3& x,
                                           double w) {
    const auto el = mesh_->element(e);
    double uq = 0.0;
    Vec3 grad_u = Vec3::Zero();
    if (u) {
      Vec2 ref_grad = Vec2::Zero();
      for (int a = 0; a < basis.count; ++a) {
        uq += u->values[el[a]] * basis.values[a];
        ref_grad += u->values[el[a]] * basis.gradients[a];
      }
      grad_u = geo.surface_gradient(ref_grad);
    }
    const double gq = g(uq, grad_u, x, t) * w;
    for (int a = 0; a < basis.count; ++a) {
      const double s = gq * basis.values[a];
      for (int l = 0; l < 3; ++l) out.values[l * n + el[a]] += s * geo.normal[l];
    }
  });
  return out;
}

NodalVector Assembler::normal_rhs(const NodalVector& positions, const PointForcing& g,
                                  double t) const {
  return normal_rhs(positions,
                    FieldForcing([&g](double, const Vec3&, const Vec3& x, double tt) {
                      return g(x, tt);
                    }),
                    t, nullptr);
}

NodalVector Assembler::scalar_rhs(const NodalVector& positions, const FieldForcing& f,
                                  const NodalVector& u, double t) const {
  const int n = mesh_->num_nodes();
  if (u.values.size() != n) throw InputError("scalar_rhs: u must be a scalar nodal field");
  NodalVector out = NodalVector::scalar(n);
  for_each_quadrature_point(positions, [&](int e, const mesh::BasisEval& basis,
                                           const mesh::ElementGeometry& geo, const Vec3& x,
                                           double w) {
    const auto el = mesh_->element(e);
    double uq = 0.0;
    Vec2 ref_grad = Vec2::Zero();
    for (int a = 0; a < basis.count; ++a) {
      uq += u.values[el[a]] * basis.values[a];
      ref_grad += u.values[el[a]] * basis.gradients[a];
    }
    const double fq = f(uq, geo.surface_gradient(ref_grad), x, t) * w;
    for (int a = 0; a < basis.count; ++a) out.values[el[a]] += fq * basis.values[a];
  });
  return out;
}

double Assembler::integrate(
    const NodalVector& positions,
    const std::function<double(const Vec3& x, const Vec3& normal)>& fn) const {
  double sum = 0.0;
  for_each_quadrature_point(positions,
                            [&](int, const mesh::BasisEval&, const mesh::ElementGeometry& geo,
                                const Vec3& x, double w) { sum += w * fn(x, geo.normal); });
  return sum;
}

double Assembler::integrate_field(
    const NodalVector& positions, const NodalVector& field,
    const std::function<double(const Vec3& x, const Vec3& normal, const Vec3& value)>& fn)
    const {
  const int n = mesh_->num_nodes();
  if (field.num_nodes() != n) throw InputError("integrate_field: field does not match the mesh");
  const int comps = static_cast<int>(field.arity);
  double sum = 0.0;
  for_each_quadrature_point(positions, [&](int e, const mesh::BasisEval& basis,
                                           const mesh::ElementGeometry& geo, const Vec3& x,
                                           double w) {
    const auto el = mesh_->element(e);
    Vec3 value = Vec3::Zero();
    for (int a = 0; a < basis.count; ++a)
      for (int l = 0; l < comps; ++l) value[l] += basis.values[a] * field.values[l * n + el[a]];
    sum += w * fn(x, geo.normal, value);
  });
  return sum;
}

SparseSymMatrix assemble_mass(const mesh::SurfaceMesh& mesh, const NodalVector& positions) {
  return Assembler(mesh).mass(positions);
}

SparseSymMatrix assemble_stiffness(const mesh::SurfaceMesh& mesh, const NodalVector& positions) {
  return Assembler(mesh).stiffness(positions);
}

NodalVector assemble_normal_rhs(const mesh::SurfaceMesh& mesh, const NodalVector& positions,
                                const PointForcing& g, double t) {
  return Assembler(mesh).normal_rhs(positions, g, t);
}

NodalVector assemble_scalar_rhs(const mesh::SurfaceMesh& mesh, const NodalVector& positions,
                                const FieldForcing& f, const NodalVector& u, double t) {
  return Assembler(mesh).scalar_rhs(positions, f, u, t);
}

}  // namespace evolvefem::fem
