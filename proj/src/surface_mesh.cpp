#include "evolvefem/mesh.hpp"

#include <algorithm>
#include <map>
#include <sstream>
#include <utility>

namespace evolvefem::mesh {

SurfaceMesh::SurfaceMesh(int degree, std::vector<int> connectivity, NodalVector initial_positions)
    : degree_(degree),
      nodes_per_element_(ReferenceElement::get(degree).node_count()),
      connectivity_(std::move(connectivity)),
      initial_positions_(std::move(initial_positions)) {
  if (initial_positions_.arity != Arity::Vector3)
    throw InputError("mesh positions must be a vector3 nodal vector");
  if (connectivity_.size() % nodes_per_element_ != 0)
    throw InputError("connectivity length is not a multiple of the element node count");
}

void SurfaceMesh::validate() const {
  const int n = num_nodes();
  std::vector<char> used(n, 0);
  for (int idx : connectivity_) {
    if (idx < 0 || idx >= n) throw InputError("element references node " + std::to_string(idx) +
                                              " outside [0, " + std::to_string(n) + ")");
    used[idx] = 1;
  }
  for (int j = 0; j < n; ++j)
    if (!used[j]) throw InputError("node " + std::to_string(j) + " is not used by any element");

  // Each directed vertex edge must occur exactly once and its reverse exactly once:
  // this gives closedness and consistent orientation together.
  std::map<std::pair<int, int>, int> directed;  // edge -> element-local edge node (or -1)
  for (int e = 0; e < num_elements(); ++e) {
    const auto el = element(e);
    for (int i = 0; i < 3; ++i) {
      const int a = el[i], b = el[(i + 1) % 3];
      const int mid = degree_ == 2 ? el[3 + i] : -1;
      if (!directed.emplace(std::make_pair(a, b), mid).second) {
        std::ostringstream msg;
        msg << "edge (" << a << "," << b << ") appears twice with the same orientation";
        throw InputError(msg.str());
      }
    }
  }
  for (const auto& [edge, mid] : directed) {
    auto it = directed.find({edge.second, edge.first});
    if (it == directed.end()) {
      std::ostringstream msg;
      msg << "edge (" << edge.first << "," << edge.second << ") has only one adjacent element";
      throw InputError(msg.str());
    }
    if (it->second != mid) throw InputError("neighbouring elements disagree on an edge node");
  }
}

void gather_element(const SurfaceMesh& mesh, const Vector& positions, int element_index,
                    std::array<Vec3, kMaxNodesPerElement>& out) {
  const int n = mesh.num_nodes();
  const auto el = mesh.element(element_index);
  for (std::size_t i = 0; i < el.size(); ++i) {
    const int j = el[i];
    out[i] = Vec3(positions[j], positions[n + j], positions[2 * n + j]);
  }
}

ElementGeometry element_geometry(std::span<const Vec3> coords, const BasisEval& basis,
                                 int element_index) {
  ElementGeometry g;
  g.jacobian.setZero();
  for (int i = 0; i < basis.count; ++i) g.jacobian += coords[i] * basis.gradients[i].transpose();

  const Eigen::Matrix2d gram = g.jacobian.transpose() * g.jacobian;
  const double det = gram.determinant();
  double diam = 0.0;
  for (int i = 0; i < 3; ++i) diam = std::max(diam, (coords[i] - coords[(i + 1) % 3]).norm());
  const double diam2 = diam * diam;
  if (!(det > 1e-14 * diam2 * diam2)) {
    throw DegenerateElementError("degenerate element " + std::to_string(element_index) +
                                     " (det(J^T J) = " + std::to_string(det) + ")",
                                 element_index);
  }
  g.area_element = std::sqrt(det);
  const Vec3 cross = g.jacobian.col(0).cross(g.jacobian.col(1));
  g.normal = cross / cross.norm();
  g.inv_gram << gram(1, 1), -gram(0, 1), -gram(1, 0), gram(0, 0);
  g.inv_gram /= det;
  return g;
}

ElementGeometry element_geometry(const SurfaceMesh& mesh, const NodalVector& positions,
                                 int element_index, const Vec2& xi) {
  std::array<Vec3, kMaxNodesPerElement> coords;
  gather_element(mesh, positions.values, element_index, coords);
  const BasisEval b = reference_basis(mesh.degree(), xi);
  return element_geometry(std::span<const Vec3>(coords.data(), b.count), b, element_index);
}

double mesh_width(const SurfaceMesh& mesh, const NodalVector& positions) {
  double h = 0.0;
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const auto el = mesh.element(e);
    for (int i = 0; i < 3; ++i)
      h = std::max(h, (positions.node(el[i]) - positions.node(el[(i + 1) % 3])).norm());
  }
  return h;
}

SurfaceMesh scaled(const SurfaceMesh& mesh, double factor) {
  NodalVector p = mesh.initial_positions();
  p.values *= factor;
  return SurfaceMesh(mesh.degree(), mesh.connectivity(), std::move(p));
}

}  // namespace evolvefem::mesh
