#pragma once

#include "evolvefem/common.hpp"

#include <array>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

namespace evolvefem {

/// Flat nodal coefficient vector. Vector-valued fields are stored component-major:
/// all first components, then all second, then all third (the I3 (x) M block layout).
enum class Arity { Scalar = 1, Vector3 = 3 };

struct NodalVector {
  Vector values;
  Arity arity = Arity::Scalar;

  NodalVector() = default;
  NodalVector(Vector v, Arity a) : values(std::move(v)), arity(a) {}

  static NodalVector scalar(int num_nodes, double fill = 0.0) {
    return {Vector::Constant(num_nodes, fill), Arity::Scalar};
  }
  static NodalVector vector3(int num_nodes, double fill = 0.0) {
    return {Vector::Constant(3 * num_nodes, fill), Arity::Vector3};
  }

  int num_nodes() const { return static_cast<int>(values.size()) / static_cast<int>(arity); }
  Vec3 node(int j) const {
    const int n = num_nodes();
    return {values[j], values[n + j], values[2 * n + j]};
  }
  void set_node(int j, const Vec3& p) {
    const int n = num_nodes();
    values[j] = p.x();
    values[n + j] = p.y();
    values[2 * n + j] = p.z();
  }
};

namespace mesh {

constexpr int kMaxNodesPerElement = 6;

/// Lagrange basis values and reference gradients at one reference point.
struct BasisEval {
  int count = 0;
  std::array<double, kMaxNodesPerElement> values{};
  std::array<Vec2, kMaxNodesPerElement> gradients{};
};

/// Degree-k Lagrange triangle on the unit reference triangle {s,t >= 0, s+t <= 1}.
///
/// Node order: the three vertices (0,0), (1,0), (0,1); for k = 2 followed by the
/// midpoints of edges (0,1), (1,2), (2,0), which is the VTK quadratic-triangle order.
class ReferenceElement {
 public:
  /// Throws ConfigError for degrees other than 1 and 2.
  static const ReferenceElement& get(int degree);

  int degree() const { return degree_; }
  int node_count() const { return static_cast<int>(nodes_.size()); }
  std::span<const Vec2> nodes() const { return nodes_; }

  BasisEval evaluate(const Vec2& xi) const;

 private:
  explicit ReferenceElement(int degree);
  int degree_;
  std::vector<Vec2> nodes_;
};

BasisEval reference_basis(int degree, const Vec2& xi);

struct QuadratureRule {
  int degree = 0;  // polynomial exactness
  std::vector<Vec2> points;
  std::vector<double> weights;  // sum to 1/2

  int size() const { return static_cast<int>(points.size()); }
};

/// A positive-weight rule exact for polynomials of at least the requested degree.
/// Degrees 1, 2, 4, 5, 6 are fully symmetric rules; 3 falls back to 4, and degrees
/// above 6 use a collapsed Gauss-Legendre product rule.
QuadratureRule quadrature_rule(int exactness_degree);

/// Quadrature degree used for every assembly with elements of degree k.
inline int assembly_quadrature_degree(int k) { return 2 * k + 2; }

/// Connectivity of a closed triangulated surface with degree-k Lagrange elements.
/// Positions are kept separately; `initial_positions` is x^0.
class SurfaceMesh {
 public:
  SurfaceMesh() = default;
  SurfaceMesh(int degree, std::vector<int> connectivity, NodalVector initial_positions);

  int degree() const { return degree_; }
  int num_nodes() const { return initial_positions_.num_nodes(); }
  int nodes_per_element() const { return nodes_per_element_; }
  int num_elements() const {
    return nodes_per_element_ == 0 ? 0 : static_cast<int>(connectivity_.size()) / nodes_per_element_;
  }
  std::span<const int> element(int e) const {
    return {connectivity_.data() + static_cast<std::size_t>(e) * nodes_per_element_,
            static_cast<std::size_t>(nodes_per_element_)};
  }
  const std::vector<int>& connectivity() const { return connectivity_; }
  const NodalVector& initial_positions() const { return initial_positions_; }

  /// Checks node usage, closedness (each edge shared by two elements) and
  /// consistent orientation of neighbouring elements. Throws InputError.
  void validate() const;

 private:
  int degree_ = 1;
  int nodes_per_element_ = 0;
  std::vector<int> connectivity_;
  NodalVector initial_positions_;
};

/// Reference-to-surface map data at one point of one element.
struct ElementGeometry {
  Eigen::Matrix<double, 3, 2> jacobian;
  double area_element = 0.0;
  Vec3 normal;
  Eigen::Matrix2d inv_gram;

  /// Surface gradient of a field whose reference gradient is `ref_grad`.
  Vec3 surface_gradient(const Vec2& ref_grad) const { return jacobian * (inv_gram * ref_grad); }
};

/// Geometry from already-evaluated basis gradients; `coords` holds the element's node
/// positions. Throws DegenerateElementError (carrying `element_index`) if
/// det(J^T J) <= 1e-14 * diam^4.
ElementGeometry element_geometry(std::span<const Vec3> coords, const BasisEval& basis,
                                 int element_index);

ElementGeometry element_geometry(const SurfaceMesh& mesh, const NodalVector& positions,
                                 int element_index, const Vec2& xi);

/// Node coordinates of one element, gathered from a component-major position vector.
void gather_element(const SurfaceMesh& mesh, const Vector& positions, int element_index,
                    std::array<Vec3, kMaxNodesPerElement>& out);

/// Maximum straight-edge length between element vertices.
double mesh_width(const SurfaceMesh& mesh, const NodalVector& positions);

/// Icosahedron refined `level` times by quadrisection; every Lagrange node is projected
/// radially onto the unit sphere.
SurfaceMesh generate_sphere_mesh(int level, int degree);

/// A level-set description phi(x) = 0 with its gradient.
struct LevelSet {
  std::function<double(const Vec3&)> value;
  std::function<Vec3(const Vec3&)> gradient;
};

LevelSet sphere_level_set(double radius = 1.0);

/// (x^q + y^q + z^q)^(1/q) - half_width for even q.
LevelSet rounded_cube_level_set(double half_width = 1.0, int q = 4);

/// Projects every Lagrange node of `base` onto phi = 0 by damped Newton steps along the
/// gradient, to |phi| <= 1e-10. Throws ProjectionError naming the node on failure.
SurfaceMesh generate_implicit_mesh(const LevelSet& level_set, const SurfaceMesh& base,
                                   int max_iterations = 100);

/// Copy of `mesh` with positions scaled by `factor`.
SurfaceMesh scaled(const SurfaceMesh& mesh, double factor);

// Text formats. OFF stores linear meshes; the native format stores any degree:
//
//   evolvefem-mesh 1
//   degree <k>
//   nodes <N>
//   <x> <y> <z>          (N lines)
//   elements <E>
//   <i_0> ... <i_{n-1}>  (E lines, 0-based, local node order of ReferenceElement)
void write_off(std::ostream& out, const SurfaceMesh& mesh);
SurfaceMesh read_off(std::istream& in);
void write_native(std::ostream& out, const SurfaceMesh& mesh);
SurfaceMesh read_native(std::istream& in);

/// Reads either format, chosen by the `.off` extension. Throws IoError.
SurfaceMesh load_mesh(const std::string& path);
void save_mesh(const std::string& path, const SurfaceMesh& mesh);

}  // namespace mesh
}  // namespace evolvefem
