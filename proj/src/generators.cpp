#include "evolvefem/mesh.hpp"

#include <cmath>
#include <map>
#include <numbers>

namespace evolvefem::mesh {
namespace {

struct LinearSurface {
  std::vector<Vec3> vertices;
  std::vector<std::array<int, 3>> faces;
};

LinearSurface icosahedron() {
  const double phi = 0.5 * (1.0 + std::sqrt(5.0));
  LinearSurface s;
  s.vertices = {{-1, phi, 0}, {1, phi, 0},  {-1, -phi, 0}, {1, -phi, 0},
                {0, -1, phi}, {0, 1, phi},  {0, -1, -phi}, {0, 1, -phi},
                {phi, 0, -1}, {phi, 0, 1},  {-phi, 0, -1}, {-phi, 0, 1}};
  for (auto& v : s.vertices) v.normalize();
  s.faces = {{0, 11, 5}, {0, 5, 1},  {0, 1, 7},   {0, 7, 10}, {0, 10, 11},
             {1, 5, 9},  {5, 11, 4}, {11, 10, 2}, {10, 7, 6}, {7, 1, 8},
             {3, 9, 4},  {3, 4, 2},  {3, 2, 6},   {3, 6, 8},  {3, 8, 9},
             {4, 9, 5},  {2, 4, 11}, {6, 2, 10},  {8, 6, 7},  {9, 8, 1}};
  for (auto& f : s.faces) {
    const Vec3& a = s.vertices[f[0]];
    const Vec3& b = s.vertices[f[1]];
    const Vec3& c = s.vertices[f[2]];
    if ((b - a).cross(c - a).dot(a + b + c) < 0) std::swap(f[1], f[2]);
  }
  return s;
}

using EdgeKey = std::pair<int, int>;
EdgeKey edge_key(int a, int b) { return a < b ? EdgeKey{a, b} : EdgeKey{b, a}; }

LinearSurface subdivide(const LinearSurface& in) {
  LinearSurface out;
  out.vertices = in.vertices;
  std::map<EdgeKey, int> midpoints;
  auto mid = [&](int a, int b) {
    auto [it, inserted] = midpoints.emplace(edge_key(a, b), 0);
    if (inserted) {
      it->second = static_cast<int>(out.vertices.size());
      out.vertices.push_back((in.vertices[a] + in.vertices[b]).normalized());
    }
    return it->second;
  };
  out.faces.reserve(in.faces.size() * 4);
  for (const auto& f : in.faces) {
    const int ab = mid(f[0], f[1]), bc = mid(f[1], f[2]), ca = mid(f[2], f[0]);
    out.faces.push_back({f[0], ab, ca});
    out.faces.push_back({ab, f[1], bc});
    out.faces.push_back({ca, bc, f[2]});
    out.faces.push_back({ab, bc, ca});
  }
  return out;
}

SurfaceMesh to_lagrange_mesh(const LinearSurface& s, int degree) {
  ReferenceElement::get(degree);  // validates degree
  std::vector<Vec3> nodes = s.vertices;
  std::vector<int> conn;
  if (degree == 1) {
    for (const auto& f : s.faces) conn.insert(conn.end(), f.begin(), f.end());
  } else {
    std::map<EdgeKey, int> edge_nodes;
    auto edge_node = [&](int a, int b) {
      auto [it, inserted] = edge_nodes.emplace(edge_key(a, b), 0);
      if (inserted) {
        it->second = static_cast<int>(nodes.size());
        nodes.push_back((s.vertices[a] + s.vertices[b]).normalized());
      }
      return it->second;
    };
    for (const auto& f : s.faces) {
      conn.insert(conn.end(), f.begin(), f.end());
      conn.push_back(edge_node(f[0], f[1]));
      conn.push_back(edge_node(f[1], f[2]));
      conn.push_back(edge_node(f[2], f[0]));
    }
  }
  NodalVector pos = NodalVector::vector3(static_cast<int>(nodes.size()));
  for (std::size_t j = 0; j < nodes.size(); ++j) pos.set_node(static_cast<int>(j), nodes[j]);
  return SurfaceMesh(degree, std::move(conn), std::move(pos));
}

}  // namespace

SurfaceMesh generate_sphere_mesh(int level, int degree) {
  if (level < 0) throw ConfigError("refinement level must be >= 0");
  LinearSurface s = icosahedron();
  for (int l = 0; l < level; ++l) s = subdivide(s);
  return to_lagrange_mesh(s, degree);
}

LevelSet sphere_level_set(double radius) {
  return {[radius](const Vec3& x) { return x.norm() - radius; },
          [](const Vec3& x) -> Vec3 { return x.normalized(); }};
}

LevelSet rounded_cube_level_set(double half_width, int q) {
  return {[half_width, q](const Vec3& x) {
            const double s = std::pow(x.x(), q) + std::pow(x.y(), q) + std::pow(x.z(), q);
            return std::pow(s, 1.0 / q) - half_width;
          },
          [q](const Vec3& x) -> Vec3 {
            const double s = std::pow(x.x(), q) + std::pow(x.y(), q) + std::pow(x.z(), q);
            const double f = std::pow(s, 1.0 / q - 1.0);
            return {f * std::pow(x.x(), q - 1), f * std::pow(x.y(), q - 1),
                    f * std::pow(x.z(), q - 1)};
          }};
}

SurfaceMesh generate_implicit_mesh(const LevelSet& level_set, const SurfaceMesh& base,
                                   int max_iterations) {
  constexpr double kTarget = 1e-12;
  constexpr double kAccept = 1e-10;
  NodalVector pos = base.initial_positions();
  for (int j = 0; j < pos.num_nodes(); ++j) {
    Vec3 x = pos.node(j);
    double phi = level_set.value(x);
    int it = 0;
    while (std::abs(phi) > kTarget && it < max_iterations) {
      const Vec3 grad = level_set.gradient(x);
      const Vec3 step = phi * grad / grad.squaredNorm();
      double damping = 1.0;
      Vec3 trial = x - step;
      double trial_phi = level_set.value(trial);
      while (!(std::abs(trial_phi) < std::abs(phi)) && damping > 1e-8) {
        damping *= 0.5;
        trial = x - damping * step;
        trial_phi = level_set.value(trial);
      }
      if (!(std::abs(trial_phi) < std::abs(phi))) break;
      x = trial;
      phi = trial_phi;
      ++it;
    }
    if (!(std::abs(phi) <= kAccept))
      throw ProjectionError("level-set projection did not converge at node " + std::to_string(j),
                            j);
    pos.set_node(j, x);
  }
  return SurfaceMesh(base.degree(), base.connectivity(), std::move(pos));
}

}  // namespace evolvefem::mesh
