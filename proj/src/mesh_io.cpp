#include "evolvefem/mesh.hpp"

#include <fstream>
#include <iomanip>
#include <istream>
#include <ostream>

namespace evolvefem::mesh {
namespace {

void expect(std::istream& in, const std::string& keyword) {
  std::string word;
  if (!(in >> word) || word != keyword) throw IoError("mesh file: expected '" + keyword + "'");
}

template <typename T>
T read_value(std::istream& in, const char* what) {
  T v;
  if (!(in >> v)) throw IoError(std::string("mesh file: could not read ") + what);
  return v;
}

bool ends_with(const std::string& s, const std::string& suffix) {
  return s.size() >= suffix.size() && s.compare(s.size() - suffix.size(), suffix.size(), suffix) == 0;
}

}  // namespace

void write_off(std::ostream& out, const SurfaceMesh& mesh) {
  if (mesh.degree() != 1) throw ConfigError("OFF export supports linear meshes only");
  const NodalVector& p = mesh.initial_positions();
  out << "OFF\n" << mesh.num_nodes() << ' ' << mesh.num_elements() << " 0\n";
  out << std::setprecision(17);
  for (int j = 0; j < mesh.num_nodes(); ++j) {
    const Vec3 x = p.node(j);
    out << x.x() << ' ' << x.y() << ' ' << x.z() << '\n';
  }
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const auto el = mesh.element(e);
    out << "3 " << el[0] << ' ' << el[1] << ' ' << el[2] << '\n';
  }
}

SurfaceMesh read_off(std::istream& in) {
  expect(in, "OFF");
  const int n = read_value<int>(in, "vertex count");
  const int m = read_value<int>(in, "face count");
  read_value<int>(in, "edge count");
  NodalVector pos = NodalVector::vector3(n);
  for (int j = 0; j < n; ++j) {
    Vec3 x;
    for (int c = 0; c < 3; ++c) x[c] = read_value<double>(in, "vertex coordinate");
    pos.set_node(j, x);
  }
  std::vector<int> conn;
  conn.reserve(3 * m);
  for (int e = 0; e < m; ++e) {
    if (read_value<int>(in, "face size") != 3) throw IoError("OFF file: only triangles supported");
    for (int c = 0; c < 3; ++c) conn.push_back(read_value<int>(in, "face index"));
  }
  SurfaceMesh mesh(1, std::move(conn), std::move(pos));
  mesh.validate();
  return mesh;
}

void write_native(std::ostream& out, const SurfaceMesh& mesh) {
  const NodalVector& p = mesh.initial_positions();
  out << "evolvefem-mesh 1\ndegree " << mesh.degree() << "\nnodes " << mesh.num_nodes() << '\n';
  out << std::setprecision(17);
  for (int j = 0; j < mesh.num_nodes(); ++j) {
    const Vec3 x = p.node(j);
    out << x.x() << ' ' << x.y() << ' ' << x.z() << '\n';
  }
  out << "elements " << mesh.num_elements() << '\n';
  for (int e = 0; e < mesh.num_elements(); ++e) {
    const auto el = mesh.element(e);
    for (std::size_t i = 0; i < el.size(); ++i) out << (i ? " " : "") << el[i];
    out << '\n';
  }
}

SurfaceMesh read_native(std::istream& in) {
  expect(in, "evolvefem-mesh");
  if (read_value<int>(in, "format version") != 1) throw IoError("unsupported mesh format version");
  expect(in, "degree");
  const int degree = read_value<int>(in, "degree");
  const int per_element = ReferenceElement::get(degree).node_count();
  expect(in, "nodes");
  const int n = read_value<int>(in, "node count");
  NodalVector pos = NodalVector::vector3(n);
  for (int j = 0; j < n; ++j) {
    Vec3 x;
    for (int c = 0; c < 3; ++c) x[c] = read_value<double>(in, "node coordinate");
    pos.set_node(j, x);
  }
  expect(in, "elements");
  const int m = read_value<int>(in, "element count");
  std::vector<int> conn(static_cast<std::size_t>(m) * per_element);
  for (int& idx : conn) idx = read_value<int>(in, "element index");
  SurfaceMesh mesh(degree, std::move(conn), std::move(pos));
  mesh.validate();
  return mesh;
}

SurfaceMesh load_mesh(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open mesh file " + path);
  try {
    return ends_with(path, ".off") ? read_off(in) : read_native(in);
  } catch (const InputError& e) {
    throw IoError(path + ": " + e.what());
  }
}

void save_mesh(const std::string& path, const SurfaceMesh& mesh) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot write mesh file " + path);
  if (ends_with(path, ".off"))
    write_off(out, mesh);
  else
    write_native(out, mesh);
  if (!out) throw IoError("error while writing " + path);
}

}  // namespace evolvefem::mesh
