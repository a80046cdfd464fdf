#include "evolvefem/output.hpp"

#include <cstdio>
#include <fstream>
#include <ostream>

namespace evolvefem::io {

namespace {

void write_point_vectors(std::ostream& out, const char* name, const NodalVector& v) {
  out << "VECTORS " << name << " double\n";
  for (int j = 0; j < v.num_nodes(); ++j) {
    const Vec3 p = v.node(j);
    out << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
  }
}

}  // namespace

void write_vtk(std::ostream& out, const mesh::SurfaceMesh& mesh, const NodalVector& positions,
               const NodalVector* velocity, const NodalVector* u, double time) {
  const int n = mesh.num_nodes();
  if (positions.values.size() != 3 * n) throw InputError("write_vtk: position size mismatch");
  if (velocity && velocity->values.size() != 3 * n)
    throw InputError("write_vtk: velocity size mismatch");
  if (u && u->values.size() != n) throw InputError("write_vtk: u size mismatch");

  const int m = mesh.num_elements();
  const int npe = mesh.nodes_per_element();
  const int cell_type = mesh.degree() == 1 ? 5 : 22;

  out.precision(17);
  out << "# vtk DataFile Version 3.0\n";
  out << "evolvefem surface t=" << time << "\n";
  out << "ASCII\nDATASET UNSTRUCTURED_GRID\n";
  out << "POINTS " << n << " double\n";
  for (int j = 0; j < n; ++j) {
    const Vec3 p = positions.node(j);
    out << p.x() << ' ' << p.y() << ' ' << p.z() << '\n';
  }
  out << "CELLS " << m << ' ' << m * (npe + 1) << '\n';
  for (int e = 0; e < m; ++e) {
    out << npe;
    for (int i : mesh.element(e)) out << ' ' << i;
    out << '\n';
  }
  out << "CELL_TYPES " << m << '\n';
  for (int e = 0; e < m; ++e) out << cell_type << '\n';

  if (velocity || u) out << "POINT_DATA " << n << '\n';
  if (velocity) write_point_vectors(out, "velocity", *velocity);
  if (u) {
    out << "SCALARS u double 1\nLOOKUP_TABLE default\n";
    for (int j = 0; j < n; ++j) out << u->values[j] << '\n';
  }
}

void write_vtk(const std::filesystem::path& path, const mesh::SurfaceMesh& mesh,
               const NodalVector& positions, const NodalVector* velocity, const NodalVector* u,
               double time) {
  std::ofstream out(path);
  if (!out) throw IoError("cannot open '" + path.string() + "' for writing");
  write_vtk(out, mesh, positions, velocity, u, time);
  if (!out) throw IoError("write to '" + path.string() + "' failed");
}

VtkSeries::VtkSeries(std::filesystem::path dir, std::shared_ptr<const mesh::SurfaceMesh> mesh,
                     std::string prefix)
    : dir_(std::move(dir)), mesh_(std::move(mesh)), prefix_(std::move(prefix)) {
  std::error_code ec;
  std::filesystem::create_directories(dir_, ec);
  if (ec) throw IoError("cannot create '" + dir_.string() + "': " + ec.message());
}

laws::Observer VtkSeries::observer() {
  return [this](const laws::Observation& o) {
    char name[32];
    std::snprintf(name, sizeof name, "%06zu.vtk", files_.size());
    const auto path = dir_ / (prefix_ + name);
    write_vtk(path, *mesh_, o.positions, &o.velocity, o.u, o.time);
    files_.push_back(path);
  };
}

}  // namespace evolvefem::io
