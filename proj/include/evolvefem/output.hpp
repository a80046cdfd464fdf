#pragma once

#include "evolvefem/laws.hpp"

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

namespace evolvefem::io {

/// Legacy ASCII unstructured grid. Cells are VTK_TRIANGLE (5) for k = 1 and
/// VTK_QUADRATIC_TRIANGLE (22) for k = 2; the mesh node order is already VTK's.
/// `velocity` and `u` are attached as point data when given.
void write_vtk(std::ostream& out, const mesh::SurfaceMesh& mesh, const NodalVector& positions,
               const NodalVector* velocity = nullptr, const NodalVector* u = nullptr,
               double time = 0.0);

/// Throws IoError if the file cannot be written.
void write_vtk(const std::filesystem::path& path, const mesh::SurfaceMesh& mesh,
               const NodalVector& positions, const NodalVector* velocity = nullptr,
               const NodalVector* u = nullptr, double time = 0.0);

/// Numbered files <dir>/<prefix>000000.vtk, ... written from run() observations.
class VtkSeries {
 public:
  /// Creates `dir` if needed (IoError on failure).
  VtkSeries(std::filesystem::path dir, std::shared_ptr<const mesh::SurfaceMesh> mesh,
            std::string prefix = "surface_");

  laws::Observer observer();
  const std::vector<std::filesystem::path>& files() const { return files_; }

 private:
  std::filesystem::path dir_;
  std::shared_ptr<const mesh::SurfaceMesh> mesh_;
  std::string prefix_;
  std::vector<std::filesystem::path> files_;
};

}  // namespace evolvefem::io
