#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <sstream>

#include "evolvefem/experiment.hpp"
#include "evolvefem/output.hpp"

namespace py = pybind11;
using namespace evolvefem;

namespace {

// pybind11 holders cannot point to const; the mesh is never mutated from Python.
using MeshPtr = std::shared_ptr<mesh::SurfaceMesh>;
MeshPtr hold(std::shared_ptr<const mesh::SurfaceMesh> m) { return std::const_pointer_cast<mesh::SurfaceMesh>(m); }
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, 3, Eigen::RowMajor>;

// Nodal vectors are component-major; Python sees (N, 3) arrays.
RowMatrix to_rows(const Vector& v) {
  const int n = static_cast<int>(v.size()) / 3;
  RowMatrix out(n, 3);
  for (int c = 0; c < 3; ++c) out.col(c) = v.segment(c * n, n);
  return out;
}

NodalVector from_rows(const RowMatrix& a, const mesh::SurfaceMesh& m) {
  if (a.rows() != m.num_nodes()) throw InputError("expected an array of shape (num_nodes, 3)");
  Vector v(3 * a.rows());
  for (int c = 0; c < 3; ++c) v.segment(c * a.rows(), a.rows()) = a.col(c);
  return {v, Arity::Vector3};
}

py::dict csr(const fem::SparseSymMatrix& s) {
  py::dict d;
  d["data"] = Vector(s.values());
  d["indices"] = s.pattern().cols;
  d["indptr"] = s.pattern().row_ptr;
  d["shape"] = py::make_tuple(s.dimension(), s.dimension());
  return d;
}

// kwargs -> the flat TOML table used by the CLI, so both front ends share validation.
experiment::RunConfig config_from_kwargs(const py::kwargs& kw, experiment::RunConfig base = {}) {
  experiment::FlatToml t;
  for (auto item : kw) {
    const std::string key = py::cast<std::string>(item.first);
    const py::handle v = item.second;
    if (py::isinstance<py::bool_>(v)) t[key] = v.cast<bool>();
    else if (py::isinstance<py::int_>(v)) t[key] = v.cast<long>();
    else if (py::isinstance<py::float_>(v)) t[key] = v.cast<double>();
    else if (py::isinstance<py::str>(v)) t[key] = v.cast<std::string>();
    else t[key] = v.cast<std::vector<double>>();
  }
  return experiment::apply_toml(t, std::move(base));
}

py::list tables_to_py(const std::vector<verify::ConvergenceTable>& tables) {
  py::list out;
  for (const auto& t : tables) {
    py::list rows;
    for (const auto& r : t.rows)
      rows.append(py::dict(py::arg("param") = r.param, py::arg("L2") = r.l2,
                           py::arg("H1") = r.h1, py::arg("EOC_L2") = r.eoc_l2,
                           py::arg("EOC_H1") = r.eoc_h1));
    out.append(rows);
  }
  return out;
}

py::dict run_impl(const experiment::RunConfig& cfg) {
  std::ostringstream log;
  const auto records = experiment::cmd_run(cfg, log);
  py::list runs;
  for (const auto& r : records) {
    py::dict d;
    d["name"] = r.name;
    d["times"] = r.times;
    d["areas"] = r.areas;
    d["steps"] = r.summary.steps;
    d["final_time"] = r.summary.final_state.time;
    d["positions"] = to_rows(r.summary.final_state.x.newest());
    d["velocity"] = to_rows(r.summary.final_state.velocity);
    std::vector<std::string> files;
    for (const auto& f : r.files) files.push_back(f.string());
    d["files"] = files;
    if (r.position_error) d["position_error"] = py::make_tuple(r.position_error->l2, r.position_error->h1);
    runs.append(d);
  }
  py::dict out;
  out["runs"] = runs;
  out["log"] = log.str();
  return out;
}

}  // namespace

PYBIND11_MODULE(_evolvefem, m) {
  m.doc() = "Evolving surface finite elements with linearly implicit BDF time stepping";

  py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
  py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
  py::register_exception<SolverError>(m, "SolverError", PyExc_RuntimeError);
  py::register_exception<IoError>(m, "IoError", PyExc_OSError);

  py::class_<mesh::SurfaceMesh, MeshPtr>(m, "Mesh")
      .def_property_readonly("degree", &mesh::SurfaceMesh::degree)
      .def_property_readonly("num_nodes", &mesh::SurfaceMesh::num_nodes)
      .def_property_readonly("num_elements", &mesh::SurfaceMesh::num_elements)
      .def_property_readonly("positions",
                             [](const mesh::SurfaceMesh& s) { return to_rows(s.initial_positions().values); })
      .def_property_readonly("connectivity", [](const mesh::SurfaceMesh& s) {
        Eigen::Matrix<int, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor> c(
            s.num_elements(), s.nodes_per_element());
        for (int e = 0; e < s.num_elements(); ++e)
          for (int i = 0; i < s.nodes_per_element(); ++i) c(e, i) = s.element(e)[i];
        return c;
      });

  m.def("sphere_mesh", [](int level, int degree, double radius) -> MeshPtr {
    return std::make_shared<mesh::SurfaceMesh>(
        mesh::scaled(mesh::generate_sphere_mesh(level, degree), radius));
  }, py::arg("level"), py::arg("degree") = 2, py::arg("radius") = 1.0);

  m.def("rounded_cube_mesh", [](int level, double half_width, int degree) -> MeshPtr {
    experiment::RunConfig c;
    c.geometry = "rounded-cube";
    c.manufactured = false;
    c.cube_half_width = half_width;
    c.degree = degree;
    return hold(experiment::build_mesh(c, level));
  }, py::arg("level"), py::arg("half_width") = 2.0, py::arg("degree") = 2);

  m.def("load_mesh", [](const std::string& path) -> MeshPtr {
    return std::make_shared<mesh::SurfaceMesh>(mesh::load_mesh(path));
  });

  m.def("mass_stiffness", [](const MeshPtr& mesh, const RowMatrix& positions) {
    const fem::Assembler a(mesh);
    const auto [mm, aa] = a.mass_stiffness(from_rows(positions, *mesh));
    return py::make_tuple(csr(mm), csr(aa));
  }, py::arg("mesh"), py::arg("positions"),
        "Mass and stiffness matrices as CSR dicts (data, indices, indptr, shape).");

  m.def("surface_area", [](const MeshPtr& mesh, const RowMatrix& positions) {
    return verify::surface_area(*mesh, from_rows(positions, *mesh));
  });

  m.def("write_vtk", [](const std::string& path, const MeshPtr& mesh, const RowMatrix& positions,
                        std::optional<RowMatrix> velocity, std::optional<Vector> u, double time) {
    const NodalVector x = from_rows(positions, *mesh);
    std::optional<NodalVector> v;
    if (velocity) v = from_rows(*velocity, *mesh);
    std::optional<NodalVector> s;
    if (u) s = NodalVector(*u, Arity::Scalar);
    io::write_vtk(path, *mesh, x, v ? &*v : nullptr, s ? &*s : nullptr, time);
  }, py::arg("path"), py::arg("mesh"), py::arg("positions"), py::arg("velocity") = py::none(),
        py::arg("u") = py::none(), py::arg("time") = 0.0);

  m.def("bdf_coefficients", [](int p) {
    return py::make_tuple(bdf::delta_coefficients(p), bdf::gamma_coefficients(p));
  });
  m.def("zero_stable", &bdf::zero_stability_check);
  m.def("nevanlinna_odeh_eta", &bdf::nevanlinna_odeh_eta);
  m.def("multiplier_check", &bdf::multiplier_check);

  m.def("logistic_radius", [](double t, double r0, double r1) {
    const auto r = verify::logistic_radius(t, r0, r1);
    return py::make_tuple(r.r, r.rdot);
  }, py::arg("t"), py::arg("r0") = 1.0, py::arg("r1") = 2.0);

  m.def("weak_residual", [](const std::string& law, int level, double t) {
    const verify::ManufacturedSolution ms;
    const auto mesh = std::make_shared<const mesh::SurfaceMesh>(mesh::generate_sphere_mesh(level, 2));
    const auto r = law == "coupled-u" ? verify::weak_residual_u(ms, mesh, t)
                                      : verify::weak_residual(ms, laws::parse_law(law), mesh, t);
    return r.star;
  }, py::arg("law"), py::arg("level"), py::arg("t"),
        "Dual norm of the weak residual of a manufactured forcing on a k=2 sphere mesh.");

  m.def("run", [](py::kwargs kw) { return run_impl(config_from_kwargs(kw)); },
        "Run one configuration. Keyword arguments use the config-file keys "
        "(law, order, tau, end_time, levels, output_dir, write_vtk, ...).");
  m.def("mcf_demo", [](py::kwargs kw) {
    return run_impl(config_from_kwargs(kw, experiment::mcf_demo_preset()));
  });
  m.def("converge_time", [](py::kwargs kw) {
    experiment::RunConfig base;
    base.end_time = 5.0;
    return tables_to_py(experiment::cmd_converge_time(config_from_kwargs(kw, base)));
  });
  m.def("converge_space", [](py::kwargs kw) {
    experiment::RunConfig base;
    base.end_time = 5.0;
    base.levels = {1, 2, 3};
    return tables_to_py(experiment::cmd_converge_space(config_from_kwargs(kw, base)));
  });
  m.def("coefficients_table", [](int p) {
    std::ostringstream s;
    experiment::cmd_coefficients(p, s);
    return s.str();
  });
}
