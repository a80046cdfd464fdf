#include <doctest.h>

#include "evolvefem/experiment.hpp"
#include "evolvefem/output.hpp"

#include <filesystem>
#include <fstream>
#include <sstream>

using namespace evolvefem;
using namespace evolvefem::experiment;
namespace fs = std::filesystem;

namespace {

fs::path scratch(const std::string& name) {
  const fs::path p = fs::temp_directory_path() / "evolvefem_test_experiment" / name;
  fs::remove_all(p);
  return p;
}

}  // namespace

TEST_CASE("flat TOML subset") {
  const FlatToml t = parse_flat_toml(R"(
# comment
law = "dynamic"   # trailing comment
order = 3
tau = 2.5e-2
levels = [1, 2, 3,]
manufactured = false
output_dir = "a # b"
)");
  CHECK(std::get<std::string>(t.at("law")) == "dynamic");
  CHECK(std::get<long>(t.at("order")) == 3);
  CHECK(std::get<double>(t.at("tau")) == 0.025);
  CHECK(std::get<std::vector<double>>(t.at("levels")) == std::vector<double>{1, 2, 3});
  CHECK(std::get<bool>(t.at("manufactured")) == false);
  CHECK(std::get<std::string>(t.at("output_dir")) == "a # b");

  const RunConfig c = apply_toml(t);
  CHECK(c.law == "dynamic");
  CHECK(c.order == 3);
  CHECK(c.levels == std::vector<int>{1, 2, 3});
  CHECK(c.output_dir == "a # b");

  CHECK_THROWS_AS(parse_flat_toml("[table]\n"), ConfigError);
  CHECK_THROWS_AS(parse_flat_toml("order 3\n"), ConfigError);
  CHECK_THROWS_AS(parse_flat_toml("order = 3\norder = 4\n"), ConfigError);
  CHECK_THROWS_AS(parse_flat_toml("law = \"open\n"), ConfigError);
  CHECK_THROWS_AS(parse_flat_toml("levels = [1, x]\n"), ConfigError);
  CHECK_THROWS_AS(apply_toml(parse_flat_toml("colour = 1\n")), ConfigError);
  CHECK_THROWS_AS(apply_toml(parse_flat_toml("order = 2.5\n")), ConfigError);
  CHECK_THROWS_AS(apply_toml(parse_flat_toml("levels = [1.5]\n")), ConfigError);
  // integers are accepted where floats are expected
  CHECK(apply_toml(parse_flat_toml("tau = 1\n")).tau == 1.0);
}

TEST_CASE("run configuration validation") {
  RunConfig c;
  CHECK_NOTHROW(c.validate());
  c.law = "curvature";
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = RunConfig{};
  c.law = "dynamic";
  c.order = 6;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = RunConfig{};
  c.alpha = 0.0;
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c.allow_zero_alpha = true;
  CHECK_NOTHROW(c.validate());
  c = RunConfig{};
  c.levels.clear();
  CHECK_THROWS_AS(c.validate(), ConfigError);
  c = RunConfig{};
  c.geometry = "rounded-cube";
  CHECK_THROWS_AS(c.validate(), ConfigError);  // manufactured data needs the sphere
  c.manufactured = false;
  CHECK_NOTHROW(c.validate());
  c = RunConfig{};
  c.start = "warm";
  CHECK_THROWS_AS(c.validate(), ConfigError);
  CHECK_NOTHROW(mcf_demo_preset().validate());
  CHECK(RunConfig{}.tau_list() == std::vector<double>{0.1, 0.05, 0.025, 0.0125, 0.00625});
}

TEST_CASE("VTK output") {
  const mesh::SurfaceMesh m = mesh::generate_sphere_mesh(0, 2);
  const NodalVector& x = m.initial_positions();
  NodalVector u = NodalVector::scalar(m.num_nodes(), 0.5);
  std::ostringstream s;
  io::write_vtk(s, m, x, &x, &u, 0.25);
  const std::string out = s.str();
  CHECK(out.rfind("# vtk DataFile Version 3.0\n", 0) == 0);
  CHECK(out.find("DATASET UNSTRUCTURED_GRID") != std::string::npos);
  CHECK(out.find("POINTS 42 double") != std::string::npos);
  CHECK(out.find("CELLS 20 140") != std::string::npos);
  CHECK(out.find("CELL_TYPES 20\n22\n") != std::string::npos);
  CHECK(out.find("VECTORS velocity double") != std::string::npos);
  CHECK(out.find("SCALARS u double 1") != std::string::npos);

  std::ostringstream linear;
  io::write_vtk(linear, mesh::generate_sphere_mesh(0, 1), mesh::generate_sphere_mesh(0, 1).initial_positions());
  CHECK(linear.str().find("CELL_TYPES 20\n5\n") != std::string::npos);
  CHECK(linear.str().find("POINT_DATA") == std::string::npos);

  NodalVector wrong = NodalVector::scalar(3);
  CHECK_THROWS_AS(io::write_vtk(s, m, x, nullptr, &wrong), InputError);
  CHECK_THROWS_AS(io::write_vtk(fs::path("/nonexistent/dir/x.vtk"), m, x), IoError);
}

TEST_CASE("run command writes numbered VTK files and a summary") {
  RunConfig c;
  c.law = "coupled";
  c.levels = {1};
  c.tau = 0.1;
  c.end_time = 0.5;
  c.stride = 2;
  c.output_dir = scratch("run").string();
  std::ostringstream log;
  const auto rec = cmd_run(c, log);
  REQUIRE(rec.size() == 1);
  CHECK(rec[0].files.size() == 3);  // steps 0, 2, 4
  CHECK(rec[0].files[2].filename() == "surface_000002.vtk");
  CHECK(fs::exists(fs::path(c.output_dir) / "summary.json"));
  CHECK(rec[0].position_error.has_value());
  CHECK(log.str().empty());

  std::ifstream in(fs::path(c.output_dir) / "summary.json");
  const auto j = nlohmann::json::parse(in);
  CHECK(j["runs"][0]["steps"] == 5);
  CHECK(j["runs"][0]["times"].size() == 3);

  c.tau = 1.0;  // longer than the run: only the starting phase
  c.write_vtk = false;
  const auto short_run = cmd_run(c, log);
  CHECK(log.str().find("warning") != std::string::npos);
  CHECK(short_run[0].summary.start_only);
}

TEST_CASE("convergence tables are reproducible byte for byte") {
  RunConfig c;
  c.levels = {1};
  c.taus = {0.2, 0.1};
  c.end_time = 0.6;
  c.output_dir = scratch("ct").string();
  cmd_converge_time(c, 1);
  const fs::path csv = fs::path(c.output_dir) / "converge_time_level1.csv";
  std::ifstream a(csv);
  const std::string first((std::istreambuf_iterator<char>(a)), {});
  cmd_converge_time(c, 2);
  std::ifstream b(csv);
  const std::string second((std::istreambuf_iterator<char>(b)), {});
  CHECK(first == second);
  CHECK(first.rfind("param,L2,H1,EOC_L2,EOC_H1\n0.2,", 0) == 0);

  c.manufactured = false;
  CHECK_THROWS_AS(cmd_converge_time(c), ConfigError);
}

TEST_CASE("coefficient table") {
  std::ostringstream s;
  cmd_coefficients(2, s);
  CHECK(s.str().find("delta: 3/2 -2 1/2") != std::string::npos);
  CHECK(s.str().find("gamma: 2 -1") != std::string::npos);
  std::ostringstream s5;
  cmd_coefficients(5, s5);
  CHECK(s5.str().find("eta: 0.8160") != std::string::npos);
  std::ostringstream s7;
  cmd_coefficients(7, s7);
  CHECK(s7.str().find("not zero-stable") != std::string::npos);
  CHECK_THROWS_AS(cmd_coefficients(8, s7), ConfigError);
  CHECK_THROWS_AS(cmd_coefficients(0, s7), ConfigError);
}
