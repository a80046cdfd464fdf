#pragma once

#include "evolvefem/verify.hpp"

#include <filesystem>
#include <iosfwd>
#include <map>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include <json.hpp>

namespace evolvefem::experiment {

/// Everything a command needs. Flat, so it maps one-to-one onto a TOML file.
struct RunConfig {
  std::string law = "regularized";  // regularized | dynamic | coupled | mcf-demo
  int order = 2;
  int degree = 2;
  double tau = 0.01;
  double end_time = 1.0;
  double alpha = 1.0;
  double beta = 1.0;
  std::vector<int> levels{3};
  std::vector<double> taus;  // converge-*; empty: 0.1 * 2^-i, i < tau_count
  int tau_count = 5;
  bool manufactured = true;
  double r0 = 1.0;
  double r1 = 2.0;
  std::string start = "exact";
  std::string geometry = "sphere";  // sphere | rounded-cube (non-manufactured runs)
  double cube_half_width = 2.0;
  std::string output_dir = "out";
  int stride = 1;
  bool allow_zero_alpha = false;
  bool write_vtk = true;

  /// Throws ConfigError. Checked before any mesh is built.
  void validate() const;
  std::vector<double> tau_list() const;
  verify::ManufacturedSolution manufactured_solution() const;
};

using TomlValue = std::variant<bool, long, double, std::string, std::vector<double>>;
using FlatToml = std::map<std::string, TomlValue>;

/// Subset of TOML: `key = value` lines with strings, integers, floats, booleans and
/// one-line numeric arrays; comments with '#'. Tables are rejected. Throws ConfigError.
FlatToml parse_flat_toml(std::string_view text);

/// Applies the keys onto `base`. Unknown keys and wrong types throw ConfigError.
RunConfig apply_toml(const FlatToml& values, RunConfig base = {});
RunConfig load_run_config(const std::filesystem::path& path, RunConfig base = {});

/// Rounded cube, g = 0, beta = 1, BDF4, k = 2, T = 0.5, alpha in {0.1, 0.01, 0.001, 0}.
RunConfig mcf_demo_preset();
std::vector<double> mcf_demo_alphas();

std::shared_ptr<const mesh::SurfaceMesh> build_mesh(const RunConfig& cfg, int level);
laws::ProblemConfig build_problem(const RunConfig& cfg);

struct RunRecord {
  std::string name;
  laws::RunSummary summary;
  std::vector<double> times;
  std::vector<double> areas;
  std::vector<std::filesystem::path> files;
  std::optional<verify::ErrorNorms> position_error;  // manufactured runs
};

/// One run per level (and per alpha for mcf-demo), VTK series under output_dir and
/// summary.json next to them. Warnings go to `log`.
std::vector<RunRecord> cmd_run(const RunConfig& cfg, std::ostream& log);
nlohmann::json summary_json(const RunConfig& cfg, const std::vector<RunRecord>& records);

/// One table per level, written to output_dir/converge_time_level<L>.csv.
std::vector<verify::ConvergenceTable> cmd_converge_time(const RunConfig& cfg, int threads = 0);
/// One table per tau, written to output_dir/converge_space_tau<i>.csv.
std::vector<verify::ConvergenceTable> cmd_converge_space(const RunConfig& cfg, int threads = 0);

/// delta, gamma, eta and the zero-stability verdict. Throws ConfigError outside 1..7.
void cmd_coefficients(int p, std::ostream& out);

}  // namespace evolvefem::experiment
