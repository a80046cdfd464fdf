#include "evolvefem/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <ostream>
#include <sstream>

#include "evolvefem/output.hpp"

namespace evolvefem::experiment {

namespace fs = std::filesystem;

namespace {

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

// '#' outside a string starts a comment.
std::string strip_comment(const std::string& line) {
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    if (line[i] == '"') quoted = !quoted;
    if (line[i] == '#' && !quoted) return line.substr(0, i);
  }
  return line;
}

bool parse_number(const std::string& s, TomlValue& out) {
  std::string t;
  for (char c : s)
    if (c != '_') t.push_back(c);
  if (t.empty()) return false;
  const bool floating = t.find_first_of(".eE") != std::string::npos || t == "inf" || t == "nan";
  const char* first = t.data() + (t[0] == '+' ? 1 : 0);
  const char* last = t.data() + t.size();
  if (!floating) {
    long v = 0;
    auto [p, ec] = std::from_chars(first, last, v);
    if (ec == std::errc() && p == last) {
      out = v;
      return true;
    }
    return false;
  }
  double v = 0.0;
  auto [p, ec] = std::from_chars(first, last, v);
  if (ec == std::errc() && p == last) {
    out = v;
    return true;
  }
  return false;
}

TomlValue parse_value(const std::string& raw, int line_no) {
  const auto fail = [line_no](const std::string& what) {
    return ConfigError("config line " + std::to_string(line_no) + ": " + what);
  };
  if (raw.empty()) throw fail("missing value");
  if (raw.front() == '"') {
    if (raw.size() < 2 || raw.back() != '"') throw fail("unterminated string");
    const std::string body = raw.substr(1, raw.size() - 2);
    if (body.find_first_of("\"\\") != std::string::npos)
      throw fail("escapes are not supported in strings");
    return body;
  }
  if (raw == "true") return true;
  if (raw == "false") return false;
  if (raw.front() == '[') {
    if (raw.back() != ']') throw fail("arrays must close on the same line");
    std::vector<double> items;
    std::stringstream body(raw.substr(1, raw.size() - 2));
    std::string item;
    while (std::getline(body, item, ',')) {
      item = trim(item);
      if (item.empty()) continue;  // trailing comma
      TomlValue v;
      if (!parse_number(item, v)) throw fail("array items must be numbers: '" + item + "'");
      items.push_back(std::holds_alternative<long>(v) ? static_cast<double>(std::get<long>(v))
                                                      : std::get<double>(v));
    }
    return items;
  }
  TomlValue v;
  if (!parse_number(raw, v)) throw fail("cannot parse value '" + raw + "'");
  return v;
}

double as_double(const std::string& key, const TomlValue& v) {
  if (auto* d = std::get_if<double>(&v)) return *d;
  if (auto* l = std::get_if<long>(&v)) return static_cast<double>(*l);
  throw ConfigError("config key '" + key + "' must be a number");
}

int as_int(const std::string& key, const TomlValue& v) {
  if (auto* l = std::get_if<long>(&v)) return static_cast<int>(*l);
  throw ConfigError("config key '" + key + "' must be an integer");
}

bool as_bool(const std::string& key, const TomlValue& v) {
  if (auto* b = std::get_if<bool>(&v)) return *b;
  throw ConfigError("config key '" + key + "' must be true or false");
}

std::string as_string(const std::string& key, const TomlValue& v) {
  if (auto* s = std::get_if<std::string>(&v)) return *s;
  throw ConfigError("config key '" + key + "' must be a string");
}

std::vector<double> as_list(const std::string& key, const TomlValue& v) {
  if (auto* a = std::get_if<std::vector<double>>(&v)) return *a;
  return {as_double(key, v)};
}

std::string format_alpha(double a) {
  std::ostringstream s;
  s << a;
  return s.str();
}

}  // namespace

void RunConfig::validate() const {
  const bool demo = law == "mcf-demo";
  laws::ProblemConfig pc;
  if (!demo) pc.law = laws::parse_law(law);
  pc.order = order;
  pc.tau = tau;
  pc.end_time = end_time;
  pc.alpha = alpha;
  pc.beta = beta;
  pc.allow_zero_alpha = allow_zero_alpha || demo;
  pc.validate();
  laws::parse_start_mode(start);
  if (degree != 1 && degree != 2) throw ConfigError("degree must be 1 or 2");
  if (levels.empty()) throw ConfigError("at least one refinement level is required");
  for (int l : levels)
    if (l < 0 || l > 7) throw ConfigError("refinement levels must lie in 0..7");
  if (!(end_time > 0.0)) throw ConfigError("end_time must be positive");
  if (stride < 1) throw ConfigError("stride must be >= 1");
  if (tau_count < 1) throw ConfigError("tau_count must be >= 1");
  for (double t : taus)
    if (!(t > 0.0)) throw ConfigError("time steps must be positive");
  if (!(r0 > 0.0) || !(r1 >= r0)) throw ConfigError("need r1 >= r0 > 0");
  if (geometry != "sphere" && geometry != "rounded-cube")
    throw ConfigError("geometry must be 'sphere' or 'rounded-cube'");
  if (!(cube_half_width > 0.0)) throw ConfigError("cube_half_width must be positive");
  if (manufactured && geometry != "sphere" && !demo)
    throw ConfigError("the manufactured solution lives on the sphere");
}

std::vector<double> RunConfig::tau_list() const {
  if (!taus.empty()) return taus;
  std::vector<double> out;
  for (int i = 0; i < tau_count; ++i) out.push_back(0.1 * std::ldexp(1.0, -i));
  return out;
}

verify::ManufacturedSolution RunConfig::manufactured_solution() const {
  verify::ManufacturedSolution ms;
  ms.r0 = r0;
  ms.r1 = r1;
  ms.alpha = alpha;
  ms.beta = beta;
  return ms;
}

FlatToml parse_flat_toml(std::string_view text) {
  FlatToml out;
  std::istringstream in{std::string(text)};
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string s = trim(strip_comment(line));
    if (s.empty()) continue;
    if (s.front() == '[')
      throw ConfigError("config line " + std::to_string(line_no) + ": tables are not supported");
    const auto eq = s.find('=');
    if (eq == std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(s.substr(0, eq));
    if (key.empty() || key.find_first_not_of("abcdefghijklmnopqrstuvwxyz0123456789_-") !=
                           std::string::npos)
      throw ConfigError("config line " + std::to_string(line_no) + ": bad key '" + key + "'");
    if (out.count(key))
      throw ConfigError("config line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    out[key] = parse_value(trim(s.substr(eq + 1)), line_no);
  }
  return out;
}

RunConfig apply_toml(const FlatToml& values, RunConfig c) {
  for (const auto& [k, v] : values) {
    if (k == "law") c.law = as_string(k, v);
    else if (k == "order") c.order = as_int(k, v);
    else if (k == "degree") c.degree = as_int(k, v);
    else if (k == "tau") c.tau = as_double(k, v);
    else if (k == "end_time") c.end_time = as_double(k, v);
    else if (k == "alpha") c.alpha = as_double(k, v);
    else if (k == "beta") c.beta = as_double(k, v);
    else if (k == "levels" || k == "level") {
      c.levels.clear();
      for (double l : as_list(k, v)) {
        if (l != std::floor(l)) throw ConfigError("levels must be integers");
        c.levels.push_back(static_cast<int>(l));
      }
    } else if (k == "taus") c.taus = as_list(k, v);
    else if (k == "tau_count") c.tau_count = as_int(k, v);
    else if (k == "manufactured") c.manufactured = as_bool(k, v);
    else if (k == "r0") c.r0 = as_double(k, v);
    else if (k == "r1") c.r1 = as_double(k, v);
    else if (k == "start") c.start = as_string(k, v);
    else if (k == "geometry") c.geometry = as_string(k, v);
    else if (k == "cube_half_width") c.cube_half_width = as_double(k, v);
    else if (k == "output_dir") c.output_dir = as_string(k, v);
    else if (k == "stride") c.stride = as_int(k, v);
    else if (k == "allow_zero_alpha") c.allow_zero_alpha = as_bool(k, v);
    else if (k == "write_vtk") c.write_vtk = as_bool(k, v);
    else throw ConfigError("unknown config key '" + k + "'");
  }
  return c;
}

RunConfig load_run_config(const fs::path& path, RunConfig base) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config '" + path.string() + "'");
  std::stringstream ss;
  ss << in.rdbuf();
  return apply_toml(parse_flat_toml(ss.str()), std::move(base));
}

RunConfig mcf_demo_preset() {
  RunConfig c;
  c.law = "mcf-demo";
  c.order = 4;
  c.degree = 2;
  c.tau = 0.01;
  c.end_time = 0.5;
  c.alpha = 0.1;
  c.beta = 1.0;
  c.levels = {3};
  c.manufactured = false;
  c.start = "bootstrap";
  c.geometry = "rounded-cube";
  c.cube_half_width = 2.0;
  c.output_dir = "mcf_demo";
  c.stride = 10;
  c.allow_zero_alpha = true;
  return c;
}

std::vector<double> mcf_demo_alphas() { return {0.1, 0.01, 0.001, 0.0}; }

std::shared_ptr<const mesh::SurfaceMesh> build_mesh(const RunConfig& cfg, int level) {
  if (cfg.geometry == "rounded-cube" && !cfg.manufactured) {
    const double hw = cfg.cube_half_width;
    const mesh::SurfaceMesh base = mesh::scaled(mesh::generate_sphere_mesh(level, cfg.degree), hw);
    return std::make_shared<const mesh::SurfaceMesh>(
        mesh::generate_implicit_mesh(mesh::rounded_cube_level_set(hw, 4), base));
  }
  const double r = cfg.manufactured ? cfg.r0 : 1.0;
  return std::make_shared<const mesh::SurfaceMesh>(
      mesh::scaled(mesh::generate_sphere_mesh(level, cfg.degree), r));
}

laws::ProblemConfig build_problem(const RunConfig& cfg) {
  const laws::Law law = cfg.law == "mcf-demo" ? laws::Law::Regularized : laws::parse_law(cfg.law);
  laws::ProblemConfig pc;
  if (cfg.manufactured) {
    pc = cfg.manufactured_solution().problem(law, cfg.order, cfg.tau, cfg.end_time);
  } else {
    pc.law = law;
    pc.order = cfg.order;
    pc.tau = cfg.tau;
    pc.end_time = cfg.end_time;
    pc.alpha = cfg.alpha;
    pc.beta = cfg.beta;
    if (law == laws::Law::Coupled)
      pc.initial_u = [](const Vec3& x) { return 1.0 + 0.5 * x.z() / x.norm(); };
  }
  pc.allow_zero_alpha = cfg.allow_zero_alpha || cfg.law == "mcf-demo";
  pc.validate();
  return pc;
}

std::vector<RunRecord> cmd_run(const RunConfig& cfg, std::ostream& log) {
  cfg.validate();
  const bool demo = cfg.law == "mcf-demo";
  const std::vector<double> alphas = demo ? mcf_demo_alphas() : std::vector<double>{cfg.alpha};

  std::vector<RunRecord> records;
  for (int level : cfg.levels) {
    const auto mesh = build_mesh(cfg, level);
    const fem::Assembler assembler(mesh);
    for (double alpha : alphas) {
      RunConfig c = cfg;
      c.alpha = alpha;
      const laws::ProblemConfig problem = build_problem(c);
      if (problem.tau * (problem.order - 1) > problem.end_time || problem.tau > problem.end_time)
        log << "warning: tau = " << problem.tau << " exceeds the time span; only the starting"
            << " phase is computed\n";

      RunRecord rec;
      rec.name = "level" + std::to_string(level);
      if (demo) rec.name = "alpha_" + format_alpha(alpha);
      else if (cfg.levels.size() == 1) rec.name = "run";

      std::vector<laws::Observer> observers;
      observers.push_back([&](const laws::Observation& o) {
        rec.times.push_back(o.time);
        rec.areas.push_back(verify::surface_area(assembler, o.positions));
      });
      std::optional<io::VtkSeries> series;
      if (cfg.write_vtk) {
        series.emplace(fs::path(cfg.output_dir) / rec.name, mesh);
        observers.push_back(series->observer());
      }

      laws::RunOptions opts;
      opts.stride = cfg.stride;
      opts.start = laws::parse_start_mode(cfg.start);
      std::optional<laws::ExactFlow> flow;
      if (cfg.manufactured) {
        flow = cfg.manufactured_solution().flow(mesh);
        opts.exact = &*flow;
      } else if (opts.start == laws::StartMode::Exact) {
        log << "warning: no exact solution available; using bootstrap starting values\n";
        opts.start = laws::StartMode::Bootstrap;
      }

      rec.summary = laws::run(problem, mesh, observers, opts);
      if (series) rec.files = series->files();
      if (cfg.manufactured) {
        const NodalVector xs = cfg.manufactured_solution().positions(*mesh, rec.summary.final_state.time);
        rec.position_error =
            verify::error_norms(rec.summary.final_state.positions(), xs, assembler);
      }
      records.push_back(std::move(rec));
    }
  }

  std::error_code ec;
  fs::create_directories(cfg.output_dir, ec);
  if (ec) throw IoError("cannot create '" + cfg.output_dir + "': " + ec.message());
  const fs::path summary_path = fs::path(cfg.output_dir) / "summary.json";
  std::ofstream out(summary_path);
  if (!out) throw IoError("cannot write '" + summary_path.string() + "'");
  out << summary_json(cfg, records).dump(2) << '\n';
  return records;
}

nlohmann::json summary_json(const RunConfig& cfg, const std::vector<RunRecord>& records) {
  nlohmann::json j;
  j["law"] = cfg.law;
  j["order"] = cfg.order;
  j["degree"] = cfg.degree;
  j["tau"] = cfg.tau;
  j["end_time"] = cfg.end_time;
  j["beta"] = cfg.beta;
  j["start"] = cfg.start;
  j["manufactured"] = cfg.manufactured;
  j["runs"] = nlohmann::json::array();
  for (const auto& r : records) {
    nlohmann::json run;
    run["name"] = r.name;
    run["final_time"] = r.summary.final_state.time;
    run["steps"] = r.summary.steps;
    run["start_only"] = r.summary.start_only;
    run["times"] = r.times;
    run["areas"] = r.areas;
    run["vtk_files"] = r.files.size();
    run["solver"] = {{"total_iterations", r.summary.total_iterations},
                     {"max_iterations", r.summary.max_iterations},
                     {"max_residual", r.summary.max_residual}};
    if (r.position_error)
      run["position_error"] = {{"L2", r.position_error->l2}, {"H1", r.position_error->h1}};
    j["runs"].push_back(std::move(run));
  }
  return j;
}

namespace {

verify::StudyConfig study_config(const RunConfig& cfg) {
  if (!cfg.manufactured) throw ConfigError("convergence studies need the manufactured solution");
  if (cfg.law == "mcf-demo") throw ConfigError("convergence studies need a law, not a demo");
  verify::StudyConfig s;
  s.law = laws::parse_law(cfg.law);
  s.order = cfg.order;
  s.degree = cfg.degree;
  s.end_time = cfg.end_time;
  s.start = laws::parse_start_mode(cfg.start);
  s.ms = cfg.manufactured_solution();
  return s;
}

void write_table(const fs::path& path, const verify::ConvergenceTable& t) {
  std::error_code ec;
  fs::create_directories(path.parent_path(), ec);
  if (ec) throw IoError("cannot create '" + path.parent_path().string() + "': " + ec.message());
  std::ofstream out(path);
  if (!out) throw IoError("cannot write '" + path.string() + "'");
  t.write_csv(out);
}

}  // namespace

std::vector<verify::ConvergenceTable> cmd_converge_time(const RunConfig& cfg, int threads) {
  cfg.validate();
  const verify::StudyConfig s = study_config(cfg);
  std::vector<double> taus = cfg.tau_list();
  std::sort(taus.rbegin(), taus.rend());
  std::vector<verify::ConvergenceTable> tables;
  for (int level : cfg.levels) {
    const auto runs = verify::time_sweep(s, level, taus, threads);
    tables.push_back(verify::table_in_tau(runs, verify::Quantity::Position));
    write_table(fs::path(cfg.output_dir) / ("converge_time_level" + std::to_string(level) + ".csv"),
                tables.back());
  }
  return tables;
}

std::vector<verify::ConvergenceTable> cmd_converge_space(const RunConfig& cfg, int threads) {
  cfg.validate();
  const verify::StudyConfig s = study_config(cfg);
  std::vector<int> levels = cfg.levels;
  std::sort(levels.begin(), levels.end());
  std::vector<verify::ConvergenceTable> tables;
  const std::vector<double> taus = cfg.taus.empty() ? std::vector<double>{cfg.tau} : cfg.taus;
  for (std::size_t i = 0; i < taus.size(); ++i) {
    const auto runs = verify::space_sweep(s, levels, taus[i], threads);
    tables.push_back(verify::table_in_h(runs, verify::Quantity::Position));
    write_table(fs::path(cfg.output_dir) / ("converge_space_tau" + std::to_string(i) + ".csv"),
                tables.back());
  }
  return tables;
}

void cmd_coefficients(int p, std::ostream& out) {
  if (p < 1 || p > 7) throw ConfigError("coefficients: p must lie in 1..7");
  const auto print = [&out](const char* name, const std::vector<bdf::Rational>& c) {
    out << name << ":";
    for (const auto& r : c) {
      out << ' ' << r.num;
      if (r.den != 1) out << '/' << r.den;
    }
    out << "  (";
    for (std::size_t i = 0; i < c.size(); ++i) out << (i ? ", " : "") << c[i].to_double();
    out << ")\n";
  };
  out << "BDF" << p << '\n';
  print("delta", bdf::delta_rational(p));
  print("gamma", bdf::gamma_rational(p));
  const auto eta = p <= 6 ? bdf::nevanlinna_odeh_eta(p) : std::nullopt;
  if (eta) out << "eta: " << std::fixed << std::setprecision(4) << *eta << std::defaultfloat << '\n';
  else out << "eta: none\n";
  out << (bdf::zero_stability_check(p) ? "zero-stable" : "not zero-stable") << '\n';
}

}  // namespace evolvefem::experiment
