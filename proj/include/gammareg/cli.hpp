#pragma once

// Command-line front end: CSV ingestion, key=value configuration, and the
// fit / cv / simulate / bench / divcheck commands. run() is callable
// in-process so tests can drive it without spawning a process.

#include <CLI11.hpp>

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "gammareg/baselines.hpp"
#include "gammareg/divergence_lab.hpp"
#include "gammareg/errors.hpp"
#include "gammareg/selection.hpp"
#include "gammareg/simulation.hpp"
#include "gammareg/solver.hpp"
#include "gammareg/trimmed_start.hpp"

namespace gammareg::cli {

enum ExitCode : int { kOk = 0, kCheckFailed = 1, kInputError = 2, kNumericalFailure = 3, kConfigError = 4 };

// ---------------------------------------------------------------------------
// CSV

struct CsvTable {
  std::vector<std::string> header;
  std::vector<std::vector<double>> rows;
};

inline std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

inline std::vector<std::string> split_commas(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto pos = line.find(',', start);
    out.push_back(trim(std::string_view(line).substr(start, pos == std::string::npos ? std::string::npos : pos - start)));
    if (pos == std::string::npos) break;
    start = pos + 1;
  }
  return out;
}

inline std::optional<double> parse_double(const std::string& s) {
  if (s.empty()) return std::nullopt;
  const char* b = s.data();
  const char* e = s.data() + s.size();
  if (*b == '+') ++b;
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(b, e, v);
  if (ec != std::errc() || ptr != e) return std::nullopt;
  return v;
}

/// Rows are numbered from 1 after the header, columns by header name.
inline CsvTable read_csv(std::istream& in, const std::string& source = "input") {
  CsvTable t;
  std::string line;
  if (!std::getline(in, line)) throw InputError(source + ": empty file (header row required)");
  if (line.size() >= 3 && line.compare(0, 3, "\xEF\xBB\xBF") == 0) line.erase(0, 3);
  t.header = split_commas(line);
  for (const auto& h : t.header)
    if (h.empty()) throw InputError(source + ": empty column name in header");
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (trim(line).empty()) continue;
    ++row;
    const auto cells = split_commas(line);
    if (cells.size() != t.header.size())
      throw InputError(source + ": row " + std::to_string(row) + " has " + std::to_string(cells.size()) +
                       " cells, header has " + std::to_string(t.header.size()));
    std::vector<double> vals(cells.size());
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const auto v = parse_double(cells[c]);
      if (!v || !std::isfinite(*v))
        throw InputError(source + ": row " + std::to_string(row) + ", column '" + t.header[c] +
                         "': not a finite number: '" + cells[c] + "'");
      vals[c] = *v;
    }
    t.rows.push_back(std::move(vals));
  }
  if (t.rows.empty()) throw InputError(source + ": no data rows");
  return t;
}

inline CsvTable read_csv_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  return read_csv(in, path);
}

inline std::string format_double(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct LabeledDataset {
  Dataset data;
  std::vector<std::string> predictors;
};

inline LabeledDataset to_dataset(const CsvTable& t, const std::string& response) {
  const auto it = std::find(t.header.begin(), t.header.end(), response);
  if (it == t.header.end()) throw InputError("response column '" + response + "' not found in header");
  const auto ry = static_cast<std::size_t>(it - t.header.begin());
  LabeledDataset out;
  for (std::size_t c = 0; c < t.header.size(); ++c)
    if (c != ry) out.predictors.push_back(t.header[c]);
  if (out.predictors.empty()) throw InputError("no predictor columns besides '" + response + "'");
  const auto n = static_cast<Eigen::Index>(t.rows.size());
  out.data.y.resize(n);
  out.data.x.resize(n, static_cast<Eigen::Index>(out.predictors.size()));
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto& r = t.rows[static_cast<std::size_t>(i)];
    Eigen::Index j = 0;
    for (std::size_t c = 0; c < r.size(); ++c) {
      if (c == ry)
        out.data.y(i) = r[c];
      else
        out.data.x(i, j++) = r[c];
    }
  }
  if (n < 2) throw InputError("at least 2 data rows are required");
  return out;
}

inline void write_dataset_csv(const std::string& path, const Dataset& d) {
  std::ofstream f(path);
  if (!f) throw InputError("cannot write '" + path + "'");
  for (Eigen::Index j = 0; j < d.p(); ++j) f << 'x' << (j + 1) << ',';
  f << "y\n";
  for (Eigen::Index i = 0; i < d.n(); ++i) {
    for (Eigen::Index j = 0; j < d.p(); ++j) f << format_double(d.x(i, j)) << ',';
    f << format_double(d.y(i)) << '\n';
  }
}

// ---------------------------------------------------------------------------
// Configuration

struct RunConfig {
  std::string input;
  std::string output = "gammareg_out";
  std::string response = "y";
  double gamma = 0.1;
  double gamma0 = 0.5;
  double lambda = 0.0;
  std::string select = "fixed";
  int folds = 10;
  bool loo = false;
  int grid_size = 50;
  double grid_floor = 0.05;
  std::string anchor = "escape";
  bool warm = false;
  std::string init = "trimmed";
  int ransac_trials = 200;
  bool standardize = false;
  int max_mm_iters = 500;
  double tol_loss = 1e-7;
  double tol_param = 1e-8;
  double kkt_tol = 1e-5;
  std::uint64_t seed = 0;
  long n = 100;
  long p = 100;
  double rho = 0.2;
  double eps = 0.1;
  std::string pattern = "a";
  double noise_sd = 0.5;
  int replications = 20;
  std::string methods = "gamma,lasso";
  double tol_scale = 1.0;
  int random_models = 12;
};

struct ConfigKey {
  std::string name;
  std::string help;
  bool flag = false;
  std::function<void(RunConfig&, const std::string&)> set;
  std::function<std::string(const RunConfig&)> get;
};

namespace detail {

template <typename T>
T parse_value(const std::string& key, const std::string& v) {
  if constexpr (std::is_same_v<T, std::string>) {
    return v;
  } else if constexpr (std::is_same_v<T, bool>) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError(key + ": expected a boolean, got '" + v + "'");
  } else if constexpr (std::is_floating_point_v<T>) {
    const auto d = parse_double(v);
    if (!d) throw ConfigError(key + ": expected a number, got '" + v + "'");
    return *d;
  } else {
    T out{};
    const auto [ptr, ec] = std::from_chars(v.data(), v.data() + v.size(), out);
    if (ec != std::errc() || ptr != v.data() + v.size())
      throw ConfigError(key + ": expected an integer, got '" + v + "'");
    return out;
  }
}

template <typename T>
std::string show_value(const T& v) {
  if constexpr (std::is_same_v<T, std::string>)
    return v;
  else if constexpr (std::is_same_v<T, bool>)
    return v ? "true" : "false";
  else if constexpr (std::is_floating_point_v<T>)
    return format_double(v);
  else
    return std::to_string(v);
}

template <typename T>
ConfigKey key(std::string name, std::string help, T RunConfig::*field) {
  ConfigKey k;
  k.name = name;
  k.help = std::move(help);
  k.flag = std::is_same_v<T, bool>;
  k.set = [field, name](RunConfig& c, const std::string& v) { c.*field = parse_value<T>(name, v); };
  k.get = [field](const RunConfig& c) { return show_value(c.*field); };
  return k;
}

}  // namespace detail

inline const std::vector<ConfigKey>& config_keys() {
  using detail::key;
  static const std::vector<ConfigKey> keys{
      key("input", "input CSV (fit, cv)", &RunConfig::input),
      key("output", "output directory", &RunConfig::output),
      key("response", "response column name", &RunConfig::response),
      key("gamma", "density power gamma of the loss", &RunConfig::gamma),
      key("gamma0", "density power of the RoCV score", &RunConfig::gamma0),
      key("lambda", "L1 penalty for --select fixed", &RunConfig::lambda),
      key("select", "fixed or rocv", &RunConfig::select),
      key("folds", "cross-validation folds", &RunConfig::folds),
      key("loo", "leave-one-out cross-validation", &RunConfig::loo),
      key("grid_size", "lambda grid size", &RunConfig::grid_size),
      key("grid_floor", "smallest grid lambda as a fraction of lambda0", &RunConfig::grid_floor),
      key("anchor", "lambda0 rule: escape or null", &RunConfig::anchor),
      key("warm", "warm starts along the lambda path", &RunConfig::warm),
      key("init", "ransac, zero or trimmed", &RunConfig::init),
      key("ransac_trials", "RANSAC subsets", &RunConfig::ransac_trials),
      key("standardize", "fit on standardized columns", &RunConfig::standardize),
      key("max_mm_iters", "MM iteration cap", &RunConfig::max_mm_iters),
      key("tol_loss", "loss change tolerance", &RunConfig::tol_loss),
      key("tol_param", "parameter change tolerance", &RunConfig::tol_param),
      key("kkt_tol", "KKT slack required for convergence", &RunConfig::kkt_tol),
      key("seed", "random seed", &RunConfig::seed),
      key("n", "simulated rows", &RunConfig::n),
      key("p", "simulated predictors", &RunConfig::p),
      key("rho", "predictor correlation", &RunConfig::rho),
      key("eps", "outlier ratio", &RunConfig::eps),
      key("pattern", "outlier pattern: a, b or none", &RunConfig::pattern),
      key("noise_sd", "noise standard deviation", &RunConfig::noise_sd),
      key("replications", "bench replications", &RunConfig::replications),
      key("methods", "comma list of gamma, lasso", &RunConfig::methods),
      key("tol_scale", "divcheck tolerance multiplier", &RunConfig::tol_scale),
      key("random_models", "divcheck random models", &RunConfig::random_models),
  };
  return keys;
}

inline const ConfigKey& find_key(const std::string& name) {
  for (const auto& k : config_keys())
    if (k.name == name) return k;
  throw ConfigError("unknown configuration key '" + name + "'");
}

/// Flat key = value lines; '#' starts a comment. Keys named "command" or
/// starting with "result." are manifest output and are skipped.
inline std::map<std::string, std::string> read_config(std::istream& in, const std::string& source = "config") {
  std::map<std::string, std::string> out;
  std::string line;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ConfigError(source + ":" + std::to_string(lineno) + ": expected key = value");
    const std::string k = trim(std::string_view(line).substr(0, eq));
    const std::string v = trim(std::string_view(line).substr(eq + 1));
    if (k == "command" || k.rfind("result.", 0) == 0) continue;
    find_key(k);
    out[k] = v;
  }
  return out;
}

struct ResolvedConfig {
  RunConfig values;
  /// Keys set by the config file or the command line.
  std::set<std::string> explicit_keys;

  bool is_explicit(const std::string& k) const { return explicit_keys.count(k) > 0; }
};

inline FitConfig fit_config(const RunConfig& c) {
  FitConfig f;
  f.gamma = c.gamma;
  f.lambda = c.lambda;
  f.max_mm_iters = c.max_mm_iters;
  f.tol_loss = c.tol_loss;
  f.tol_param = c.tol_param;
  f.kkt_tol = c.kkt_tol;
  f.standardize = c.standardize;
  return f;
}

inline CvConfig cv_config(const RunConfig& c) {
  CvConfig cv;
  cv.gamma0 = c.gamma0;
  cv.folds = c.folds;
  cv.leave_one_out = c.loo;
  cv.grid_size = c.grid_size;
  cv.grid_floor_ratio = c.grid_floor;
  cv.warm_start = c.warm;
  if (c.anchor == "escape")
    cv.anchor = LambdaAnchor::init_escape;
  else if (c.anchor == "null")
    cv.anchor = LambdaAnchor::null_model;
  else
    throw ConfigError("anchor must be escape or null, got '" + c.anchor + "'");
  cv.seed = c.seed;
  cv.fit = fit_config(c);
  return cv;
}

inline SimulationSpec simulation_spec(const RunConfig& c) {
  SimulationSpec s;
  s.n = c.n;
  s.p = c.p;
  s.rho = c.rho;
  s.epsilon = c.eps;
  s.pattern = parse_pattern(c.pattern);
  s.noise_sd = c.noise_sd;
  s.seed = c.seed;
  s.validate();
  return s;
}

inline void check_select(const RunConfig& c) {
  if (c.select != "fixed" && c.select != "rocv")
    throw ConfigError("select must be fixed or rocv, got '" + c.select + "'");
}

// ---------------------------------------------------------------------------
// Manifest

class Manifest {
 public:
  explicit Manifest(std::string command) : command_(std::move(command)) {}

  void set(const std::string& k, const std::string& v) { result_["result." + k] = v; }
  void set(const std::string& k, double v) { set(k, format_double(v)); }
  void set(const std::string& k, long v) { set(k, std::to_string(v)); }
  void set(const std::string& k, int v) { set(k, std::to_string(v)); }
  void set(const std::string& k, bool v) { set(k, std::string(v ? "true" : "false")); }

  void write(std::ostream& out, const RunConfig& cfg) const {
    out << "# gammareg run manifest\n";
    out << "command = " << command_ << '\n';
    for (const auto& k : config_keys()) out << k.name << " = " << k.get(cfg) << '\n';
    for (const auto& [k, v] : result_) out << k << " = " << v << '\n';
  }

  void save(const std::string& path, const RunConfig& cfg) const {
    std::ofstream f(path);
    if (!f) throw InputError("cannot write '" + path + "'");
    write(f, cfg);
  }

 private:
  std::string command_;
  std::map<std::string, std::string> result_;
};

inline std::string join_doubles(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += format_double(v[i]);
  }
  return s;
}

inline std::filesystem::path ensure_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw InputError("cannot create output directory '" + dir + "': " + ec.message());
  return std::filesystem::path(dir);
}

inline void write_coefficients(const std::string& path, const ModelParams& params,
                               const std::vector<std::string>& names) {
  std::ofstream f(path);
  if (!f) throw InputError("cannot write '" + path + "'");
  f << "name,value,nonzero\n";
  f << "(intercept)," << format_double(params.beta0) << ",1\n";
  for (Eigen::Index j = 0; j < params.beta.size(); ++j)
    f << names[static_cast<std::size_t>(j)] << ',' << format_double(params.beta(j)) << ','
      << (params.beta(j) != 0.0 ? 1 : 0) << '\n';
}

// ---------------------------------------------------------------------------
// Commands

struct FitOutcome {
  FitResult fit;
  std::optional<CvReport> cv;
  Initialization init;
};

/// The in-memory pipeline behind `fit` and `cv`.
inline FitOutcome fit_pipeline(const Dataset& data, const RunConfig& c, bool rocv) {
  FitOutcome out;
  out.init = make_start(parse_init(c.init), data, c.seed, c.ransac_trials);
  if (rocv) {
    CvReport rep = cross_validate(data, c.gamma, cv_config(c), out.init.params);
    out.fit = rep.final_fit;
    out.cv = std::move(rep);
  } else {
    out.fit = fit(data, fit_config(c), out.init.params);
  }
  return out;
}

inline int cmd_fit(const ResolvedConfig& rc, bool force_rocv, std::ostream& out) {
  RunConfig c = rc.values;
  check_select(c);
  const bool rocv = force_rocv || c.select == "rocv";
  if (rocv) c.select = "rocv";
  fit_config(c).validate();
  if (rocv) cv_config(c);
  parse_init(c.init);
  if (c.input.empty()) throw InputError("--input is required");
  const auto t0 = std::chrono::steady_clock::now();
  const LabeledDataset ld = to_dataset(read_csv_file(c.input), c.response);
  try {
    ld.data.validate();
  } catch (const DomainError& e) {
    throw InputError(e.what());
  }

  const FitOutcome res = fit_pipeline(ld.data, c, rocv);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const auto dir = ensure_dir(c.output);
  write_coefficients((dir / "coefficients.csv").string(), res.fit.params, ld.predictors);
  Manifest m(rocv ? "cv" : "fit");
  m.set("n", static_cast<long>(ld.data.n()));
  m.set("p", static_cast<long>(ld.data.p()));
  m.set("init_degenerate", res.init.degenerate);
  m.set("beta0", res.fit.params.beta0);
  m.set("sigma2", res.fit.params.sigma2);
  m.set("active", static_cast<long>(res.fit.active_set.size()));
  m.set("mm_iterations", res.fit.mm_iterations);
  m.set("converged", res.fit.converged);
  m.set("degenerate", res.fit.degenerate);
  m.set("kkt_slack", res.fit.kkt_violation);
  m.set("loss_trajectory", join_doubles(res.fit.loss_trajectory));
  m.set("wall_seconds", wall);
  if (res.cv) {
    const CvReport& cv = *res.cv;
    m.set("lambda0", cv.lambda0);
    m.set("selected_lambda", cv.best_lambda);
    std::ofstream f(dir / "cv_path.csv");
    f << "lambda,rocv,full_fit_ok\n";
    for (std::size_t k = 0; k < cv.lambda_grid.size(); ++k)
      f << format_double(cv.lambda_grid[k]) << ',' << format_double(cv.rocv_values[k]) << ','
        << (cv.path[k] ? 1 : 0) << '\n';
  }
  m.save((dir / "manifest.txt").string(), c);

  out << "active " << res.fit.active_set.size() << " of " << ld.data.p() << ", sigma2 "
      << format_double(res.fit.params.sigma2);
  if (res.cv) out << ", lambda " << format_double(res.cv->best_lambda);
  out << ", converged " << (res.fit.converged ? "yes" : "no") << ", kkt " << res.fit.kkt_violation << '\n';
  out << "wrote " << (dir / "coefficients.csv").string() << '\n';
  if (res.fit.degenerate) return kNumericalFailure;
  return kOk;
}

inline int cmd_simulate(const ResolvedConfig& rc, std::ostream& out) {
  const RunConfig& c = rc.values;
  const SimulationSpec spec = simulation_spec(c);
  const SimulatedData sim = generate(spec);
  const auto dir = ensure_dir(c.output);
  write_dataset_csv((dir / "train.csv").string(), sim.train);
  write_dataset_csv((dir / "test.csv").string(), sim.test);
  {
    std::ofstream f(dir / "truth.csv");
    f << "name,value\n";
    const Vector& b = *sim.train.true_beta;
    f << "(intercept)," << format_double(b(0)) << '\n';
    for (Eigen::Index j = 1; j < b.size(); ++j) f << 'x' << j << ',' << format_double(b(j)) << '\n';
  }
  {
    std::ofstream f(dir / "contaminated.csv");
    f << "row\n";
    for (auto r : sim.contaminated_rows) f << r << '\n';
  }
  Manifest m("simulate");
  m.set("contaminated_rows", static_cast<long>(sim.contaminated_rows.size()));
  m.save((dir / "manifest.txt").string(), c);
  out << "wrote " << sim.train.n() << " train rows (" << sim.contaminated_rows.size() << " contaminated) and "
      << sim.test.n() << " test rows to " << dir.string() << '\n';
  return kOk;
}

inline std::vector<MethodSpec> parse_methods(const RunConfig& c) {
  std::vector<MethodSpec> out;
  const CvConfig cv = cv_config(c);
  for (const auto& name : split_commas(c.methods)) {
    if (name == "gamma") {
      MethodSpec m = gamma_method(c.gamma, cv);
      m.init = parse_init(c.init);
      m.ransac_trials = c.ransac_trials;
      out.push_back(m);
    } else if (name == "lasso") {
      out.push_back(lasso_method(cv));
    } else {
      throw ConfigError("unknown method '" + name + "' (expected gamma or lasso)");
    }
  }
  if (out.empty()) throw ConfigError("no methods given");
  return out;
}

inline int cmd_bench(const ResolvedConfig& rc, std::ostream& out) {
  const RunConfig& c = rc.values;
  if (c.replications < 1) throw ConfigError("replications must be >= 1");
  const SimulationSpec spec = simulation_spec(c);
  const auto methods = parse_methods(c);
  const auto t0 = std::chrono::steady_clock::now();
  const ExperimentTable table = run_experiment(spec, methods, c.replications, c.seed);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();

  const auto dir = ensure_dir(c.output);
  std::ofstream f(dir / "bench.csv");
  f << "method,RMSPE,MSE,TPR,TNR,successes,failures\n";
  std::ofstream g(dir / "replications.csv");
  g << "method,replication,ok,RMSPE,MSE,TPR,TNR,lambda,error\n";
  char line[256];
  out << "method          RMSPE       MSE     TPR     TNR  ok/fail\n";
  for (const auto& ms : table.methods) {
    f << ms.name << ',' << format_double(ms.rmspe) << ',' << format_double(ms.mse) << ',' << format_double(ms.tpr)
      << ',' << format_double(ms.tnr) << ',' << ms.successes << ',' << ms.failures << '\n';
    std::snprintf(line, sizeof line, "%-12s %8.4f %9.3g %7.3f %7.3f  %d/%d\n", ms.name.c_str(), ms.rmspe, ms.mse,
                  ms.tpr, ms.tnr, ms.successes, ms.failures);
    out << line;
    for (std::size_t r = 0; r < ms.replications.size(); ++r) {
      const auto& s = ms.replications[r];
      std::string err = s.error;
      std::replace(err.begin(), err.end(), ',', ';');
      g << ms.name << ',' << r << ',' << (s.ok ? 1 : 0) << ',' << format_double(s.rmspe) << ','
        << format_double(s.mse) << ',' << format_double(s.tpr) << ',' << format_double(s.tnr) << ','
        << format_double(s.lambda) << ',' << err << '\n';
    }
  }
  Manifest m("bench");
  m.set("wall_seconds", wall);
  for (const auto& ms : table.methods) m.set(ms.name + ".failures", ms.failures);
  m.save((dir / "manifest.txt").string(), c);
  return kOk;
}

inline int cmd_divcheck(const ResolvedConfig& rc, std::ostream& out) {
  const RunConfig& c = rc.values;
  lab::SuiteConfig sc;
  if (rc.is_explicit("gamma")) sc.gammas = {c.gamma};
  if (rc.is_explicit("eps")) sc.epsilons = {c.eps};
  sc.tolerance_scale = c.tol_scale;
  sc.random_models = c.random_models;
  if (rc.is_explicit("seed")) sc.seed = c.seed;
  sc.validate();
  bool all = true;
  for (const auto& rep : lab::all_suites(sc)) {
    for (const auto& ch : rep.checks) {
      out << (ch.pass ? "PASS " : "FAIL ") << rep.suite << ": " << ch.name << " = " << ch.value << " (limit "
          << ch.limit << ")\n";
    }
    all = all && rep.pass();
  }
  out << (all ? "all checks passed\n" : "some checks failed\n");
  return all ? kOk : kCheckFailed;
}

// ---------------------------------------------------------------------------
// Entry point

/// args excludes the program name.
inline int run(std::vector<std::string> args, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Sparse gamma-divergence linear regression"};
  app.require_subcommand(1);
  std::map<std::string, std::string> cli_values;
  std::set<std::string> cli_flags;
  std::string config_path;

  const std::vector<std::pair<std::string, std::string>> commands{
      {"fit", "fit one model to a CSV file"},
      {"cv", "fit with robust cross-validation over the lambda grid"},
      {"simulate", "write a simulated train/test pair"},
      {"bench", "replicated simulation benchmark"},
      {"divcheck", "numerical checks of the divergence theory"}};
  for (const auto& [name, desc] : commands) {
    CLI::App* sub = app.add_subcommand(name, desc);
    sub->add_option("--config", config_path, "key = value configuration file");
    for (const auto& k : config_keys()) {
      if (k.flag) {
        sub->add_flag_callback("--" + k.name, [&cli_flags, n = k.name] { cli_flags.insert(n); }, k.help);
      } else {
        sub->add_option_function<std::string>(
            "--" + k.name, [&cli_values, n = k.name](const std::string& v) { cli_values[n] = v; }, k.help);
      }
    }
  }

  std::reverse(args.begin(), args.end());
  try {
    app.parse(args);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kOk;
  } catch (const CLI::ParseError& e) {
    if (!app.get_subcommands().empty() && e.get_exit_code() == 0) {
      out << app.get_subcommands().front()->help();
      return kOk;
    }
    err << "error: " << e.what() << '\n';
    return kConfigError;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  try {
    ResolvedConfig rc;
    if (!config_path.empty()) {
      std::ifstream f(config_path);
      if (!f) throw ConfigError("cannot open config file '" + config_path + "'");
      for (const auto& [k, v] : read_config(f, config_path)) {
        find_key(k).set(rc.values, v);
        rc.explicit_keys.insert(k);
      }
    }
    for (const auto& [k, v] : cli_values) {
      find_key(k).set(rc.values, v);
      rc.explicit_keys.insert(k);
    }
    for (const auto& k : cli_flags) {
      find_key(k).set(rc.values, "true");
      rc.explicit_keys.insert(k);
    }

    if (command == "fit") return cmd_fit(rc, false, out);
    if (command == "cv") return cmd_fit(rc, true, out);
    if (command == "simulate") return cmd_simulate(rc, out);
    if (command == "bench") return cmd_bench(rc, out);
    return cmd_divcheck(rc, out);
  } catch (const InputError& e) {
    err << "input error: " << e.what() << '\n';
    return kInputError;
  } catch (const ConfigError& e) {
    err << "config error: " << e.what() << '\n';
    return kConfigError;
  } catch (const DegenerateFitError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kNumericalFailure;
  } catch (const DomainError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return kNumericalFailure;
  }
}

inline int run(int argc, char** argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  return run(std::vector<std::string>(argv + 1, argv + argc), out, err);
}

}  // namespace gammareg::cli
