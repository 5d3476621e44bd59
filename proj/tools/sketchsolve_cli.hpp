#pragma once

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "sketchsolve/sketchsolve.hpp"

namespace sketchsolve::cli {

using Json = nlohmann::ordered_json;

/// Bad flags or flag combinations; maps to exit code 1.
class UsageError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// JSON Schema of the `solve` sidecar file.
inline constexpr const char* kSolveSidecarSchema = R"({
  "$schema": "https://json-schema.org/draft/2020-12/schema",
  "title": "sketchsolve solve sidecar",
  "type": "object",
  "required": ["schema", "command", "config", "result"],
  "properties": {
    "schema": {"type": "string", "enum": ["sketchsolve.solve/1"]},
    "command": {"type": "string", "enum": ["solve"]},
    "config": {
      "type": "object",
      "required": ["method", "sketch", "m", "m_rule", "n", "d", "source", "eps", "seed", "mode",
                   "mu", "beta", "parameter_rule", "k", "max_iters", "factor", "timing"],
      "properties": {
        "method": {"type": "string", "enum": ["pcg", "ihs", "polyak", "gcc", "fcg", "ipcg"]},
        "sketch": {"type": "string", "enum": ["gaussian", "haar", "srht"]},
        "m": {"type": "integer"},
        "m_rule": {"type": "string"},
        "n": {"type": "integer"},
        "d": {"type": "integer"},
        "source": {"type": "string"},
        "eps": {"type": "number"},
        "seed": {"type": "integer"},
        "mode": {"type": "string", "enum": ["fixed", "refreshed"]},
        "mu": {"type": ["number", "null"]},
        "beta": {"type": ["number", "null"]},
        "parameter_rule": {"type": "string"},
        "k": {"type": "integer"},
        "max_iters": {"type": "integer"},
        "factor": {"type": "string", "enum": ["qr", "svd"]},
        "timing": {"type": "boolean"}
      }
    },
    "result": {
      "type": "object",
      "required": ["status", "iterations", "final_delta_rel", "final_residual", "flops", "wall_s"],
      "properties": {
        "status": {"type": "string", "enum": ["converged", "max_iterations"]},
        "iterations": {"type": "integer"},
        "final_delta_rel": {"type": "number"},
        "final_residual": {"type": "number"},
        "flops": {"type": "object", "required": ["sketch", "factor", "iterate", "total"]},
        "wall_s": {"type": "object", "required": ["sketch", "factor", "iterate", "total"]}
      }
    }
  }
})";

namespace detail {

inline bool json_type_matches(const Json& v, const std::string& type) {
  if (type == "object") return v.is_object();
  if (type == "array") return v.is_array();
  if (type == "string") return v.is_string();
  if (type == "integer") return v.is_number_integer();
  if (type == "number") return v.is_number();
  if (type == "boolean") return v.is_boolean();
  if (type == "null") return v.is_null();
  return false;
}

inline void validate_node(const Json& v, const Json& schema, const std::string& path, std::vector<std::string>& errors) {
  if (schema.contains("type")) {
    const Json& t = schema["type"];
    bool ok = false;
    if (t.is_array()) {
      for (const auto& alt : t) ok = ok || json_type_matches(v, alt.get<std::string>());
    } else {
      ok = json_type_matches(v, t.get<std::string>());
    }
    if (!ok) {
      errors.push_back(path + ": wrong type");
      return;
    }
  }
  if (schema.contains("enum") && std::find(schema["enum"].begin(), schema["enum"].end(), v) == schema["enum"].end())
    errors.push_back(path + ": value not in enum");
  if (v.is_object()) {
    if (schema.contains("required"))
      for (const auto& key : schema["required"])
        if (!v.contains(key.get<std::string>())) errors.push_back(path + ": missing '" + key.get<std::string>() + "'");
    if (schema.contains("properties"))
      for (const auto& [key, sub] : schema["properties"].items())
        if (v.contains(key)) validate_node(v[key], sub, path + "/" + key, errors);
  }
}

}  // namespace detail

/// Checks a document against the subset of JSON Schema used by the
/// published schemas (type, enum, required, properties). Returns the list of
/// violations, empty when valid.
inline std::vector<std::string> validate_json(const Json& doc, const char* schema_text) {
  std::vector<std::string> errors;
  detail::validate_node(doc, Json::parse(schema_text), "", errors);
  return errors;
}

namespace detail {

inline std::optional<double> parse_auto(const std::string& text, const char* flag) {
  if (text == "auto") return std::nullopt;
  try {
    std::size_t pos = 0;
    const double v = std::stod(text, &pos);
    if (pos != text.size() || !std::isfinite(v)) throw std::invalid_argument(text);
    return v;
  } catch (const std::exception&) {
    throw UsageError(std::string(flag) + ": expected a number or 'auto', got '" + text + "'");
  }
}

inline SketchKind parse_kind(const std::string& text) {
  const auto kind = parse_sketch_kind(text);
  if (!kind) throw UsageError("--sketch: expected gaussian, haar or srht, got '" + text + "'");
  return *kind;
}

inline std::set<std::string> parse_formats(const std::string& text) {
  std::set<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item != "csv" && item != "json" && item != "svg") throw UsageError("--format: unknown format '" + item + "'");
    out.insert(item);
  }
  return out;
}

inline std::vector<double> parse_list(const std::string& text, const char* flag) {
  std::vector<double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    const auto v = parse_auto(item, flag);
    if (!v) throw UsageError(std::string(flag) + ": 'auto' not allowed in a list");
    out.push_back(*v);
  }
  return out;
}

inline std::filesystem::path prepare_dir(const std::string& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw std::runtime_error("cannot create output directory '" + dir + "': " + ec.message());
  return dir;
}

inline void write_file(const std::filesystem::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write '" + path.string() + "'");
  out << content;
  if (!out) throw std::runtime_error("error writing '" + path.string() + "'");
}

inline Json flops_json(const PhaseFlops& f) {
  return Json{{"sketch", f.sketch}, {"factor", f.factor}, {"iterate", f.iterate}, {"total", f.total()}};
}

inline Json seconds_json(const PhaseSeconds& s, bool timing) {
  if (!timing) return Json{{"sketch", 0.0}, {"factor", 0.0}, {"iterate", 0.0}, {"total", 0.0}};
  return Json{{"sketch", s.sketch}, {"factor", s.factor}, {"iterate", s.iterate}, {"total", s.total()}};
}

struct SketchSizeChoice {
  Index m = 0;
  std::string rule;
};

/// `--m auto`: optimized size when n > d^2, otherwise the classical one;
/// always clamped to the admissible range.
inline SketchSizeChoice auto_sketch_size(SketchKind kind, Index n, Index d, double eps, bool refreshed) {
  const double nn = static_cast<double>(n);
  const double dd = static_cast<double>(d);
  SketchSizeChoice out;
  double m;
  if (nn > dd * dd && eps > 0 && eps < 1) {
    if (kind == SketchKind::SRHT) {
      const auto r = srht_opt_sketch_size(nn, dd, eps);
      m = r.m_star;
      out.rule = "srht optimized, case " + std::string(to_string(r.regime));
    } else {
      m = gaussian_opt_sketch_size(nn, dd, eps).m_star;
      out.rule = "gaussian optimized (lambert w)";
    }
  } else {
    m = classical_sketch_size(kind == SketchKind::SRHT ? SketchKind::SRHT : SketchKind::Gaussian, dd);
    out.rule = "classical (n <= d^2)";
  }
  Index lo = d + 1;
  if (refreshed && kind == SketchKind::Gaussian) lo = d + 4;
  const Index hi = kind == SketchKind::Gaussian ? std::numeric_limits<Index>::max()
                   : kind == SketchKind::SRHT   ? effective_dimension(kind, n)
                                                : n - 1;
  out.m = std::clamp(static_cast<Index>(m), lo, std::max(lo, hi));
  if (static_cast<double>(out.m) != m) out.rule += ", clamped";
  return out;
}

}  // namespace detail

struct SolveOptions {
  std::string method = "pcg";
  std::string sketch = "gaussian";
  std::string m = "auto";
  Index n = 0;
  Index d = 0;
  double cond = 100.0;
  double eps = 1e-8;
  std::uint64_t seed = 0;
  std::string mode = "fixed";
  std::string mu = "auto";
  std::string beta = "auto";
  int k = 5;
  int max_iters = 200;
  std::string matrix;
  std::string rhs;
  std::string factor = "qr";
  std::string out = ".";
  std::string format = "csv,json";
  bool timing = false;
};

inline int cmd_solve(const SolveOptions& o, std::ostream& log) {
  const auto formats = detail::parse_formats(o.format);
  const SketchKind kind = detail::parse_kind(o.sketch);
  if (o.mode != "fixed" && o.mode != "refreshed") throw UsageError("--mode: expected fixed or refreshed");
  if (o.factor != "qr" && o.factor != "svd") throw UsageError("--factor: expected qr or svd");
  const std::set<std::string> methods{"pcg", "ihs", "polyak", "gcc", "fcg", "ipcg"};
  if (!methods.count(o.method)) throw UsageError("--method: unknown method '" + o.method + "'");
  const SketchMode mode = o.mode == "fixed" ? SketchMode::Fixed : SketchMode::Refreshed;
  if (o.method == "pcg" && mode == SketchMode::Refreshed) throw UsageError("--method pcg needs --mode fixed");
  if (o.max_iters < 1) throw UsageError("--max-iters must be >= 1");

  LeastSquaresProblem problem;
  std::string source;
  if (!o.matrix.empty()) {
    Matrix a = load_matrix_market(o.matrix);
    Vector y;
    if (!o.rhs.empty()) {
      const Matrix ym = load_matrix_market(o.rhs);
      if (ym.cols() != 1) throw std::runtime_error("--rhs must be a single column");
      y = ym.col(0);
    } else {
      Rng rng = make_rng(o.seed);
      y = standard_normal(a.rows(), rng);
    }
    problem = from_least_squares(std::move(a), y, o.seed);
    source = o.matrix;
  } else {
    if (o.d < 1) throw UsageError("--d is required for synthetic problems");
    if (o.n < 1) throw UsageError("--n is required for synthetic problems");
    problem = generate_synthetic(o.n, o.d, o.cond, o.seed);
    source = "synthetic";
  }
  const Index n = problem.n();
  const Index d = problem.d();

  SolverConfig cfg;
  cfg.max_iters = o.max_iters;
  cfg.tol = o.eps;
  cfg.kind = kind;
  cfg.mode = mode;
  cfg.seed = o.seed;
  cfg.factor = o.factor == "qr" ? FactorMethod::QR : FactorMethod::SVD;
  cfg.mu = detail::parse_auto(o.mu, "--mu");
  cfg.beta = detail::parse_auto(o.beta, "--beta");
  cfg.k = o.k;
  cfg.truncation = o.method == "gcc" ? Truncation::Full : o.method == "ipcg" ? Truncation::One : Truncation::Fixed;

  detail::SketchSizeChoice msize;
  if (o.m == "auto") {
    msize = detail::auto_sketch_size(kind, n, d, o.eps, mode == SketchMode::Refreshed);
  } else {
    const auto v = detail::parse_auto(o.m, "--m");
    if (*v < 1 || *v != std::floor(*v)) throw UsageError("--m: expected a positive integer or 'auto'");
    msize.m = static_cast<Index>(*v);
    msize.rule = "given";
  }
  cfg.m = msize.m;

  std::optional<double> mu, beta;
  std::string parameter_rule = "none";
  if (o.method == "ihs" || o.method == "polyak") {
    const auto r = resolve_parameters(o.method == "polyak", n, d, cfg);
    mu = r.mu;
    beta = r.beta;
    parameter_rule = r.rule;
    cfg.mu = r.mu;
    cfg.beta = r.beta;
  }
  log << "resolved: m=" << cfg.m << " (" << msize.rule << ")";
  if (mu) log << ", mu=" << format_number(*mu) << ", beta=" << format_number(*beta) << " (" << parameter_rule << ")";
  log << '\n';

  const ErrorOracle oracle = compute_oracle(problem);
  SolveTrace trace;
  if (o.method == "pcg") trace = pcg(problem, cfg, &oracle);
  else if (o.method == "ihs") trace = ihs(problem, cfg, &oracle);
  else if (o.method == "polyak") trace = polyak_ihs(problem, cfg, &oracle);
  else trace = fcg(problem, cfg, &oracle);

  const auto dir = detail::prepare_dir(o.out);
  const auto rel = trace.relative_deltas();
  if (formats.count("csv")) {
    std::ostringstream csv;
    CsvWriter w(csv);
    w.header({"iter", "delta", "delta_rel", "flops_cum", "wall_s"});
    for (std::size_t t = 0; t < trace.deltas.size(); ++t)
      w.row({std::to_string(t), format_number(trace.deltas[t]), format_number(rel[t]),
             std::to_string(trace.flops_cum[t]), format_number(o.timing ? trace.wall_cum[t] : 0.0)});
    detail::write_file(dir / "trace.csv", csv.str());
  }
  if (formats.count("json")) {
    Json doc;
    doc["schema"] = "sketchsolve.solve/1";
    doc["command"] = "solve";
    doc["config"] = Json{{"method", o.method},
                         {"sketch", std::string(to_string(kind))},
                         {"m", cfg.m},
                         {"m_rule", msize.rule},
                         {"n", n},
                         {"d", d},
                         {"cond", o.matrix.empty() ? Json(o.cond) : Json(nullptr)},
                         {"source", source},
                         {"eps", o.eps},
                         {"seed", o.seed},
                         {"mode", std::string(to_string(mode))},
                         {"mu", mu ? Json(*mu) : Json(nullptr)},
                         {"beta", beta ? Json(*beta) : Json(nullptr)},
                         {"parameter_rule", parameter_rule},
                         {"k", o.method == "fcg" ? o.k : trace.k},
                         {"max_iters", o.max_iters},
                         {"factor", o.factor},
                         {"timing", o.timing}};
    doc["result"] = Json{{"status", std::string(to_string(trace.status))},
                         {"iterations", trace.iterations},
                         {"final_delta_rel", rel.back()},
                         {"final_residual", trace.residuals.back()},
                         {"flops", detail::flops_json(trace.flops)},
                         {"wall_s", detail::seconds_json(trace.wall, o.timing)}};
    detail::write_file(dir / "trace.json", doc.dump(2) + "\n");
  }
  if (formats.count("svg")) {
    PlotSpec plot;
    plot.title = trace.method + " relative error";
    plot.x_label = "iteration";
    plot.y_label = "delta_t / delta_0";
    plot.log_y = true;
    PlotSeries s{trace.method, {}, rel, false};
    for (std::size_t t = 0; t < rel.size(); ++t) s.x.push_back(static_cast<double>(t));
    plot.series.push_back(std::move(s));
    detail::write_file(dir / "trace.svg", render_line_plot(plot));
  }
  log << "status: " << to_string(trace.status) << " after " << trace.iterations
      << " iterations, delta_rel=" << format_number(rel.back()) << '\n';
  return 0;
}

struct BenchOptions {
  std::string sketch = "gaussian";
  Index n = 1024;
  Index d = 10;
  Index m = 0;  // 0 means 3 d
  double cond = 100.0;
  int trials = 200;
  int iters = 20;
  std::string betas = "0.05,0.1,0.5";
  std::string mode = "refreshed";
  std::uint64_t seed = 0;
  unsigned jobs = 1;
  std::string out = ".";
  std::string format = "csv,json,svg";
};

struct BenchResult {
  std::vector<std::string> columns;        // method columns, without iter and bound
  std::vector<std::vector<double>> means;  // [column][t], mean delta_t / delta_0
  std::vector<double> bound;               // (1 - theta1^2/theta2)^t, NaN when unavailable
};

inline std::string beta_column(double beta) { return "polyak_b" + format_number(beta); }

/// Mean relative-error curves of GCC, IPCG, IHS, Polyak-IHS for each beta
/// and PCG over `trials` seeds. Trial i uses problem seed derive_seed(seed, 2i)
/// and sketch seed derive_seed(seed, 2i+1), shared by all methods.
inline BenchResult run_bench(const BenchOptions& o) {
  const SketchKind kind = detail::parse_kind(o.sketch);
  if (o.mode != "fixed" && o.mode != "refreshed") throw UsageError("--mode: expected fixed or refreshed");
  if (o.trials < 1) throw UsageError("--trials must be >= 1");
  if (o.iters < 1) throw UsageError("--iters must be >= 1");
  if (o.d < 2 || o.n < o.d) throw UsageError("need n >= d >= 2");
  const auto betas = detail::parse_list(o.betas, "--betas");
  const Index m = o.m > 0 ? o.m : 3 * o.d;
  const SketchMode mode = o.mode == "fixed" ? SketchMode::Fixed : SketchMode::Refreshed;

  BenchResult res;
  res.columns = {"gcc", "ipcg", "ihs"};
  for (double b : betas) res.columns.push_back(beta_column(b));
  res.columns.push_back("pcg");
  const std::size_t cols = res.columns.size();
  const std::size_t len = static_cast<std::size_t>(o.iters) + 1;

  auto padded = [&](const SolveTrace& tr) {
    std::vector<double> rel = tr.relative_deltas();
    const double last = rel.empty() ? 1.0 : rel.back();
    rel.resize(len, last);
    return rel;
  };

  using Curves = std::vector<std::vector<double>>;
  const auto per_trial = run_trials<Curves>(static_cast<std::size_t>(o.trials), o.jobs, [&](std::size_t i) {
    const auto problem = generate_synthetic(o.n, o.d, o.cond, derive_seed(o.seed, 2 * i));
    const ErrorOracle oracle = compute_oracle(problem);
    SolverConfig cfg;
    cfg.max_iters = o.iters;
    cfg.kind = kind;
    cfg.m = m;
    cfg.mode = mode;
    cfg.seed = derive_seed(o.seed, 2 * i + 1);
    Curves c;
    c.reserve(cols);
    cfg.truncation = Truncation::Full;
    c.push_back(padded(fcg(problem, cfg, &oracle)));
    cfg.truncation = Truncation::One;
    c.push_back(padded(fcg(problem, cfg, &oracle)));
    c.push_back(padded(ihs(problem, cfg, &oracle)));
    for (double b : betas) {
      SolverConfig pc = cfg;
      pc.beta = b;
      c.push_back(padded(polyak_ihs(problem, pc, &oracle)));
    }
    SolverConfig fixed = cfg;
    fixed.mode = SketchMode::Fixed;
    c.push_back(padded(pcg(problem, fixed, &oracle)));
    return c;
  });

  res.means.assign(cols, std::vector<double>(len, 0.0));
  for (const auto& c : per_trial)
    for (std::size_t k = 0; k < cols; ++k)
      for (std::size_t t = 0; t < len; ++t) res.means[k][t] += c[k][t];
  for (auto& col : res.means)
    for (double& v : col) v /= static_cast<double>(o.trials);

  double rate = std::numeric_limits<double>::quiet_NaN();
  try {
    rate = closed_form_moments(kind, o.n, m, o.d).rate();
  } catch (const DomainError&) {
  }
  for (std::size_t t = 0; t < len; ++t) res.bound.push_back(std::pow(rate, static_cast<double>(t)));
  return res;
}

inline int cmd_bench(const BenchOptions& o, std::ostream& log) {
  const auto formats = detail::parse_formats(o.format);
  const BenchResult res = run_bench(o);
  const Index m = o.m > 0 ? o.m : 3 * o.d;
  const std::size_t len = res.bound.size();
  log << "resolved: m=" << m << ", ihs mu=theta1/theta2 in refreshed mode, polyak mu as ihs with the listed betas\n";
  const auto dir = detail::prepare_dir(o.out);
  if (formats.count("csv")) {
    std::ostringstream csv;
    CsvWriter w(csv);
    std::vector<std::string> header{"iter"};
    header.insert(header.end(), res.columns.begin(), res.columns.end());
    header.push_back("bound");
    w.header(header);
    for (std::size_t t = 0; t < len; ++t) {
      std::vector<std::string> row{std::to_string(t)};
      for (const auto& col : res.means) row.push_back(format_number(col[t]));
      row.push_back(format_number(res.bound[t]));
      w.row(row);
    }
    detail::write_file(dir / "bench.csv", csv.str());
  }
  if (formats.count("json")) {
    Json final_values = Json::object();
    for (std::size_t k = 0; k < res.columns.size(); ++k) final_values[res.columns[k]] = res.means[k].back();
    Json doc{{"schema", "sketchsolve.bench/1"},
             {"command", "bench"},
             {"config",
              {{"sketch", o.sketch},
               {"n", o.n},
               {"d", o.d},
               {"m", m},
               {"cond", o.cond},
               {"trials", o.trials},
               {"iters", o.iters},
               {"betas", detail::parse_list(o.betas, "--betas")},
               {"mode", o.mode},
               {"seed", o.seed}}},
             {"final_mean_delta_rel", final_values},
             {"final_bound", res.bound.back()}};
    detail::write_file(dir / "bench.json", doc.dump(2) + "\n");
  }
  if (formats.count("svg")) {
    PlotSpec plot;
    plot.title = "mean relative error, " + o.sketch + " " + o.mode + " sketches";
    plot.x_label = "iteration";
    plot.y_label = "delta_t / delta_0";
    plot.log_y = true;
    std::vector<double> xs(len);
    for (std::size_t t = 0; t < len; ++t) xs[t] = static_cast<double>(t);
    for (std::size_t k = 0; k < res.columns.size(); ++k) plot.series.push_back({res.columns[k], xs, res.means[k], false});
    plot.series.push_back({"bound", xs, res.bound, true});
    detail::write_file(dir / "bench.svg", render_line_plot(plot));
  }
  return 0;
}

struct MomentsOptions {
  std::string sketch = "gaussian";
  Index n = 1024;
  Index m = 20;
  Index d = 10;
  int trials = 2000;
  std::uint64_t seed = 0;
  unsigned jobs = 1;
  std::string out = ".";
  std::string format = "json";
};

inline Json moment_json(const MomentPair& p) {
  Json j{{"theta1", p.theta1},
         {"theta2", p.theta2},
         {"source", std::string(to_string(p.source))},
         {"rate", p.rate()},
         {"optimal_step", p.optimal_step()}};
  if (p.std_errors) {
    j["stderr_theta1"] = p.std_errors->first;
    j["stderr_theta2"] = p.std_errors->second;
    j["failures"] = p.failures;
  }
  return j;
}

inline int cmd_moments(const MomentsOptions& o, std::ostream& log) {
  const auto formats = detail::parse_formats(o.format);
  const SketchKind kind = detail::parse_kind(o.sketch);
  if (o.trials < 2) throw UsageError("--trials must be >= 2");
  Json doc{{"schema", "sketchsolve.moments/1"},
           {"command", "moments"},
           {"config", {{"sketch", o.sketch}, {"n", o.n}, {"m", o.m}, {"d", o.d}, {"trials", o.trials}, {"seed", o.seed}}}};
  try {
    doc["closed_form"] = moment_json(closed_form_moments(kind, o.n, o.m, o.d));
  } catch (const DomainError& e) {
    doc["closed_form"] = nullptr;
    log << "closed form unavailable: " << e.what() << '\n';
  }
  const auto mc = mc_moments(kind, o.n, o.m, o.d, static_cast<std::size_t>(o.trials), o.seed, o.jobs);
  doc["monte_carlo"] = moment_json(mc);
  const auto dir = detail::prepare_dir(o.out);
  if (formats.count("json")) detail::write_file(dir / "moments.json", doc.dump(2) + "\n");
  if (formats.count("csv")) {
    std::ostringstream csv;
    CsvWriter w(csv);
    w.header({"source", "theta1", "theta2", "rate"});
    if (!doc["closed_form"].is_null())
      w.row({doc["closed_form"]["source"].get<std::string>(), format_number(doc["closed_form"]["theta1"]),
             format_number(doc["closed_form"]["theta2"]), format_number(doc["closed_form"]["rate"])});
    w.row({"monte_carlo", format_number(mc.theta1), format_number(mc.theta2), format_number(mc.rate())});
    detail::write_file(dir / "moments.csv", csv.str());
  }
  log << "theta1=" << format_number(mc.theta1) << " theta2=" << format_number(mc.theta2)
      << " rate=" << format_number(mc.rate()) << " (monte carlo)\n";
  return 0;
}

struct TuneOptions {
  std::string sketch = "srht";
  double n = 1 << 20;
  double d = 32;
  double eps = 1e-8;
  int points = 60;
  bool serial_gaussian = false;
  bool measure = false;
  int repeats = 5;
  std::uint64_t seed = 0;
  std::string out = ".";
  std::string format = "csv,json,svg";
};

struct MeasuredRun {
  double m = 0;
  PhaseSeconds median;
  int iterations = 0;
};

inline MeasuredRun measure_pcg(const LeastSquaresProblem& p, SketchKind kind, Index m, double eps, int repeats,
                               std::uint64_t seed) {
  std::vector<PhaseSeconds> runs;
  MeasuredRun out;
  out.m = static_cast<double>(m);
  for (int r = 0; r < repeats; ++r) {
    SolverConfig cfg;
    cfg.kind = kind;
    cfg.m = m;
    cfg.tol = eps;
    cfg.max_iters = 500;
    cfg.seed = derive_seed(seed, static_cast<std::uint64_t>(r));
    const auto tr = pcg(p, cfg);
    runs.push_back(tr.wall);
    out.iterations = tr.iterations;
  }
  auto median = [&](auto field) {
    std::vector<double> v;
    for (const auto& s : runs) v.push_back(field(s));
    std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(v.size() / 2), v.end());
    return v[v.size() / 2];
  };
  out.median.sketch = median([](const PhaseSeconds& s) { return s.sketch; });
  out.median.factor = median([](const PhaseSeconds& s) { return s.factor; });
  out.median.iterate = median([](const PhaseSeconds& s) { return s.iterate; });
  return out;
}

inline int cmd_tune(const TuneOptions& o, std::ostream& log) {
  const auto formats = detail::parse_formats(o.format);
  const SketchKind kind = detail::parse_kind(o.sketch);
  if (kind == SketchKind::Haar) throw UsageError("tune: cost models exist for srht and gaussian only");
  if (o.points < 2) throw UsageError("--points must be >= 2");
  const CostModel model{o.n, o.d, o.eps, kind, o.serial_gaussian};

  Json doc{{"schema", "sketchsolve.tune/1"},
           {"command", "tune"},
           {"config",
            {{"sketch", o.sketch}, {"n", o.n}, {"d", o.d}, {"eps", o.eps}, {"serial_gaussian", o.serial_gaussian}}}};
  double m_star;
  if (kind == SketchKind::SRHT) {
    const auto r = srht_opt_sketch_size(o.n, o.d, o.eps);
    m_star = r.m_star;
    doc["m_star"] = r.m_star;
    doc["case"] = std::string(to_string(r.regime));
    doc["predicted_cost"] = r.predicted_cost;
  } else {
    const auto r = gaussian_opt_sketch_size(o.n, o.d, o.eps);
    m_star = r.m_star;
    doc["m_star"] = r.m_star;
    doc["alpha"] = r.alpha;
    doc["a"] = r.a;
    doc["alpha_log_alpha_residual"] = std::abs(r.alpha * std::log(r.alpha) - r.a) / r.a;
    doc["predicted_cost"] = r.predicted_cost;
  }
  const double m_classical = classical_sketch_size(kind, o.d);
  doc["m_classical"] = m_classical;
  doc["model_cost_at_m_star"] = model.total(m_star);
  doc["model_cost_at_m_classical"] = m_classical > model.m_ref() ? Json(model.total(m_classical)) : Json(nullptr);
  doc["cost_ratio_vs_classical"] = cost_ratio_vs_classical(kind, o.n, o.d, o.eps);

  const auto sweep = cost_sweep(model, model.m_ref(), o.n, o.points);
  Json rows = Json::array();
  for (const auto& p : sweep)
    rows.push_back({{"m", p.m}, {"sketch", p.sketch}, {"factor", p.factor}, {"iterate", p.iterate}, {"total", p.total}});
  doc["sweep"] = rows;

  if (o.measure) {
    const Index n = static_cast<Index>(o.n);
    const Index d = static_cast<Index>(o.d);
    const auto problem = generate_synthetic(n, d, 100.0, o.seed);
    const Index hi = effective_dimension(kind, n);
    Json measured = Json::array();
    for (double m : {m_star, m_classical}) {
      const Index mm = std::clamp(static_cast<Index>(m), d + 1, hi);
      const auto run = measure_pcg(problem, kind, mm, o.eps, o.repeats, o.seed);
      measured.push_back({{"m", mm},
                          {"iterations", run.iterations},
                          {"median_wall_s", detail::seconds_json(run.median, true)}});
      log << "measured m=" << mm << ": total " << format_number(run.median.total()) << " s (median of " << o.repeats
          << ")\n";
    }
    doc["measured"] = measured;
  }

  log << "m*=" << format_number(m_star) << ", classical m=" << format_number(m_classical)
      << ", cost ratio=" << format_number(doc["cost_ratio_vs_classical"].get<double>()) << '\n';
  const auto dir = detail::prepare_dir(o.out);
  if (formats.count("json")) detail::write_file(dir / "tune.json", doc.dump(2) + "\n");
  if (formats.count("csv")) {
    std::ostringstream csv;
    CsvWriter w(csv);
    w.header({"m", "sketch", "factor", "iterate", "total"});
    for (const auto& p : sweep) w.row(std::vector<double>{p.m, p.sketch, p.factor, p.iterate, p.total});
    detail::write_file(dir / "tune.csv", csv.str());
  }
  if (formats.count("svg")) {
    PlotSpec plot;
    plot.title = "modelled cost, " + o.sketch;
    plot.x_label = "sketch size m";
    plot.y_label = "flops";
    plot.log_x = true;
    plot.log_y = true;
    std::vector<double> xs, sk, fa, it, to;
    for (const auto& p : sweep) {
      xs.push_back(p.m);
      sk.push_back(p.sketch);
      fa.push_back(p.factor);
      it.push_back(p.iterate);
      to.push_back(p.total);
    }
    plot.series = {{"sketch", xs, sk, true}, {"factor", xs, fa, true}, {"iterate", xs, it, true}, {"total", xs, to, false}};
    plot.markers = {{"m*", m_star}, {"classical", m_classical}};
    detail::write_file(dir / "tune.svg", render_line_plot(plot));
  }
  return 0;
}

struct RootRadiusOptions {
  std::string sketch = "gaussian";
  Index n = 1024;
  Index m = 20;
  Index d = 10;
  double theta1 = 0;  // both set overrides the closed form
  double theta2 = 0;
  int mu_points = 121;
  int beta_points = 100;
  std::string out = ".";
  std::string format = "json";
};

inline int cmd_rootradius(const RootRadiusOptions& o, std::ostream& log) {
  const auto formats = detail::parse_formats(o.format);
  double theta1 = o.theta1, theta2 = o.theta2;
  std::string source = "given";
  if (theta1 <= 0 || theta2 <= 0) {
    const auto th = closed_form_moments(detail::parse_kind(o.sketch), o.n, o.m, o.d);
    theta1 = th.theta1;
    theta2 = th.theta2;
    source = std::string(to_string(th.source));
  }
  RootRadiusGrid grid;
  grid.mu_points = o.mu_points;
  grid.beta_points = o.beta_points;
  const auto res = min_root_radius_search(theta1, theta2, grid);
  const double rho_star = 1 - theta1 * theta1 / theta2;
  Json doc{{"schema", "sketchsolve.rootradius/1"},
           {"command", "rootradius"},
           {"theta1", theta1},
           {"theta2", theta2},
           {"theta_source", source},
           {"rho_star", rho_star},
           {"min_root_radius", res.min_value},
           {"argmin_mu", res.mu},
           {"argmin_beta", res.beta},
           {"optimal_mu", theta1 / theta2},
           {"grid_mu_step", res.mu_step},
           {"grid_beta_step", res.beta_step}};
  const auto dir = detail::prepare_dir(o.out);
  if (formats.count("json")) detail::write_file(dir / "rootradius.json", doc.dump(2) + "\n");
  if (formats.count("csv")) {
    std::ostringstream csv;
    CsvWriter w(csv);
    w.header({"mu", "beta", "root_radius"});
    for (int i = 0; i < o.mu_points; ++i)
      for (int j = 0; j < o.beta_points; ++j) {
        const double mu = res.mu_step * i, beta = res.beta_step * j;
        w.row(std::vector<double>{mu, beta, root_radius(DynamicsParams::make(mu, beta, theta1, theta2))});
      }
    detail::write_file(dir / "rootradius.csv", csv.str());
  }
  log << "rho*=" << format_number(rho_star) << ", min root radius=" << format_number(res.min_value) << " at mu="
      << format_number(res.mu) << ", beta=" << format_number(res.beta) << '\n';
  return 0;
}

struct MpOptions {
  double rho = 0.25;
  int t = 200;
  int points = 101;
  std::string out = ".";
  std::string format = "csv,json";
};

inline int cmd_mp(const MpOptions& o, std::ostream& log) {
  const auto formats = detail::parse_formats(o.format);
  if (o.t < 0) throw UsageError("--t must be >= 0");
  const auto rep = mp_optimal_step_check(o.rho, o.t, o.points);
  const double mu_star = rep.mu_star;
  const double ratio = std::exp(mp_log_gamma(o.rho, mu_star, o.t + 1) - mp_log_gamma(o.rho, mu_star, o.t));
  Json doc{{"schema", "sketchsolve.mp/1"},
           {"command", "mp"},
           {"rho", o.rho},
           {"t", o.t},
           {"mu_star", mu_star},
           {"argmin_mu", rep.argmin_mu},
           {"grid_step", rep.grid_step},
           {"log_ratio_low_edge", rep.log_ratio_low_edge},
           {"log_ratio_high_edge", rep.log_ratio_high_edge},
           {"degenerate", rep.degenerate},
           {"gamma_ratio_at_mu_star", ratio},
           {"asymptotic_rate", mp_asymptotic_rate(o.rho)}};
  const auto dir = detail::prepare_dir(o.out);
  if (formats.count("json")) detail::write_file(dir / "mp.json", doc.dump(2) + "\n");
  if (formats.count("csv")) {
    std::ostringstream csv;
    CsvWriter w(csv);
    w.header({"mu", "log_gamma"});
    for (std::size_t i = 0; i < rep.mu.size(); ++i) w.row(std::vector<double>{rep.mu[i], rep.log_gamma[i]});
    detail::write_file(dir / "mp.csv", csv.str());
  }
  if (formats.count("svg")) {
    PlotSpec plot;
    plot.title = "ln Gamma_t(mu), rho=" + format_number(o.rho) + ", t=" + std::to_string(o.t);
    plot.x_label = "mu";
    plot.y_label = "ln Gamma_t";
    plot.series = {{"ln Gamma_t", rep.mu, rep.log_gamma, false}};
    plot.markers = {{"mu*", mu_star}};
    detail::write_file(dir / "mp.svg", render_line_plot(plot));
  }
  log << "argmin mu=" << format_number(rep.argmin_mu) << " (mu*=" << format_number(mu_star)
      << "), Gamma_{t+1}/Gamma_t=" << format_number(ratio) << " (limit " << format_number(mp_asymptotic_rate(o.rho))
      << ")\n";
  return 0;
}

/// Parses argv and runs one subcommand. Exit codes: 0 success, 1 usage or
/// IO error, 2 numerical breakdown.
inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr) {
  CLI::App app{"Sketch-and-precondition least-squares solvers and their analysis", "sketchsolve"};
  app.require_subcommand(1);

  SolveOptions so;
  auto* solve = app.add_subcommand("solve", "Run one solver and write trace.csv / trace.json");
  solve->add_option("--method", so.method, "pcg|ihs|polyak|gcc|fcg|ipcg")->capture_default_str();
  solve->add_option("--sketch", so.sketch, "gaussian|haar|srht")->capture_default_str();
  solve->add_option("--m", so.m, "Sketch size or 'auto'")->capture_default_str();
  solve->add_option("--n", so.n, "Rows of the synthetic problem");
  solve->add_option("--d", so.d, "Columns of the synthetic problem");
  solve->add_option("--cond", so.cond, "Condition number of the synthetic problem")->capture_default_str();
  solve->add_option("--eps", so.eps, "Target relative error delta_t/delta_0")->capture_default_str();
  solve->add_option("--seed", so.seed, "Global seed")->capture_default_str();
  solve->add_option("--mode", so.mode, "fixed|refreshed")->capture_default_str();
  solve->add_option("--mu", so.mu, "Step size or 'auto'")->capture_default_str();
  solve->add_option("--beta", so.beta, "Momentum or 'auto'")->capture_default_str();
  solve->add_option("--k", so.k, "Memory of fcg")->capture_default_str();
  solve->add_option("--max-iters", so.max_iters, "Iteration cap")->capture_default_str();
  solve->add_option("--matrix", so.matrix, "Matrix Market file with A");
  solve->add_option("--rhs", so.rhs, "Matrix Market file with y (one column)");
  solve->add_option("--factor", so.factor, "qr|svd")->capture_default_str();
  solve->add_option("--out", so.out, "Output directory")->capture_default_str();
  solve->add_option("--format", so.format, "Subset of csv,json,svg")->capture_default_str();
  solve->add_flag("--timing", so.timing, "Record wall-clock times (outputs are then not reproducible)");

  BenchOptions bo;
  auto* bench = app.add_subcommand(
      "bench", "Mean relative error of GCC, IPCG, IHS, Polyak-IHS and PCG over many trials. Defaults: d=10, m=3d, "
               "n=1024, 200 trials");
  bench->add_option("--sketch", bo.sketch, "gaussian|haar|srht")->capture_default_str();
  bench->add_option("--n", bo.n)->capture_default_str();
  bench->add_option("--d", bo.d)->capture_default_str();
  bench->add_option("--m", bo.m, "Sketch size, 0 for 3d")->capture_default_str();
  bench->add_option("--cond", bo.cond)->capture_default_str();
  bench->add_option("--trials", bo.trials)->capture_default_str();
  bench->add_option("--iters", bo.iters)->capture_default_str();
  bench->add_option("--betas", bo.betas, "Comma-separated momentum values")->capture_default_str();
  bench->add_option("--mode", bo.mode, "fixed|refreshed")->capture_default_str();
  bench->add_option("--seed", bo.seed)->capture_default_str();
  bench->add_option("--jobs", bo.jobs, "Worker threads")->capture_default_str();
  bench->add_option("--out", bo.out)->capture_default_str();
  bench->add_option("--format", bo.format)->capture_default_str();

  MomentsOptions mo;
  auto* moments = app.add_subcommand("moments", "Closed-form and Monte-Carlo inverse moments theta1, theta2");
  moments->add_option("--sketch", mo.sketch)->capture_default_str();
  moments->add_option("--n", mo.n)->capture_default_str();
  moments->add_option("--m", mo.m)->capture_default_str();
  moments->add_option("--d", mo.d)->capture_default_str();
  moments->add_option("--trials", mo.trials)->capture_default_str();
  moments->add_option("--seed", mo.seed)->capture_default_str();
  moments->add_option("--jobs", mo.jobs)->capture_default_str();
  moments->add_option("--out", mo.out)->capture_default_str();
  moments->add_option("--format", mo.format)->capture_default_str();

  TuneOptions to;
  auto* tune = app.add_subcommand("tune", "Optimized sketch size and cost curves");
  tune->add_option("--sketch", to.sketch, "srht|gaussian")->capture_default_str();
  tune->add_option("--n", to.n)->capture_default_str();
  tune->add_option("--d", to.d)->capture_default_str();
  tune->add_option("--eps", to.eps)->capture_default_str();
  tune->add_option("--points", to.points, "Sweep points")->capture_default_str();
  tune->add_flag("--serial-gaussian", to.serial_gaussian, "Charge n d m for the Gaussian sketch");
  tune->add_flag("--measure", to.measure, "Also time PCG at m* and the classical m");
  tune->add_option("--repeats", to.repeats, "Timing repeats")->capture_default_str();
  tune->add_option("--seed", to.seed)->capture_default_str();
  tune->add_option("--out", to.out)->capture_default_str();
  tune->add_option("--format", to.format)->capture_default_str();

  RootRadiusOptions ro;
  auto* rootradius = app.add_subcommand("rootradius", "Minimal root radius of the momentum dynamics");
  rootradius->add_option("--sketch", ro.sketch)->capture_default_str();
  rootradius->add_option("--n", ro.n)->capture_default_str();
  rootradius->add_option("--m", ro.m)->capture_default_str();
  rootradius->add_option("--d", ro.d)->capture_default_str();
  rootradius->add_option("--theta1", ro.theta1, "Overrides the closed form (with --theta2)");
  rootradius->add_option("--theta2", ro.theta2);
  rootradius->add_option("--mu-points", ro.mu_points)->capture_default_str();
  rootradius->add_option("--beta-points", ro.beta_points)->capture_default_str();
  rootradius->add_option("--out", ro.out)->capture_default_str();
  rootradius->add_option("--format", ro.format)->capture_default_str();

  MpOptions po;
  auto* mp = app.add_subcommand("mp", "Marchenko-Pastur error integral and its optimal step");
  mp->add_option("--rho", po.rho)->capture_default_str();
  mp->add_option("--t", po.t)->capture_default_str();
  mp->add_option("--points", po.points)->capture_default_str();
  mp->add_option("--out", po.out)->capture_default_str();
  mp->add_option("--format", po.format)->capture_default_str();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 1;
  }

  CLI::App* active = app.get_subcommands().front();
  try {
    if (active == solve) return cmd_solve(so, err);
    if (active == bench) return cmd_bench(bo, err);
    if (active == moments) return cmd_moments(mo, err);
    if (active == tune) return cmd_tune(to, err);
    if (active == rootradius) return cmd_rootradius(ro, err);
    if (active == mp) return cmd_mp(po, err);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n\n" << active->help();
    return 1;
  } catch (const BreakdownError& e) {
    err << "breakdown: " << e.what() << '\n';
    return 2;
  } catch (const RankError& e) {
    err << "rank deficiency: " << e.what() << '\n';
    return 2;
  } catch (const NumericalError& e) {
    err << "numerical failure: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return 1;
  }
  return 1;
}

}  // namespace sketchsolve::cli
