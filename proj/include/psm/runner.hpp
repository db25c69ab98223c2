#pragma once

#include "psm/analysis.hpp"
#include "psm/fixtures.hpp"
#include "psm/losses.hpp"
#include "psm/solver.hpp"
#include "psm/trace_csv.hpp"
#include "psm/types.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace psm {

/// Flat "key = value" configuration file; '#' starts a comment.
class KeyValueConfig {
public:
  static KeyValueConfig from_stream(std::istream& in) {
    KeyValueConfig cfg;
    std::string line;
    int line_no = 0;
    while (std::getline(in, line)) {
      ++line_no;
      const auto hash = line.find('#');
      if (hash != std::string::npos) line = line.substr(0, hash);
      const std::string trimmed = trim(line);
      if (trimmed.empty()) continue;
      const auto eq = trimmed.find('=');
      if (eq == std::string::npos)
        throw ParseError("expected key = value, got '" + trimmed + "'", line_no);
      const std::string key = trim(trimmed.substr(0, eq));
      const std::string value = trim(trimmed.substr(eq + 1));
      if (key.empty()) throw ParseError("empty key", line_no);
      cfg.values_[key] = value;
    }
    return cfg;
  }

  static KeyValueConfig from_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file: " + path);
    return from_stream(in);
  }

  bool has(const std::string& key) const { return values_.count(key) > 0; }

  std::string get_string(const std::string& key, const std::string& fallback) const {
    auto it = values_.find(key);
    return it == values_.end() ? fallback : it->second;
  }

  std::string require(const std::string& key) const {
    auto it = values_.find(key);
    if (it == values_.end()) throw ConfigError("missing config key: " + key);
    return it->second;
  }

  double get_double(const std::string& key, double fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    return to_double(key, it->second);
  }

  int get_int(const std::string& key, int fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    return to_int(key, it->second);
  }

  bool get_bool(const std::string& key, bool fallback) const {
    auto it = values_.find(key);
    if (it == values_.end()) return fallback;
    const std::string& v = it->second;
    if (v == "true" || v == "1" || v == "yes" || v == "on") return true;
    if (v == "false" || v == "0" || v == "no" || v == "off") return false;
    throw ConfigError("config key '" + key + "' is not a boolean: " + v);
  }

  std::vector<std::string> get_list(const std::string& key) const {
    std::vector<std::string> out;
    auto it = values_.find(key);
    if (it == values_.end()) return out;
    std::istringstream ss(it->second);
    std::string tok;
    while (ss >> tok) out.push_back(tok);
    return out;
  }

  const std::map<std::string, std::string>& values() const { return values_; }

private:
  static std::string trim(const std::string& s) {
    const auto begin = s.find_first_not_of(" \t\r\n");
    if (begin == std::string::npos) return "";
    const auto end = s.find_last_not_of(" \t\r\n");
    return s.substr(begin, end - begin + 1);
  }

  static double to_double(const std::string& key, const std::string& v) {
    if (v == "inf") return kInfinity;
    try {
      std::size_t used = 0;
      const double out = std::stod(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return out;
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "' is not a number: " + v);
    }
  }

  static int to_int(const std::string& key, const std::string& v) {
    try {
      std::size_t used = 0;
      const int out = std::stoi(v, &used);
      if (used != v.size()) throw std::invalid_argument(v);
      return out;
    } catch (const std::exception&) {
      throw ConfigError("config key '" + key + "' is not an integer: " + v);
    }
  }

  std::map<std::string, std::string> values_;
};

struct CliOverrides {
  std::optional<std::string> out_dir;
  std::optional<std::uint64_t> seed;
  bool quiet = false;
};

struct ProblemSetup {
  CompositeProblem problem;
  Vector x0;
  std::string description;
  std::uint64_t seed = 1;
};

namespace detail {

inline Regularizer build_regularizer(const KeyValueConfig& cfg, int dim,
                                     double default_mu) {
  const std::string kind = cfg.get_string("reg", default_mu > 0.0 ? "l1" : "zero");
  if (kind == "zero" || kind == "none") return Regularizer::zero();
  if (kind == "l1") return Regularizer::l1(cfg.get_double("mu", default_mu));
  if (kind == "box")
    return Regularizer::box(cfg.get_double("box_lo", 0.0),
                            cfg.get_double("box_hi", 1.0), dim);
  throw ConfigError("unknown regularizer kind: " + kind);
}

inline Vector build_x0(const KeyValueConfig& cfg, int dim, std::uint64_t seed) {
  const std::string kind = cfg.get_string("x0", "zeros");
  if (kind == "zeros") return Vector::Zero(dim);
  if (kind == "random") {
    const double radius = cfg.get_double("x0_radius", 1.0);
    std::mt19937_64 rng(seed ^ 0x517cc1b727220a95ULL);
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    Vector v(dim);
    for (int i = 0; i < dim; ++i) v[i] = gauss(rng);
    const double norm = v.norm();
    if (norm > 0.0) v *= radius * unif(rng) / norm;
    return v;
  }
  throw ConfigError("unknown x0 kind: " + kind);
}

}  // namespace detail

/// Build the problem and start point a config file describes.
inline ProblemSetup build_problem(const KeyValueConfig& cfg, std::uint64_t seed) {
  const std::string kind = cfg.require("problem");
  ProblemSetup setup;
  setup.seed = seed;

  if (kind == "logistic" || kind == "poisson") {
    const std::string path = cfg.require("data");
    LibsvmOptions opts;
    opts.normalize_binary_labels = cfg.get_bool("normalize_labels", kind == "logistic");
    if (cfg.has("dimension_override"))
      opts.dimension_override = cfg.get_int("dimension_override", 0);
    Dataset data = load_libsvm_file(path, opts);
    const int dim = data.dimension();
    auto oracle = kind == "logistic" ? logistic_oracle(std::move(data))
                                     : poisson_oracle(std::move(data));
    setup.problem =
        make_problem(std::move(oracle), detail::build_regularizer(cfg, dim, 0.0));
    setup.description = kind + " data=" + path;
  } else if (kind == "synth_logistic") {
    LogisticFixtureSpec spec;
    spec.samples = cfg.get_int("samples", spec.samples);
    spec.features = cfg.get_int("features", spec.features);
    spec.cond = cfg.get_double("cond", spec.cond);
    spec.sigma_max = cfg.get_double("sigma_max", spec.sigma_max);
    spec.mu = cfg.get_double("mu", spec.mu);
    spec.seed = seed;
    setup.problem = make_logistic_fixture(spec);
    setup.description = "synthetic logistic n=" + std::to_string(spec.samples) +
                        " d=" + std::to_string(spec.features);
  } else if (kind == "synth_poisson") {
    PoissonFixtureSpec spec;
    spec.samples = cfg.get_int("samples", spec.samples);
    spec.features = cfg.get_int("features", spec.features);
    spec.cond = cfg.get_double("cond", spec.cond);
    spec.sigma_max = cfg.get_double("sigma_max", spec.sigma_max);
    spec.mu = cfg.get_double("mu", spec.mu);
    spec.seed = seed;
    setup.problem = make_poisson_fixture(spec);
    setup.description = "synthetic poisson n=" + std::to_string(spec.samples) +
                        " d=" + std::to_string(spec.features);
  } else if (kind == "synth_lasso") {
    const int d = cfg.get_int("features", 8);
    LassoInstance inst = make_random_lasso(d, seed);
    if (cfg.has("mu")) {
      inst.mu = cfg.get_double("mu", inst.mu);
      inst.problem = make_problem(quadratic_oracle(inst.Q, inst.b),
                                  Regularizer::l1(inst.mu));
    }
    setup.problem = inst.problem;
    setup.description = "synthetic lasso d=" + std::to_string(d);
  } else if (kind == "synth_boxqp") {
    const int d = cfg.get_int("features", 6);
    BoxQpInstance inst = make_random_boxqp(d, seed);
    setup.problem = inst.problem;
    setup.description = "synthetic box QP d=" + std::to_string(d);
  } else {
    throw ConfigError("unknown problem kind: " + kind);
  }

  if (cfg.has("lipschitz"))
    setup.problem.lipschitz_estimate = cfg.get_double("lipschitz", 0.0);
  setup.x0 = detail::build_x0(cfg, setup.problem.dimension(), seed);
  if (setup.problem.reg.is_indicator())
    setup.x0 = setup.problem.reg.prox(setup.x0, 1.0);  // feasible start
  return setup;
}

inline SolverConfig build_solver_config(const KeyValueConfig& cfg) {
  SolverConfig config;
  const std::string n = cfg.get_string("n", "1");
  config.refresh = n == "inf" ? RefreshSchedule::chord()
                              : RefreshSchedule::every(std::stoi(n));
  const std::string hessian = cfg.get_string("hessian", "exact");
  if (hessian == "exact") {
    config.curvature = SolverConfig::Curvature::exact;
  } else if (hessian == "lbfgs") {
    config.curvature = SolverConfig::Curvature::lbfgs;
    config.lbfgs_memory = cfg.get_int("lbfgs_memory", 50);
  } else {
    throw ConfigError("unknown hessian mode: " + hessian);
  }

  const std::string rule = cfg.get_string("stop_rule", "fixed");
  if (rule == "fixed") {
    config.subproblem.kind = StopRule::Kind::fixed_tolerance;
    config.subproblem.epsilon = cfg.get_double("epsilon", 1e-10);
  } else if (rule == "forcing") {
    config.subproblem.kind = StopRule::Kind::forcing;
    config.subproblem.gamma = cfg.get_double("gamma", 1.0);
    config.subproblem.eta_bar = cfg.get_double("eta_bar", 0.1);
    config.subproblem.adaptive_eta = cfg.get_bool("adaptive_eta", true);
  } else if (rule == "max_inner") {
    config.subproblem.kind = StopRule::Kind::max_inner_iters;
    config.subproblem.max_inner = cfg.get_int("max_inner", 5);
  } else {
    throw ConfigError("unknown stop rule: " + rule);
  }
  if (rule != "max_inner")
    config.subproblem.max_inner = cfg.get_int("max_inner", 1000);

  config.tol_G = cfg.get_double("tol_g", 0.0);
  config.max_iters = cfg.get_int("max_iters", 500);
  config.time_budget_s = cfg.get_double("time_budget_s", kInfinity);
  config.ls_shrink = cfg.get_double("ls_shrink", 0.5);
  config.ls_budget = cfg.get_int("ls_budget", 50);
  config.eta_min = cfg.get_double("eta_min", 1e-10);
  config.record_wall_time = cfg.get_string("timing", "real") == "real";
  return config;
}

/// Echo of the effective settings, for reproducibility blocks in outputs.
inline void write_config_echo(std::ostream& out, const std::string& prefix,
                              const SolverConfig& config) {
  out << prefix << "n="
      << (config.refresh.is_chord() ? std::string("inf")
                                    : std::to_string(config.refresh.period))
      << '\n';
  out << prefix << "hessian="
      << (config.curvature == SolverConfig::Curvature::exact ? "exact" : "lbfgs")
      << '\n';
  if (config.curvature == SolverConfig::Curvature::lbfgs)
    out << prefix << "lbfgs_memory=" << config.lbfgs_memory << '\n';
  switch (config.subproblem.kind) {
    case StopRule::Kind::fixed_tolerance:
      out << prefix << "stop_rule=fixed\n"
          << prefix << "epsilon=" << format_double(config.subproblem.epsilon)
          << '\n';
      break;
    case StopRule::Kind::forcing:
      out << prefix << "stop_rule=forcing\n"
          << prefix << "gamma=" << format_double(config.subproblem.gamma) << '\n'
          << prefix << "eta_bar=" << format_double(config.subproblem.eta_bar)
          << '\n'
          << prefix << "adaptive_eta="
          << (config.subproblem.adaptive_eta ? "true" : "false") << '\n';
      break;
    case StopRule::Kind::max_inner_iters:
      out << prefix << "stop_rule=max_inner\n";
      break;
  }
  out << prefix << "max_inner=" << config.subproblem.max_inner << '\n';
  out << prefix << "tol_g=" << format_double(config.tol_G) << '\n';
  out << prefix << "max_iters=" << config.max_iters << '\n';
}

struct Summary {
  std::string label;
  std::uint64_t seed = 0;
  std::string status;
  int iterations = 0;
  double final_F = 0.0;
  double final_norm_G = 0.0;
  int hess_evals = 0;
  double wall_s = 0.0;
};

inline Summary summarize(const std::string& label, std::uint64_t seed,
                         const SolveResult& result) {
  Summary s;
  s.label = label;
  s.seed = seed;
  s.status = to_string(result.status);
  const TraceRecord& last = result.trace.back();
  s.iterations = last.t;
  s.final_F = last.F;
  s.final_norm_G = last.norm_G;
  s.hess_evals = last.hess_evals;
  s.wall_s = last.wall_s;
  return s;
}

inline void write_summary(std::ostream& out, const Summary& s,
                          const SolverConfig& config) {
  out << "label=" << s.label << '\n'
      << "seed=" << s.seed << '\n'
      << "status=" << s.status << '\n'
      << "iterations=" << s.iterations << '\n'
      << "final_F=" << format_double(s.final_F) << '\n'
      << "final_normG=" << format_double(s.final_norm_G) << '\n'
      << "hess_evals=" << s.hess_evals << '\n'
      << "wall_s=" << format_double(s.wall_s) << '\n';
  write_config_echo(out, "config.", config);
}

struct RunArtifacts {
  std::string trace_path;
  std::string summary_path;
  std::string audit_path;
  Summary summary;
  int exit_code = 0;
};

inline int exit_code_for(SolveStatus status) {
  switch (status) {
    case SolveStatus::converged:
      return 0;
    case SolveStatus::iter_budget:
    case SolveStatus::time_budget:
      return 2;
    default:
      return 1;
  }
}

namespace detail {

inline std::filesystem::path resolve_out_dir(const KeyValueConfig& cfg,
                                             const CliOverrides& overrides) {
  const std::string dir =
      overrides.out_dir.value_or(cfg.get_string("out", "."));
  std::filesystem::create_directories(dir);
  return dir;
}

inline std::uint64_t resolve_seed(const KeyValueConfig& cfg,
                                  const CliOverrides& overrides) {
  if (overrides.seed) return *overrides.seed;
  return static_cast<std::uint64_t>(cfg.get_int("seed", 1));
}

inline SolveResult dispatch_solver(const std::string& solver,
                                   const CompositeProblem& problem,
                                   const Vector& x0, const SolverConfig& config) {
  if (solver == "generic") return solve_generic(problem, x0, config);
  if (solver == "inexact") return solve_inexact(problem, x0, config);
  if (solver == "ista")
    return solve_baseline(problem, x0, BaselineVariant::ista, config);
  if (solver == "fista")
    return solve_baseline(problem, x0, BaselineVariant::fista, config);
  throw ConfigError("unknown solver: " + solver);
}

inline void write_file(const std::filesystem::path& path,
                       const std::function<void(std::ostream&)>& body) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write output file: " + path.string());
  body(out);
}

inline double cumulative_inner(const std::vector<TraceRecord>& trace) {
  double total = 0.0;
  for (const TraceRecord& row : trace) total += row.inner_iters;
  return total;
}

}  // namespace detail

/// Run one configured solve; writes trace, summary, and audit artifacts.
inline RunArtifacts run_solve(const KeyValueConfig& cfg,
                              const CliOverrides& overrides) {
  const std::uint64_t seed = detail::resolve_seed(cfg, overrides);
  const std::filesystem::path out_dir = detail::resolve_out_dir(cfg, overrides);
  const std::string label = cfg.get_string("label", "run");

  ProblemSetup setup = build_problem(cfg, seed);
  SolverConfig config = build_solver_config(cfg);
  const std::string solver = cfg.get_string("solver", "generic");

  SolveResult result = detail::dispatch_solver(solver, setup.problem, setup.x0, config);

  RunArtifacts artifacts;
  artifacts.trace_path = (out_dir / (label + "_trace.csv")).string();
  artifacts.summary_path = (out_dir / (label + "_summary.txt")).string();
  artifacts.audit_path = (out_dir / (label + "_audit.txt")).string();
  artifacts.summary = summarize(label, seed, result);
  artifacts.exit_code = exit_code_for(result.status);

  detail::write_file(artifacts.trace_path,
                     [&](std::ostream& out) { write_trace_csv(out, result.trace); });
  detail::write_file(artifacts.summary_path, [&](std::ostream& out) {
    write_summary(out, artifacts.summary, config);
  });

  AuditReport report;
  report.descent = audit_descent(result.trace);
  if (config.subproblem.kind == StopRule::Kind::forcing)
    report.forcing = audit_forcing_decay(result.trace,
                                         config.subproblem.adaptive_eta,
                                         result.converged());
  detail::write_file(artifacts.audit_path,
                     [&](std::ostream& out) { report.write_kv(out); });
  return artifacts;
}

inline int cmd_solve(const std::string& config_path, const CliOverrides& overrides) {
  try {
    const KeyValueConfig cfg = KeyValueConfig::from_file(config_path);
    RunArtifacts artifacts = run_solve(cfg, overrides);
    if (!overrides.quiet) {
      std::cout << "run " << artifacts.summary.label << ": "
                << artifacts.summary.status << " after "
                << artifacts.summary.iterations
                << " iterations, final normG = "
                << format_double(artifacts.summary.final_norm_G) << '\n'
                << "trace: " << artifacts.trace_path << '\n';
    }
    return artifacts.exit_code;
  } catch (const std::exception& e) {
    std::cerr << "solve failed: " << e.what() << '\n';
    return 1;
  }
}

struct BenchRow {
  std::string variant;
  std::string status;
  int iterations = 0;
  double cum_inner = 0.0;
  int hess_evals = 0;
  double wall_s = 0.0;
  double final_F = 0.0;
  double final_norm_G = 0.0;
  bool failed = false;
  std::string error;
};

/// The four stopping-rule variants plus first-order baselines, sharing one
/// problem and start point.
inline int cmd_bench(const std::string& config_path, const CliOverrides& overrides) {
  try {
    const KeyValueConfig cfg = KeyValueConfig::from_file(config_path);
    const std::uint64_t seed = detail::resolve_seed(cfg, overrides);
    const std::filesystem::path out_dir = detail::resolve_out_dir(cfg, overrides);
    const ProblemSetup setup = build_problem(cfg, seed);
    SolverConfig base = build_solver_config(cfg);

    struct VariantSpec {
      std::string name;
      std::string solver;
      SolverConfig config;
    };
    std::vector<VariantSpec> variants;
    {
      SolverConfig v = base;
      v.subproblem.kind = StopRule::Kind::fixed_tolerance;
      v.subproblem.epsilon = 1e-4;
      variants.push_back({"fixed_1e-4", "inexact", v});
      v = base;
      v.subproblem.kind = StopRule::Kind::forcing;
      v.subproblem.gamma = 2.0;
      v.subproblem.adaptive_eta = true;
      variants.push_back({"forcing_g2", "inexact", v});
      v.subproblem.gamma = 1.0;
      variants.push_back({"forcing_g1", "inexact", v});
      v = base;
      v.subproblem.kind = StopRule::Kind::max_inner_iters;
      v.subproblem.max_inner = 5;
      variants.push_back({"max_inner_5", "inexact", v});
      variants.push_back({"ista", "ista", base});
      variants.push_back({"fista", "fista", base});
    }

    std::vector<BenchRow> rows;
    std::vector<SolveResult> results(variants.size());
    double F_best = kInfinity;

    for (std::size_t i = 0; i < variants.size(); ++i) {
      BenchRow row;
      row.variant = variants[i].name;
      try {
        results[i] = detail::dispatch_solver(variants[i].solver, setup.problem,
                                             setup.x0, variants[i].config);
        const TraceRecord& last = results[i].trace.back();
        row.status = to_string(results[i].status);
        row.iterations = last.t;
        row.cum_inner = detail::cumulative_inner(results[i].trace);
        row.hess_evals = last.hess_evals;
        row.wall_s = last.wall_s;
        row.final_F = last.F;
        row.final_norm_G = last.norm_G;
        F_best = std::min(F_best, row.final_F);
        detail::write_file(
            out_dir / (row.variant + "_trace.csv"),
            [&](std::ostream& out) { write_trace_csv(out, results[i].trace); });
      } catch (const std::exception& e) {
        row.failed = true;
        row.error = e.what();
        row.status = "error";
      }
      rows.push_back(row);
    }

    // tight reference run anchoring the suboptimality column
    {
      SolverConfig ref = base;
      ref.subproblem.kind = StopRule::Kind::fixed_tolerance;
      ref.subproblem.epsilon = 1e-12;
      ref.refresh = RefreshSchedule::every(1);
      ref.curvature = SolverConfig::Curvature::exact;
      ref.tol_G = cfg.get_double("ref_tol_g", 1e-12);
      ref.max_iters = 10 * base.max_iters;
      SolveResult res = solve_generic(setup.problem, setup.x0, ref);
      F_best = std::min(F_best, res.final_F);
    }

    detail::write_file(out_dir / "bench_summary.csv", [&](std::ostream& out) {
      out << "variant,status,iterations,cum_inner,hess_evals,wall_s,final_F,"
             "final_normG,subopt,seed\n";
      for (const BenchRow& row : rows) {
        out << row.variant << ',' << row.status << ',' << row.iterations << ','
            << format_double(row.cum_inner) << ',' << row.hess_evals << ','
            << format_double(row.wall_s) << ',' << format_double(row.final_F)
            << ',' << format_double(row.final_norm_G) << ','
            << format_double(row.failed ? kInfinity : row.final_F - F_best)
            << ',' << seed << '\n';
      }
    });

    detail::write_file(out_dir / "bench_series.csv", [&](std::ostream& out) {
      out << "variant,t,wall_s,cum_inner,subopt,normG\n";
      for (std::size_t i = 0; i < variants.size(); ++i) {
        if (rows[i].failed) continue;
        double cum = 0.0;
        for (const TraceRecord& row : results[i].trace) {
          cum += row.inner_iters;
          out << rows[i].variant << ',' << row.t << ','
              << format_double(row.wall_s) << ',' << format_double(cum) << ','
              << format_double(row.F - F_best) << ','
              << format_double(row.norm_G) << '\n';
        }
      }
    });

    if (!overrides.quiet) {
      std::cout << "variant            status        iters  cum_inner  wall_s\n";
      for (const BenchRow& row : rows) {
        std::cout << row.variant;
        for (std::size_t pad = row.variant.size(); pad < 19; ++pad) std::cout << ' ';
        std::cout << row.status;
        for (std::size_t pad = row.status.size(); pad < 14; ++pad) std::cout << ' ';
        std::cout << row.iterations << "  " << row.cum_inner << "  " << row.wall_s
                  << (row.failed ? "  [" + row.error + "]" : "") << '\n';
      }
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "bench failed: " << e.what() << '\n';
    return 1;
  }
}

struct OrderRow {
  int n = 1;
  std::string rule;
  double predicted = 0.0;
  double measured = 0.0;
  double cycle_product = 0.0;
  bool indeterminate = false;
};

/// Refresh-period sweep with measured vs predicted orders of convergence.
inline int cmd_order(const std::string& config_path, const CliOverrides& overrides) {
  try {
    const KeyValueConfig cfg = KeyValueConfig::from_file(config_path);
    const std::uint64_t seed = detail::resolve_seed(cfg, overrides);
    const std::filesystem::path out_dir = detail::resolve_out_dir(cfg, overrides);
    const ProblemSetup setup = build_problem(cfg, seed);
    SolverConfig base = build_solver_config(cfg);

    std::vector<int> n_list;
    for (const std::string& tok : cfg.get_list("n_list")) n_list.push_back(std::stoi(tok));
    if (n_list.empty()) n_list = {1, 2, 3};
    std::vector<std::string> rules = cfg.get_list("rules");
    if (rules.empty()) rules = {"exact"};

    // reference solution from an independent high-budget run
    Vector x_ref;
    {
      SolverConfig ref = base;
      ref.refresh = RefreshSchedule::every(1);
      ref.curvature = SolverConfig::Curvature::exact;
      ref.subproblem.kind = StopRule::Kind::fixed_tolerance;
      ref.subproblem.epsilon = 1e-12;
      ref.tol_G = cfg.get_double("ref_tol_g", 1e-12);
      ref.max_iters = 10 * base.max_iters;
      x_ref = solve_generic(setup.problem, setup.x0, ref).x;
    }

    std::vector<OrderRow> rows;
    for (int n : n_list) {
      for (const std::string& rule : rules) {
        OrderRow row;
        row.n = n;
        row.rule = rule;
        SolverConfig config = base;
        config.refresh = RefreshSchedule::every(n);
        SolveResult result;
        if (rule == "exact") {
          config.subproblem.kind = StopRule::Kind::fixed_tolerance;
          config.subproblem.epsilon = cfg.get_double("epsilon", 1e-10);
          row.predicted = predicted_order_exact(n);
          result = solve_generic(setup.problem, setup.x0, config);
        } else {
          const double gamma = std::stod(rule);
          config.subproblem.kind = StopRule::Kind::forcing;
          config.subproblem.gamma = gamma;
          config.subproblem.adaptive_eta = false;  // constant eta_bar schedule
          row.predicted = gamma >= 2.0 ? predicted_order_exact(n)
                                       : predicted_order_forcing(n, gamma);
          result = solve_inexact(setup.problem, setup.x0, config);
        }
        try {
          OrderEstimate est = estimate_order(result.iterates, x_ref, n);
          row.measured = est.p_hat;
          row.cycle_product = est.cycle_product;
        } catch (const InsufficientDataError&) {
          row.indeterminate = true;
        }
        rows.push_back(row);
      }
    }

    detail::write_file(out_dir / "order_table.csv", [&](std::ostream& out) {
      out << "n,rule,predicted,measured,cycle_product,status,seed\n";
      for (const OrderRow& row : rows) {
        out << row.n << ',' << row.rule << ',' << format_double(row.predicted)
            << ',' << (row.indeterminate ? "nan" : format_double(row.measured))
            << ','
            << (row.indeterminate ? "nan" : format_double(row.cycle_product))
            << ',' << (row.indeterminate ? "indeterminate" : "ok") << ','
            << seed << '\n';
      }
    });

    if (!overrides.quiet) {
      std::cout << "n  rule    predicted  measured\n";
      for (const OrderRow& row : rows) {
        std::cout << row.n << "  " << row.rule << "  " << row.predicted << "  ";
        if (row.indeterminate)
          std::cout << "indeterminate\n";
        else
          std::cout << row.measured << '\n';
      }
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "order failed: " << e.what() << '\n';
    return 1;
  }
}

/// Lazy L-BFGS proximal Newton vs per-iteration proximal Newton vs baselines.
inline int cmd_compare(const std::string& config_path, const CliOverrides& overrides) {
  try {
    const KeyValueConfig cfg = KeyValueConfig::from_file(config_path);
    const std::uint64_t seed = detail::resolve_seed(cfg, overrides);
    const std::filesystem::path out_dir = detail::resolve_out_dir(cfg, overrides);
    const ProblemSetup setup = build_problem(cfg, seed);
    SolverConfig base = build_solver_config(cfg);

    struct MethodSpec {
      std::string name;
      std::string solver;
      SolverConfig config;
    };
    std::vector<MethodSpec> methods;
    {
      SolverConfig m = base;
      m.refresh = RefreshSchedule::every(cfg.get_int("lazy_n", 3));
      m.curvature = SolverConfig::Curvature::lbfgs;
      m.lbfgs_memory = cfg.get_int("lbfgs_memory", 50);
      m.subproblem.kind = StopRule::Kind::forcing;
      m.subproblem.gamma = 1.0;
      m.subproblem.adaptive_eta = true;
      methods.push_back({"lazy_lbfgs_n3", "generic", m});

      m = base;
      m.refresh = RefreshSchedule::every(1);
      m.curvature = SolverConfig::Curvature::exact;
      m.subproblem.kind = StopRule::Kind::forcing;
      m.subproblem.gamma = 1.0;
      m.subproblem.adaptive_eta = true;
      methods.push_back({"proxnewton_n1", "generic", m});

      methods.push_back({"ista", "ista", base});
      methods.push_back({"fista", "fista", base});
    }

    std::vector<BenchRow> rows;
    std::vector<SolveResult> results(methods.size());
    double F_best = kInfinity;
    for (std::size_t i = 0; i < methods.size(); ++i) {
      BenchRow row;
      row.variant = methods[i].name;
      try {
        results[i] = detail::dispatch_solver(methods[i].solver, setup.problem,
                                             setup.x0, methods[i].config);
        const TraceRecord& last = results[i].trace.back();
        row.status = to_string(results[i].status);
        row.iterations = last.t;
        row.cum_inner = detail::cumulative_inner(results[i].trace);
        row.hess_evals = last.hess_evals;
        row.wall_s = last.wall_s;
        row.final_F = last.F;
        row.final_norm_G = last.norm_G;
        F_best = std::min(F_best, row.final_F);
        detail::write_file(
            out_dir / (row.variant + "_trace.csv"),
            [&](std::ostream& out) { write_trace_csv(out, results[i].trace); });
      } catch (const std::exception& e) {
        row.failed = true;
        row.error = e.what();
        row.status = "error";
      }
      rows.push_back(row);
    }

    {
      SolverConfig ref = base;
      ref.subproblem.kind = StopRule::Kind::fixed_tolerance;
      ref.subproblem.epsilon = 1e-12;
      ref.refresh = RefreshSchedule::every(1);
      ref.curvature = SolverConfig::Curvature::exact;
      ref.tol_G = cfg.get_double("ref_tol_g", 1e-12);
      ref.max_iters = 10 * base.max_iters;
      SolveResult res = solve_generic(setup.problem, setup.x0, ref);
      F_best = std::min(F_best, res.final_F);
    }

    detail::write_file(out_dir / "compare_summary.csv", [&](std::ostream& out) {
      out << "method,status,iterations,cum_inner,hess_evals,wall_s,final_F,"
             "final_normG,subopt,seed\n";
      for (const BenchRow& row : rows) {
        out << row.variant << ',' << row.status << ',' << row.iterations << ','
            << format_double(row.cum_inner) << ',' << row.hess_evals << ','
            << format_double(row.wall_s) << ',' << format_double(row.final_F)
            << ',' << format_double(row.final_norm_G) << ','
            << format_double(row.failed ? kInfinity : row.final_F - F_best)
            << ',' << seed << '\n';
      }
    });

    detail::write_file(out_dir / "compare_series.csv", [&](std::ostream& out) {
      out << "method,t,wall_s,subopt,normG\n";
      for (std::size_t i = 0; i < methods.size(); ++i) {
        if (rows[i].failed) continue;
        for (const TraceRecord& row : results[i].trace)
          out << rows[i].variant << ',' << row.t << ','
              << format_double(row.wall_s) << ','
              << format_double(row.F - F_best) << ','
              << format_double(row.norm_G) << '\n';
      }
    });

    detail::write_file(out_dir / "compare_config.txt", [&](std::ostream& out) {
      out << "problem=" << setup.description << '\n' << "seed=" << seed << '\n';
      for (const MethodSpec& method : methods) {
        out << "[" << method.name << "]\n";
        write_config_echo(out, method.name + ".", method.config);
      }
    });

    if (!overrides.quiet) {
      std::cout << "method           status       iters  hess_evals  final_F\n";
      for (const BenchRow& row : rows) {
        std::cout << row.variant;
        for (std::size_t pad = row.variant.size(); pad < 17; ++pad) std::cout << ' ';
        std::cout << row.status;
        for (std::size_t pad = row.status.size(); pad < 13; ++pad) std::cout << ' ';
        std::cout << row.iterations << "  " << row.hess_evals << "  "
                  << format_double(row.final_F)
                  << (row.failed ? "  [" + row.error + "]" : "") << '\n';
      }
    }
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "compare failed: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace psm
