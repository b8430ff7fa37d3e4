#include "labeleff/cli.hpp"

#include <chrono>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <stdexcept>

#include "CLI11.hpp"
#include "json.hpp"
#include "labeleff/environments.hpp"
#include "labeleff/format.hpp"
#include "labeleff/harness.hpp"
#include "labeleff/oracle.hpp"
#include "labeleff/results_io.hpp"
#include "labeleff/sampling.hpp"

namespace labeleff::cli {
namespace {

// Configuration problems detected after flag parsing; mapped to exit 2.
struct UsageError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// --- simulate ----------------------------------------------------------------

struct SimulateFlags {
  std::string config_path;
  std::string env;
  double kappa = 0.0;
  double tau0 = 0.0;
  double delta = 0.0;
  double base_error = 0.0;
  std::size_t best_index = 0;
  std::uint64_t warmup = 0;
  std::string file;
  std::size_t n = 0;
  std::size_t experts = 0;
  std::string eta;
  std::string strategy;
  double tol = 0.0;
  std::size_t runs = 0;
  std::uint64_t seed = 0;
  std::size_t stride = 0;
  std::size_t threads = 0;
  std::string out;
  std::string meta;
};

struct SimulateOptions {
  CLI::Option* env;
  CLI::Option* kappa;
  CLI::Option* tau0;
  CLI::Option* delta;
  CLI::Option* base_error;
  CLI::Option* best_index;
  CLI::Option* warmup;
  CLI::Option* file;
  CLI::Option* n;
  CLI::Option* experts;
  CLI::Option* eta;
  CLI::Option* strategy;
  CLI::Option* tol;
  CLI::Option* runs;
  CLI::Option* seed;
  CLI::Option* stride;
  CLI::Option* threads;
};

// Flag values after merging the JSON config file underneath the flags.
struct Merged {
  std::optional<std::string> env;
  std::optional<double> kappa, tau0, delta, base_error;
  std::optional<std::size_t> best_index;
  std::optional<std::uint64_t> warmup;
  std::optional<std::string> file;
  std::optional<std::size_t> n, experts;
  std::optional<std::string> eta, strategy;
  std::optional<double> tol;
  std::optional<std::size_t> runs;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> stride, threads;
};

template <typename T>
void take(std::optional<T>& slot, const nlohmann::json& doc, const char* key) {
  if (!doc.contains(key)) return;
  const auto& value = doc.at(key);
  if constexpr (std::is_same_v<T, std::string>) {
    slot = value.is_string() ? value.get<std::string>() : value.dump();
  } else {
    slot = value.get<T>();
  }
}

template <typename T>
void take(std::optional<T>& slot, CLI::Option* option, const T& value) {
  if (option->count() > 0) slot = value;
}

Merged merge(const SimulateFlags& f, const SimulateOptions& o) {
  Merged m;
  if (!f.config_path.empty()) {
    std::ifstream in(f.config_path);
    if (!in) throw UsageError("cannot open config file '" + f.config_path + "'");
    nlohmann::json doc;
    try {
      in >> doc;
      take(m.env, doc, "env");
      take(m.kappa, doc, "kappa");
      take(m.tau0, doc, "tau0");
      take(m.delta, doc, "delta");
      take(m.base_error, doc, "base_error");
      take(m.best_index, doc, "best_index");
      take(m.warmup, doc, "warmup");
      take(m.file, doc, "file");
      take(m.n, doc, "n");
      take(m.experts, doc, "experts");
      take(m.eta, doc, "eta");
      take(m.strategy, doc, "strategy");
      take(m.tol, doc, "tol");
      take(m.runs, doc, "runs");
      take(m.seed, doc, "seed");
      take(m.stride, doc, "stride");
      take(m.threads, doc, "threads");
    } catch (const nlohmann::json::exception& e) {
      throw UsageError("bad config file: " + std::string(e.what()));
    }
  }
  take(m.env, o.env, f.env);
  take(m.kappa, o.kappa, f.kappa);
  take(m.tau0, o.tau0, f.tau0);
  take(m.delta, o.delta, f.delta);
  take(m.base_error, o.base_error, f.base_error);
  take(m.best_index, o.best_index, f.best_index);
  take(m.warmup, o.warmup, f.warmup);
  take(m.file, o.file, f.file);
  take(m.n, o.n, f.n);
  take(m.experts, o.experts, f.experts);
  take(m.eta, o.eta, f.eta);
  take(m.strategy, o.strategy, f.strategy);
  take(m.tol, o.tol, f.tol);
  take(m.runs, o.runs, f.runs);
  take(m.seed, o.seed, f.seed);
  take(m.stride, o.stride, f.stride);
  take(m.threads, o.threads, f.threads);
  return m;
}

ExperimentConfig build_config(const Merged& m) {
  const std::string env = m.env.value_or("threshold");
  const bool threshold = env == "threshold";
  const bool gap = env == "gap";
  const bool scripted = env == "scripted";
  if (!threshold && !gap && !scripted) {
    throw UsageError("--env must be threshold, gap, or scripted");
  }
  if (!threshold && (m.kappa || m.tau0)) {
    throw UsageError("--kappa and --tau0 apply to the threshold environment only");
  }
  if (!gap && (m.delta || m.base_error || m.best_index || m.warmup)) {
    throw UsageError("--delta, --base-error, --best-index, --warmup apply to the gap environment only");
  }
  if (!scripted && m.file) throw UsageError("--file applies to the scripted environment only");

  ExperimentConfig config;
  if (threshold) {
    ThresholdEnvConfig th;
    th.kappa = m.kappa.value_or(2.0);
    th.tau0 = m.tau0.value_or(0.5);
    config.environment = th;
  } else if (gap) {
    GapEnvConfig g;
    g.delta = m.delta.value_or(0.2);
    g.base_error = m.base_error.value_or(0.1);
    g.best_index = m.best_index.value_or(0);
    g.warmup = m.warmup.value_or(0);
    config.environment = g;
  } else {
    if (!m.file) throw UsageError("--env scripted requires --file");
    try {
      config.environment = load_scripted(*m.file);
    } catch (const std::runtime_error& e) {
      throw UsageError(e.what());
    }
    config.scripted_path = *m.file;
  }

  if (scripted) {
    const auto& script = std::get<ScriptedEnv>(config.environment);
    config.horizon = m.n.value_or(script.horizon);
    config.num_experts = m.experts.value_or(script.experts);
  } else {
    if (!m.n) throw UsageError("--n is required");
    if (!m.experts) throw UsageError("--experts is required");
    config.horizon = *m.n;
    config.num_experts = *m.experts;
  }

  try {
    config.strategy.tag = parse_strategy(m.strategy.value_or("qstar-upper"));
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  if (m.tol) config.strategy.tolerance = *m.tol;
  const std::string eta = m.eta.value_or("auto");
  if (eta == "inf") {
    if (!config.strategy.hard_elimination()) {
      throw UsageError("--eta inf requires the majority or boosted strategy");
    }
  } else if (eta != "auto") {
    try {
      std::size_t used = 0;
      config.eta = std::stod(eta, &used);
      if (used != eta.size()) throw std::invalid_argument(eta);
    } catch (const std::exception&) {
      throw UsageError("--eta must be 'auto' or a number");
    }
  }
  config.runs = m.runs.value_or(1);
  config.base_seed = m.seed.value_or(0);
  config.record_stride = m.stride.value_or(default_stride(config.horizon));
  config.threads = m.threads.value_or(0);
  try {
    validate(config);
  } catch (const std::invalid_argument& e) {
    throw UsageError(e.what());
  }
  return config;
}

std::string sidecar_path(const std::string& out) {
  const std::string suffix = ".csv";
  if (out.size() > suffix.size() && out.compare(out.size() - suffix.size(), suffix.size(), suffix) == 0) {
    return out.substr(0, out.size() - suffix.size()) + ".meta.json";
  }
  return out + ".meta.json";
}

int simulate(const SimulateFlags& flags, const SimulateOptions& options, std::ostream& out) {
  const ExperimentConfig config = build_config(merge(flags, options));
  const auto start = std::chrono::steady_clock::now();
  const MetricsSeries series = run_experiment(config);
  const double wall =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();

  std::ofstream csv(flags.out, std::ios::binary);
  if (!csv) throw std::runtime_error("cannot write '" + flags.out + "'");
  write_results_csv(csv, series);
  const std::string meta_path = flags.meta.empty() ? sidecar_path(flags.out) : flags.meta;
  std::ofstream meta(meta_path, std::ios::binary);
  if (!meta) throw std::runtime_error("cannot write '" + meta_path + "'");
  meta << experiment_metadata(config, series, wall).dump(2) << '\n';

  out << summary_line(config, series) << '\n';
  return kExitOk;
}

// --- qstar -------------------------------------------------------------------

struct QStarFlags {
  std::string etas;
  std::size_t grid = 513;
  double tol = kCurveQStarTolerance;
  std::string out;
};

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> values;
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      values.push_back(std::stod(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw UsageError("bad number '" + item + "' in list");
    }
  }
  if (values.empty()) throw UsageError("empty list");
  return values;
}

int qstar(const QStarFlags& flags, std::ostream& out) {
  const auto etas = parse_list(flags.etas);
  for (double eta : etas) {
    if (!(eta > 0.0)) throw UsageError("every eta must be positive");
  }
  if (flags.grid < 2) throw UsageError("--grid must be at least 2");
  if (!(flags.tol > 0.0 && flags.tol < 1.0)) throw UsageError("--tol must lie in (0, 1)");
  const auto rows = q_star_curve(etas, flags.grid, flags.tol);
  if (flags.out.empty() || flags.out == "-") {
    write_q_star_csv(out, rows);
  } else {
    std::ofstream file(flags.out, std::ios::binary);
    if (!file) throw std::runtime_error("cannot write '" + flags.out + "'");
    write_q_star_csv(file, rows);
    out << "wrote " << rows.size() << " rows to " << flags.out << '\n';
  }
  return kExitOk;
}

// --- verify ------------------------------------------------------------------

struct VerifyFlags {
  std::string suite = "all";
  std::size_t max_n = 5;
  std::size_t max_experts = 4;
  std::string etas = "0.25,0.5,1,2";
};

constexpr double kBoundSlack = 1e-9;

std::string compact(const ScriptedEnv& env) {
  std::string text;
  for (std::size_t t = 0; t < env.horizon; ++t) {
    if (t > 0) text += ' ';
    text += static_cast<char>('0' + env.labels[t]);
    text += ':';
    for (Bit b : env.advice_at(t)) text += static_cast<char>('0' + b);
  }
  return text;
}

bool report(const SweepReport& sweep, std::ostream& out) {
  const HorizonSummary* worst = nullptr;
  std::uint64_t environments = 0;
  for (const auto& h : sweep.horizons) {
    environments += h.environments;
    if (!worst || h.margin < worst->margin) worst = &h;
  }
  const bool ok = sweep.passed(kBoundSlack);
  out << (ok ? "PASS" : "FAIL") << " suite=" << sweep.suite
      << " strategy=" << strategy_name(sweep.strategy);
  if (sweep.suite == "general") out << " eta=" << format_real(sweep.eta);
  out << " N=" << (worst ? worst->experts : 0) << " n<=" << sweep.horizons.size()
      << " envs=" << environments;
  if (worst) {
    out << " worst_value=" << format_real(worst->worst_value) << " bound=" << format_real(worst->bound)
        << " margin=" << format_real(worst->margin) << " worst_env=[" << compact(worst->worst_env)
        << "] (label:advice per round)";
  }
  out << '\n';
  return ok;
}

int verify(const VerifyFlags& flags, std::ostream& out) {
  const std::string& suite = flags.suite;
  if (suite != "perfect" && suite != "boosted" && suite != "general" && suite != "all") {
    throw UsageError("--suite must be perfect, boosted, general, or all");
  }
  if (flags.max_n == 0 || flags.max_n > kMaxSweepHorizon) {
    throw UsageError("--max-n must lie in [1, " + std::to_string(kMaxSweepHorizon) + "]");
  }
  if (flags.max_experts < 2) throw UsageError("--max-experts must be at least 2");
  const bool majority = suite == "perfect" || suite == "boosted" || suite == "all";
  const bool general = suite == "general" || suite == "all";
  if (majority && flags.max_experts > kMaxSweepMajorityExperts) {
    throw UsageError("majority suites support at most " +
                     std::to_string(kMaxSweepMajorityExperts) + " experts");
  }
  if (general && flags.max_experts > kMaxSweepGeneralExperts && suite == "general") {
    throw UsageError("the general suite supports at most " +
                     std::to_string(kMaxSweepGeneralExperts) + " experts");
  }
  const auto etas = general ? parse_list(flags.etas) : std::vector<double>{};
  for (double eta : etas) {
    if (!(eta > 0.0)) throw UsageError("every eta must be positive");
  }

  bool ok = true;
  for (std::size_t n = 2; n <= flags.max_experts; ++n) {
    if (suite == "perfect" || suite == "all") {
      ok &= report(sweep_majority(n, flags.max_n, StrategyTag::FollowMajority), out);
    }
    if (suite == "boosted" || suite == "all") {
      ok &= report(sweep_majority(n, flags.max_n, StrategyTag::BoostedMajority), out);
    }
  }
  if (general) {
    const std::size_t top = std::min(flags.max_experts, kMaxSweepGeneralExperts);
    for (std::size_t n = 2; n <= top; ++n) {
      for (double eta : etas) {
        for (auto tag : {StrategyTag::QStarExact, StrategyTag::QStarUpperBound}) {
          ok &= report(sweep_general(n, flags.max_n, eta, SamplingStrategy{tag}), out);
        }
      }
    }
  }
  out << (ok ? "all bounds hold" : "bound violated") << '\n';
  return ok ? kExitOk : kExitViolation;
}

// --- enumerate ---------------------------------------------------------------

struct EnumerateFlags {
  std::size_t experts = 2;
  std::size_t n = 1;
  bool perfect = false;
  bool count_only = false;
  std::string out;
};

int enumerate(const EnumerateFlags& flags, std::ostream& out) {
  if (flags.experts == 0 || flags.experts > kMaxEnumerationExperts || flags.n == 0 ||
      flags.n > kMaxEnumerationHorizon) {
    throw UsageError("enumeration supports 1 <= experts <= 4 and 1 <= n <= 6");
  }
  AdversarialEnumerator walker(flags.experts, flags.n, flags.perfect);
  if (flags.count_only) {
    out << count_adversarial(flags.experts, flags.n, flags.perfect) << '\n';
    return kExitOk;
  }
  std::ofstream file;
  std::ostream* sink = &out;
  if (!flags.out.empty() && flags.out != "-") {
    file.open(flags.out, std::ios::binary);
    if (!file) throw std::runtime_error("cannot write '" + flags.out + "'");
    sink = &file;
  }
  ScriptedEnv env;
  bool first = true;
  while (walker.next(env)) {
    if (!first) *sink << '\n';
    first = false;
    write_scripted(*sink, env);
  }
  return kExitOk;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Label-efficient exponentially weighted forecasters"};
  app.require_subcommand(1);

  SimulateFlags sim;
  auto* simulate_cmd = app.add_subcommand("simulate", "Monte Carlo experiment");
  simulate_cmd->add_option("--config", sim.config_path, "JSON config; flags override it");
  SimulateOptions opts{};
  opts.env = simulate_cmd->add_option("--env", sim.env, "threshold | gap | scripted");
  opts.kappa = simulate_cmd->add_option("--kappa", sim.kappa, "noise exponent (threshold)");
  opts.tau0 = simulate_cmd->add_option("--tau0", sim.tau0, "decision boundary (threshold)");
  opts.delta = simulate_cmd->add_option("--delta", sim.delta, "loss gap (gap)");
  opts.base_error = simulate_cmd->add_option("--base-error", sim.base_error, "best expert error (gap)");
  opts.best_index = simulate_cmd->add_option("--best-index", sim.best_index, "best expert, zero-based (gap)");
  opts.warmup = simulate_cmd->add_option("--warmup", sim.warmup, "rounds before the best expert emerges (gap)");
  opts.file = simulate_cmd->add_option("--file", sim.file, "scripted environment file");
  opts.n = simulate_cmd->add_option("--n", sim.n, "horizon");
  opts.experts = simulate_cmd->add_option("--experts", sim.experts, "number of experts");
  opts.eta = simulate_cmd->add_option("--eta", sim.eta, "learning rate or 'auto'");
  opts.strategy = simulate_cmd->add_option("--strategy", sim.strategy,
                                           "full | majority | boosted | qstar | qstar-upper");
  opts.tol = simulate_cmd->add_option("--tol", sim.tol, "q* solver tolerance");
  opts.runs = simulate_cmd->add_option("--runs", sim.runs, "independent runs");
  opts.seed = simulate_cmd->add_option("--seed", sim.seed, "base seed");
  opts.stride = simulate_cmd->add_option("--stride", sim.stride, "record every k rounds");
  opts.threads = simulate_cmd->add_option("--threads", sim.threads, "worker threads (0 = all)");
  simulate_cmd->add_option("--out", sim.out, "results CSV")->required();
  simulate_cmd->add_option("--meta", sim.meta, "metadata JSON (default: next to --out)");

  QStarFlags qs;
  auto* qstar_cmd = app.add_subcommand("qstar", "Tabulate q*(x, eta)");
  qstar_cmd->add_option("--etas", qs.etas, "comma-separated learning rates")->required();
  qstar_cmd->add_option("--grid", qs.grid, "x grid points")->capture_default_str();
  qstar_cmd->add_option("--tol", qs.tol, "solver tolerance")->capture_default_str();
  qstar_cmd->add_option("--out", qs.out, "CSV path ('-' for stdout)");

  VerifyFlags vf;
  auto* verify_cmd = app.add_subcommand("verify", "Exhaustive exact bound checks");
  verify_cmd->add_option("--suite", vf.suite, "perfect | boosted | general | all")->capture_default_str();
  verify_cmd->add_option("--max-n", vf.max_n, "largest horizon")->capture_default_str();
  verify_cmd->add_option("--max-experts", vf.max_experts, "largest expert count")->capture_default_str();
  verify_cmd->add_option("--etas", vf.etas, "learning rates for the general suite")->capture_default_str();

  EnumerateFlags ef;
  auto* enumerate_cmd = app.add_subcommand("enumerate", "List adversarial sequences");
  enumerate_cmd->add_option("--experts", ef.experts, "number of experts")->capture_default_str();
  enumerate_cmd->add_option("--n", ef.n, "horizon")->capture_default_str();
  enumerate_cmd->add_flag("--perfect", ef.perfect, "keep sequences with a perfect expert");
  enumerate_cmd->add_flag("--count", ef.count_only, "print only the number of sequences");
  enumerate_cmd->add_option("--out", ef.out, "output path ('-' for stdout)");

  std::vector<const char*> argv;
  argv.reserve(args.size());
  for (const auto& a : args) argv.push_back(a.c_str());
  try {
    app.parse(static_cast<int>(argv.size()), argv.data());
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitUsage;
  }

  try {
    if (*simulate_cmd) return simulate(sim, opts, out);
    if (*qstar_cmd) return qstar(qs, out);
    if (*verify_cmd) return verify(vf, out);
    if (*enumerate_cmd) return enumerate(ef, out);
  } catch (const UsageError& e) {
    err << "error: " << e.what() << "\n\n";
    for (auto* sub : app.get_subcommands()) err << sub->help();
    return kExitUsage;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitUsage;
  }
  return kExitUsage;
}

}  // namespace labeleff::cli
