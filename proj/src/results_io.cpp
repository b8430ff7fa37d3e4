#include "labeleff/results_io.hpp"

#include <charconv>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "labeleff/format.hpp"
#include "labeleff/oracle.hpp"

namespace labeleff {
namespace {

constexpr const char* kHeader = "t,metric,mean,ci_lo,ci_hi,runs";

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> fields;
  std::string field;
  std::istringstream in(line);
  while (std::getline(in, field, ',')) fields.push_back(field);
  return fields;
}

double parse_real(const std::string& text, std::size_t line_no) {
  // strtod handles nan/inf spellings produced by fmt.
  char* end = nullptr;
  const double value = std::strtod(text.c_str(), &end);
  if (text.empty() || end != text.c_str() + text.size()) {
    throw std::runtime_error("results csv line " + std::to_string(line_no) +
                             ": bad number '" + text + "'");
  }
  return value;
}

std::uint64_t parse_count(const std::string& text, std::size_t line_no) {
  std::uint64_t value = 0;
  const auto [ptr, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
  if (ec != std::errc{} || ptr != text.data() + text.size()) {
    throw std::runtime_error("results csv line " + std::to_string(line_no) +
                             ": bad integer '" + text + "'");
  }
  return value;
}

nlohmann::json environment_json(const ExperimentConfig& config) {
  nlohmann::json env;
  env["kind"] = std::string(environment_name(config.environment));
  if (const auto* th = std::get_if<ThresholdEnvConfig>(&config.environment)) {
    env["tau0"] = th->tau0;
    env["kappa"] = th->kappa;
    env["optimal_risk"] = optimal_risk(*th);
  } else if (const auto* gap = std::get_if<GapEnvConfig>(&config.environment)) {
    env["delta"] = gap->delta;
    env["base_error"] = gap->base_error;
    env["best_index"] = gap->best_index;
    env["warmup"] = gap->warmup;
  } else {
    env["file"] = config.scripted_path;
  }
  return env;
}

}  // namespace

void write_results_csv(std::ostream& out, const MetricsSeries& series) {
  out << kHeader << '\n';
  for (std::size_t k = 0; k < series.t.size(); ++k) {
    for (Metric m : series.metrics) {
      const Estimate& e = series.at(m)[k];
      out << series.t[k] << ',' << metric_name(m) << ',' << format_real(e.mean) << ','
          << format_real(e.ci_lo) << ',' << format_real(e.ci_hi) << ',' << series.runs
          << '\n';
    }
  }
}

MetricsSeries read_results_csv(std::istream& in) {
  std::string line;
  if (!std::getline(in, line) || line != kHeader) {
    throw std::runtime_error("results csv: missing or unexpected header");
  }
  MetricsSeries series;
  std::size_t line_no = 1;
  bool metrics_known = false;
  std::size_t column = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    const auto fields = split_fields(line);
    if (fields.size() != 6) {
      throw std::runtime_error("results csv line " + std::to_string(line_no) +
                               ": expected 6 fields");
    }
    const std::uint64_t t = parse_count(fields[0], line_no);
    const auto metric = parse_metric(fields[1]);
    if (!metric) {
      throw std::runtime_error("results csv line " + std::to_string(line_no) +
                               ": unknown metric '" + fields[1] + "'");
    }
    const Estimate estimate{parse_real(fields[2], line_no), parse_real(fields[3], line_no),
                            parse_real(fields[4], line_no)};
    const auto runs = static_cast<std::size_t>(parse_count(fields[5], line_no));

    if (series.t.empty() || series.t.back() != t) {
      if (!series.t.empty()) {
        metrics_known = true;
        if (column != series.metrics.size()) {
          throw std::runtime_error("results csv: incomplete metric block before t=" +
                                   std::to_string(t));
        }
      }
      series.t.push_back(t);
      column = 0;
    }
    if (!metrics_known) {
      series.metrics.push_back(*metric);
      series.runs = runs;
    } else if (column >= series.metrics.size() || series.metrics[column] != *metric) {
      throw std::runtime_error("results csv line " + std::to_string(line_no) +
                               ": metric order differs between rounds");
    }
    series.values[static_cast<std::size_t>(*metric)].push_back(estimate);
    ++column;
  }
  if (!series.t.empty() && column != series.metrics.size()) {
    throw std::runtime_error("results csv: incomplete final metric block");
  }
  series.degenerate_ci = series.runs < 2;
  return series;
}

nlohmann::json experiment_metadata(const ExperimentConfig& config,
                                   const MetricsSeries& series, double wall_seconds) {
  const double eta = resolve_eta(config);
  nlohmann::json meta;
  meta["version"] = kVersion;
  meta["environment"] = environment_json(config);
  meta["horizon"] = config.horizon;
  meta["num_experts"] = config.num_experts;
  meta["strategy"] = std::string(strategy_name(config.strategy.tag));
  if (config.strategy.tag == StrategyTag::QStarExact) {
    meta["q_star_tolerance"] = config.strategy.tolerance;
  }
  if (config.strategy.hard_elimination()) {
    meta["eta"] = "inf";
    meta["bound"] = majority_bound(config.strategy.tag, config.num_experts);
  } else {
    meta["eta"] = eta;
    meta["eta_mode"] = config.eta ? "explicit" : "auto";
    meta["regret_bound"] = regret_bound(config.num_experts, config.horizon, eta);
    if (const auto* gap = std::get_if<GapEnvConfig>(&config.environment);
        gap && gap->delta > 0.0 && config.horizon >= 4) {
      meta["label_complexity_bound"] =
          label_complexity_bound(config.horizon, config.num_experts, eta, gap->delta);
    }
  }
  meta["runs"] = config.runs;
  meta["base_seed"] = config.base_seed;
  meta["seeding"] = "splitmix64(base_seed, run_index, stream) into mt19937_64";
  meta["record_stride"] = config.record_stride;
  meta["ci_method"] = "normal approximation, mean +/- 1.96 sd / sqrt(runs)";
  meta["degenerate_ci"] = series.degenerate_ci;
  meta["tail_mean_q"] = {{"mean", series.tail_mean_q.mean},
                         {"ci_lo", series.tail_mean_q.ci_lo},
                         {"ci_hi", series.tail_mean_q.ci_hi}};
  meta["wall_clock_seconds"] = wall_seconds;
  return meta;
}

}  // namespace labeleff
