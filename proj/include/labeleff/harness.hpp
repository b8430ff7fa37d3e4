#pragma once

#include <array>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "labeleff/environments.hpp"
#include "labeleff/forecaster.hpp"

namespace labeleff {

using EnvironmentSpec = std::variant<ThresholdEnvConfig, GapEnvConfig, ScriptedEnv>;

struct ExperimentConfig {
  EnvironmentSpec environment = ThresholdEnvConfig{};
  std::size_t horizon = 0;
  std::size_t num_experts = 0;
  /// Empty means auto: sqrt(8 ln N / n).
  std::optional<double> eta;
  SamplingStrategy strategy;
  std::size_t runs = 1;
  std::uint64_t base_seed = 0;
  std::size_t record_stride = 1;
  /// Worker threads; 0 means std::thread::hardware_concurrency().
  std::size_t threads = 0;
  /// Where a scripted environment was loaded from, for metadata only.
  std::string scripted_path;
};

/// sqrt(8 ln N / n).
double auto_eta(std::size_t num_experts, std::size_t horizon);

/// Learning rate the forecaster runs with: infinite for majority strategies,
/// otherwise the explicit value or auto_eta.
double resolve_eta(const ExperimentConfig& config);

/// Stride used when none is given: 1 up to 1e5 rounds, coarser beyond.
std::size_t default_stride(std::size_t horizon);

/// Throws std::invalid_argument on inconsistent configurations.
void validate(const ExperimentConfig& config);

std::string_view environment_name(const EnvironmentSpec& spec);

/// Environment instance for one run, seeded from (base_seed, run_index).
std::unique_ptr<Environment> make_environment(const ExperimentConfig& config,
                                              std::uint64_t run_index);

enum class Metric {
  Loss,              // cumulative forecaster loss L_t
  OptimalLoss,       // cumulative loss of the Bayes rule (threshold only)
  RegretBest,        // L_t - min_i L_{i,t}
  RegretOptimal,     // L_t - optimal-rule loss (threshold only)
  Labels,            // S_t
  NormalizedRegret,  // regret / t, against the optimal rule when one exists
  LambdaMin,         // min over i != i* of the importance-weighted relative loss
  QueryProbability,  // q_t
};
inline constexpr std::size_t kMetricCount = 8;

std::string_view metric_name(Metric metric);
std::optional<Metric> parse_metric(std::string_view name);

/// Metrics recorded for a given environment, in output order.
std::vector<Metric> metrics_for(const EnvironmentSpec& spec);

struct RunTrace {
  std::vector<std::uint64_t> t;
  std::array<std::vector<double>, kMetricCount> values;
  /// Mean of q_t over the final 10% of rounds.
  double tail_mean_q = 0.0;
  std::uint64_t reveals = 0;
};

/// One independent run. Deterministic in (config, run_index).
RunTrace run_once(const ExperimentConfig& config, std::uint64_t run_index);

struct Estimate {
  double mean = 0.0;
  double ci_lo = 0.0;
  double ci_hi = 0.0;

  double half_width() const { return 0.5 * (ci_hi - ci_lo); }
};

/// Cross-run means with pointwise normal-approximation 95% intervals,
/// mean +/- 1.96 sd / sqrt(runs). With a single run the interval has zero
/// width and `degenerate_ci` is set.
struct MetricsSeries {
  std::size_t runs = 0;
  std::vector<std::uint64_t> t;
  std::vector<Metric> metrics;
  std::array<std::vector<Estimate>, kMetricCount> values;
  Estimate tail_mean_q;
  bool degenerate_ci = false;

  bool has(Metric metric) const;
  /// Throws std::out_of_range for an unrecorded metric.
  const std::vector<Estimate>& at(Metric metric) const;
  const Estimate& final(Metric metric) const { return at(metric).back(); }
};

/// Accumulates run traces in the order they are added.
class SeriesAccumulator {
 public:
  explicit SeriesAccumulator(std::vector<Metric> metrics);
  void add(const RunTrace& trace);
  MetricsSeries finish() const;

 private:
  struct Moments {
    double mean = 0.0;
    double m2 = 0.0;
    void push(double x, std::size_t count);
  };

  std::vector<Metric> metrics_;
  std::vector<std::uint64_t> t_;
  std::array<std::vector<Moments>, kMetricCount> moments_;
  Moments tail_q_;
  std::size_t runs_ = 0;
};

/// All runs, parallel across threads; the reduction follows run order so
/// results do not depend on scheduling.
MetricsSeries run_experiment(const ExperimentConfig& config);

enum class SlopeAxis { Time, Labels };

/// Least-squares slope of ln r(t) against ln t (Time) or ln E[S_t] (Labels)
/// over the last `fit_window` fraction of recorded points. Throws
/// std::invalid_argument with fewer than 10 points or nonpositive values.
double loglog_slope(const MetricsSeries& series, SlopeAxis axis, double fit_window = 0.5);

/// Least-squares slope of y on x.
double least_squares_slope(std::span<const double> x, std::span<const double> y);

/// 50 / (eta delta^2) ln(N ln n / eta) + 3 eta n + 1.
double label_complexity_bound(std::size_t horizon, std::size_t num_experts, double eta,
                              double delta);

/// One-line human summary derived from the series' final row and the
/// configuration.
std::string summary_line(const ExperimentConfig& config, const MetricsSeries& series);

}  // namespace labeleff
