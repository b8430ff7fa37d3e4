#include "labeleff/harness.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <thread>

#include "labeleff/format.hpp"
#include "labeleff/oracle.hpp"

namespace labeleff {
namespace {

constexpr std::uint64_t kEnvironmentStream = 0;
constexpr std::uint64_t kForecasterStream = 1;
constexpr double kZ95 = 1.96;

std::size_t index_of(Metric metric) { return static_cast<std::size_t>(metric); }

std::size_t worker_count(const ExperimentConfig& config) {
  std::size_t threads = config.threads;
  if (threads == 0) threads = std::max<std::size_t>(1, std::thread::hardware_concurrency());
  return std::min(threads, config.runs);
}

}  // namespace

double auto_eta(std::size_t num_experts, std::size_t horizon) {
  return std::sqrt(8.0 * std::log(static_cast<double>(num_experts)) /
                   static_cast<double>(horizon));
}

double resolve_eta(const ExperimentConfig& config) {
  if (config.strategy.hard_elimination()) return kInfiniteEta;
  return config.eta.value_or(auto_eta(config.num_experts, config.horizon));
}

std::size_t default_stride(std::size_t horizon) {
  constexpr std::size_t kFullRecording = 100000;
  return std::max<std::size_t>(1, (horizon + kFullRecording - 1) / kFullRecording);
}

std::string_view environment_name(const EnvironmentSpec& spec) {
  switch (spec.index()) {
    case 0: return "threshold";
    case 1: return "gap";
    default: return "scripted";
  }
}

void validate(const ExperimentConfig& config) {
  if (config.horizon == 0) throw std::invalid_argument("horizon must be positive");
  if (config.num_experts == 0) throw std::invalid_argument("need at least one expert");
  if (config.runs == 0) throw std::invalid_argument("runs must be positive");
  if (config.record_stride == 0) throw std::invalid_argument("stride must be positive");
  if (const auto* threshold = std::get_if<ThresholdEnvConfig>(&config.environment)) {
    auto copy = *threshold;
    copy.num_experts = config.num_experts;
    validate(copy);
  } else if (const auto* gap = std::get_if<GapEnvConfig>(&config.environment)) {
    auto copy = *gap;
    copy.num_experts = config.num_experts;
    validate(copy);
  } else {
    const auto& script = std::get<ScriptedEnv>(config.environment);
    if (script.experts != config.num_experts) {
      throw std::invalid_argument("expert count does not match the scripted environment");
    }
    if (config.horizon > script.horizon) {
      throw std::invalid_argument("horizon exceeds the scripted environment's length");
    }
  }
  if (config.eta && config.strategy.hard_elimination()) {
    throw std::invalid_argument("majority strategies run with an infinite learning rate");
  }
  // init_state performs the remaining learning-rate checks.
  const double eta = resolve_eta(config);
  (void)init_state(config.num_experts, eta, config.strategy);
}

std::unique_ptr<Environment> make_environment(const ExperimentConfig& config,
                                              std::uint64_t run_index) {
  const std::uint64_t seed = derive_seed(config.base_seed, run_index, kEnvironmentStream);
  if (const auto* threshold = std::get_if<ThresholdEnvConfig>(&config.environment)) {
    auto copy = *threshold;
    copy.num_experts = config.num_experts;
    copy.seed = seed;
    return std::make_unique<ThresholdEnv>(copy);
  }
  if (const auto* gap = std::get_if<GapEnvConfig>(&config.environment)) {
    auto copy = *gap;
    copy.num_experts = config.num_experts;
    copy.seed = seed;
    return std::make_unique<GapEnv>(copy);
  }
  return std::make_unique<ScriptedReplay>(std::get<ScriptedEnv>(config.environment));
}

std::string_view metric_name(Metric metric) {
  switch (metric) {
    case Metric::Loss: return "loss";
    case Metric::OptimalLoss: return "opt_loss";
    case Metric::RegretBest: return "regret_best";
    case Metric::RegretOptimal: return "regret_opt";
    case Metric::Labels: return "labels";
    case Metric::NormalizedRegret: return "normalized_regret";
    case Metric::LambdaMin: return "lambda_min";
    case Metric::QueryProbability: return "q";
  }
  return "unknown";
}

std::optional<Metric> parse_metric(std::string_view name) {
  for (std::size_t k = 0; k < kMetricCount; ++k) {
    const auto metric = static_cast<Metric>(k);
    if (metric_name(metric) == name) return metric;
  }
  return std::nullopt;
}

std::vector<Metric> metrics_for(const EnvironmentSpec& spec) {
  std::vector<Metric> metrics{Metric::Loss};
  const bool threshold = std::holds_alternative<ThresholdEnvConfig>(spec);
  if (threshold) metrics.push_back(Metric::OptimalLoss);
  metrics.push_back(Metric::RegretBest);
  if (threshold) metrics.push_back(Metric::RegretOptimal);
  metrics.push_back(Metric::Labels);
  metrics.push_back(Metric::NormalizedRegret);
  if (!std::holds_alternative<ScriptedEnv>(spec)) metrics.push_back(Metric::LambdaMin);
  metrics.push_back(Metric::QueryProbability);
  return metrics;
}

RunTrace run_once(const ExperimentConfig& config, std::uint64_t run_index) {
  const std::size_t n = config.horizon;
  const std::size_t experts = config.num_experts;
  const auto metrics = metrics_for(config.environment);
  const auto records = [&](Metric m) {
    return std::find(metrics.begin(), metrics.end(), m) != metrics.end();
  };
  const bool track_optimal = records(Metric::OptimalLoss);
  const bool track_lambda = records(Metric::LambdaMin);

  auto env = make_environment(config, run_index);
  RandomStream rng(derive_seed(config.base_seed, run_index, kForecasterStream));
  ForecasterState state = init_state(experts, resolve_eta(config), config.strategy);
  const std::optional<std::size_t> best = env->best_expert();
  const LabelSource reveal = [&env] { return env->reveal(); };

  RunTrace trace;
  const std::size_t points = n / config.record_stride + 1;
  trace.t.reserve(points);
  for (Metric m : metrics) trace.values[index_of(m)].reserve(points);

  std::vector<std::uint64_t> expert_loss(experts, 0);
  std::vector<double> lambda(experts, 0.0);
  std::uint64_t loss = 0;
  std::uint64_t optimal_loss = 0;
  std::uint64_t labels = 0;
  const std::size_t tail = std::max<std::size_t>(1, (n + 9) / 10);
  double tail_q = 0.0;

  for (std::size_t t = 1; t <= n; ++t) {
    const auto advice = env->next_round();
    RoundRecord record = step(state, advice, reveal, rng);
    const Bit y = env->score_label();
    score_round(record, y);

    loss += *record.forecaster_loss;
    for (std::size_t i = 0; i < experts; ++i) expert_loss[i] += advice[i] != y;
    if (track_optimal) optimal_loss += *env->optimal_prediction() != y;
    labels += record.queried;
    if (track_lambda && record.queried && best) {
      const auto& losses = *record.expert_losses;
      for (std::size_t i = 0; i < experts; ++i) {
        lambda[i] += (static_cast<double>(losses[i]) - losses[*best]) / record.q;
      }
    }
    if (t > n - tail) tail_q += record.q;

    if (t % config.record_stride != 0 && t != n) continue;
    const double best_loss =
        static_cast<double>(*std::min_element(expert_loss.begin(), expert_loss.end()));
    const double regret_best = static_cast<double>(loss) - best_loss;
    const double regret_opt = static_cast<double>(loss) - static_cast<double>(optimal_loss);
    trace.t.push_back(t);
    for (Metric m : metrics) {
      double value = 0.0;
      switch (m) {
        case Metric::Loss: value = static_cast<double>(loss); break;
        case Metric::OptimalLoss: value = static_cast<double>(optimal_loss); break;
        case Metric::RegretBest: value = regret_best; break;
        case Metric::RegretOptimal: value = regret_opt; break;
        case Metric::Labels: value = static_cast<double>(labels); break;
        case Metric::NormalizedRegret:
          value = (track_optimal ? regret_opt : regret_best) / static_cast<double>(t);
          break;
        case Metric::LambdaMin: {
          double low = std::numeric_limits<double>::quiet_NaN();
          if (best) {
            low = std::numeric_limits<double>::infinity();
            for (std::size_t i = 0; i < experts; ++i) {
              if (i != *best) low = std::min(low, lambda[i]);
            }
            if (std::isinf(low)) low = 0.0;
          }
          value = low;
          break;
        }
        case Metric::QueryProbability: value = record.q; break;
      }
      trace.values[index_of(m)].push_back(value);
    }
  }
  trace.tail_mean_q = tail_q / static_cast<double>(tail);
  trace.reveals = env->reveal_count();
  return trace;
}

// --- aggregation -------------------------------------------------------------

bool MetricsSeries::has(Metric metric) const {
  return std::find(metrics.begin(), metrics.end(), metric) != metrics.end();
}

const std::vector<Estimate>& MetricsSeries::at(Metric metric) const {
  if (!has(metric)) {
    throw std::out_of_range("metric '" + std::string(metric_name(metric)) + "' not recorded");
  }
  return values[index_of(metric)];
}

void SeriesAccumulator::Moments::push(double x, std::size_t count) {
  const double d = x - mean;
  mean += d / static_cast<double>(count);
  m2 += d * (x - mean);
}

SeriesAccumulator::SeriesAccumulator(std::vector<Metric> metrics)
    : metrics_(std::move(metrics)) {}

void SeriesAccumulator::add(const RunTrace& trace) {
  if (runs_ == 0) {
    t_ = trace.t;
    for (Metric m : metrics_) moments_[index_of(m)].assign(t_.size(), {});
  } else if (trace.t != t_) {
    throw std::logic_error("run traces recorded at different rounds");
  }
  ++runs_;
  for (Metric m : metrics_) {
    auto& slots = moments_[index_of(m)];
    const auto& xs = trace.values[index_of(m)];
    for (std::size_t k = 0; k < slots.size(); ++k) slots[k].push(xs[k], runs_);
  }
  tail_q_.push(trace.tail_mean_q, runs_);
}

MetricsSeries SeriesAccumulator::finish() const {
  MetricsSeries series;
  series.runs = runs_;
  series.t = t_;
  series.metrics = metrics_;
  series.degenerate_ci = runs_ < 2;
  const auto estimate = [this](const Moments& m) {
    double half = 0.0;
    if (runs_ >= 2) {
      const double sd = std::sqrt(m.m2 / static_cast<double>(runs_ - 1));
      half = kZ95 * sd / std::sqrt(static_cast<double>(runs_));
    }
    return Estimate{m.mean, m.mean - half, m.mean + half};
  };
  for (Metric m : metrics_) {
    auto& out = series.values[index_of(m)];
    for (const auto& slot : moments_[index_of(m)]) out.push_back(estimate(slot));
  }
  series.tail_mean_q = estimate(tail_q_);
  return series;
}

MetricsSeries run_experiment(const ExperimentConfig& config) {
  validate(config);
  SeriesAccumulator accumulator(metrics_for(config.environment));
  const std::size_t workers = worker_count(config);
  std::vector<RunTrace> batch(workers);
  for (std::size_t first = 0; first < config.runs; first += workers) {
    const std::size_t count = std::min(workers, config.runs - first);
    if (count == 1) {
      batch[0] = run_once(config, first);
    } else {
      std::vector<std::exception_ptr> errors(count);
      std::vector<std::thread> pool;
      pool.reserve(count);
      for (std::size_t k = 0; k < count; ++k) {
        pool.emplace_back([&, k] {
          try {
            batch[k] = run_once(config, first + k);
          } catch (...) {
            errors[k] = std::current_exception();
          }
        });
      }
      for (auto& th : pool) th.join();
      for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
      }
    }
    for (std::size_t k = 0; k < count; ++k) accumulator.add(batch[k]);
  }
  return accumulator.finish();
}

// --- analysis ----------------------------------------------------------------

double least_squares_slope(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size() || x.size() < 2) {
    throw std::invalid_argument("slope fit needs matching inputs with at least 2 points");
  }
  const double count = static_cast<double>(x.size());
  double mx = 0.0;
  double my = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    mx += x[k];
    my += y[k];
  }
  mx /= count;
  my /= count;
  double sxy = 0.0;
  double sxx = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sxy += (x[k] - mx) * (y[k] - my);
    sxx += (x[k] - mx) * (x[k] - mx);
  }
  if (sxx == 0.0) throw std::invalid_argument("slope fit needs distinct x values");
  return sxy / sxx;
}

double loglog_slope(const MetricsSeries& series, SlopeAxis axis, double fit_window) {
  if (!(fit_window > 0.0 && fit_window <= 1.0)) {
    throw std::invalid_argument("fit window must lie in (0, 1]");
  }
  const auto& r = series.at(Metric::NormalizedRegret);
  const std::size_t total = series.t.size();
  const auto window = static_cast<std::size_t>(std::ceil(fit_window * static_cast<double>(total)));
  if (window < 10) throw std::invalid_argument("slope fit needs at least 10 points in the window");

  std::vector<double> xs;
  std::vector<double> ys;
  xs.reserve(window);
  ys.reserve(window);
  for (std::size_t k = total - window; k < total; ++k) {
    const double x = axis == SlopeAxis::Time ? static_cast<double>(series.t[k])
                                             : series.at(Metric::Labels)[k].mean;
    const double y = r[k].mean;
    if (!(x > 0.0) || !(y > 0.0)) {
      throw std::invalid_argument("log-log fit needs positive values in the window");
    }
    xs.push_back(std::log(x));
    ys.push_back(std::log(y));
  }
  return least_squares_slope(xs, ys);
}

double label_complexity_bound(std::size_t horizon, std::size_t num_experts, double eta,
                              double delta) {
  if (horizon < 4) throw std::invalid_argument("label complexity bound needs n >= 4");
  if (num_experts == 0 || !(eta > 0.0) || !(delta > 0.0)) {
    throw std::invalid_argument("label complexity bound needs positive parameters");
  }
  const double n = static_cast<double>(horizon);
  const double log_term = std::log(static_cast<double>(num_experts) * std::log(n) / eta);
  return 50.0 / (eta * delta * delta) * log_term + 3.0 * eta * n + 1.0;
}

std::string summary_line(const ExperimentConfig& config, const MetricsSeries& series) {
  const Metric regret = series.has(Metric::RegretOptimal) ? Metric::RegretOptimal
                                                          : Metric::RegretBest;
  const double eta = resolve_eta(config);
  std::string line = "n=" + std::to_string(series.t.empty() ? 0 : series.t.back()) +
                     " runs=" + std::to_string(series.runs) +
                     " " + std::string(metric_name(regret)) + "=" +
                     format_real(series.final(regret).mean) +
                     " labels=" + format_real(series.final(Metric::Labels).mean);
  if (config.strategy.hard_elimination()) {
    line += " bound=" + format_real(majority_bound(config.strategy.tag, config.num_experts));
  } else {
    line += " eta=" + format_real(eta) +
            " regret_bound=" + format_real(regret_bound(config.num_experts, config.horizon, eta));
    if (const auto* gap = std::get_if<GapEnvConfig>(&config.environment);
        gap && gap->delta > 0.0 && config.horizon >= 4) {
      line += " label_bound=" +
              format_real(label_complexity_bound(config.horizon, config.num_experts, eta,
                                                 gap->delta));
    }
  }
  if (series.degenerate_ci) line += " (single run: zero-width intervals)";
  return line;
}

}  // namespace labeleff
