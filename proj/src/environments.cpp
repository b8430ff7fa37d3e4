#include "labeleff/environments.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace labeleff {

std::span<const Bit> Environment::next_round() {
  ++rounds_;
  revealed_this_round_ = false;
  return generate_round();
}

Bit Environment::reveal() {
  if (rounds_ == 0) throw std::logic_error("reveal() before the first round");
  if (!revealed_this_round_) {
    revealed_this_round_ = true;
    ++reveals_;
  }
  return current_label();
}

// --- threshold model -------------------------------------------------------

void validate(const ThresholdEnvConfig& config) {
  if (!(config.tau0 >= 0.0 && config.tau0 <= 1.0)) {
    throw std::invalid_argument("tau0 must lie in [0, 1]");
  }
  if (!(config.kappa > 1.0) || std::isinf(config.kappa)) {
    throw std::invalid_argument("kappa must be finite and greater than 1");
  }
  if (config.num_experts < 3 || config.num_experts % 2 == 0) {
    throw std::invalid_argument("threshold environment needs an odd number (>= 3) of experts");
  }
}

double label_probability(const ThresholdEnvConfig& config, double x) {
  const double d = x - config.tau0;
  if (d == 0.0) return 0.5;
  const double magnitude = 0.5 * std::pow(std::abs(d), config.kappa - 1.0);
  return d > 0.0 ? 0.5 + magnitude : 0.5 - magnitude;
}

void threshold_advice(std::size_t num_experts, double x, std::vector<Bit>& advice) {
  advice.resize(num_experts);
  const double spacing = static_cast<double>(num_experts - 1);
  for (std::size_t i = 0; i < num_experts; ++i) {
    advice[i] = x >= static_cast<double>(i) / spacing ? 1 : 0;
  }
}

ThresholdRound threshold_round(const ThresholdEnvConfig& config, RandomStream& rng) {
  ThresholdRound round;
  round.x = rng.uniform();
  round.label = rng.bernoulli(label_probability(config, round.x));
  round.optimal_prediction = round.x >= config.tau0 ? 1 : 0;
  threshold_advice(config.num_experts, round.x, round.advice);
  return round;
}

double optimal_risk(const ThresholdEnvConfig& config) {
  const double k = config.kappa;
  return 0.5 - (std::pow(config.tau0, k) + std::pow(1.0 - config.tau0, k)) / (2.0 * k);
}

std::optional<std::size_t> threshold_optimal_expert(const ThresholdEnvConfig& config) {
  const double position = config.tau0 * static_cast<double>(config.num_experts - 1);
  const double index = std::round(position);
  if (std::abs(position - index) > 1e-9) return std::nullopt;
  return static_cast<std::size_t>(index);
}

ThresholdEnv::ThresholdEnv(ThresholdEnvConfig config)
    : config_(config), rng_(config.seed) {
  validate(config_);
  best_ = threshold_optimal_expert(config_);
}

std::span<const Bit> ThresholdEnv::generate_round() {
  round_ = threshold_round(config_, rng_);
  return round_.advice;
}

// --- gap model -------------------------------------------------------------

void validate(const GapEnvConfig& config) {
  if (!(config.delta >= 0.0 && config.delta < 1.0)) {
    throw std::invalid_argument("delta must lie in [0, 1)");
  }
  if (!(config.base_error >= 0.0 && config.base_error + config.delta < 1.0)) {
    throw std::invalid_argument("base_error must be >= 0 with base_error + delta < 1");
  }
  if (config.num_experts == 0) throw std::invalid_argument("need at least one expert");
  if (config.best_index >= config.num_experts) {
    throw std::invalid_argument("best_index out of range");
  }
}

double gap_error_probability(const GapEnvConfig& config, std::size_t expert,
                             std::uint64_t t) {
  if (t <= config.warmup || expert != config.best_index) {
    return config.base_error + config.delta;
  }
  return config.base_error;
}

GapRound gap_round(const GapEnvConfig& config, std::uint64_t t, RandomStream& rng) {
  GapRound round;
  round.label = rng.bernoulli(0.5);
  round.advice.resize(config.num_experts);
  for (std::size_t i = 0; i < config.num_experts; ++i) {
    const Bit flip = rng.bernoulli(gap_error_probability(config, i, t));
    round.advice[i] = round.label ^ flip;
  }
  return round;
}

GapEnv::GapEnv(GapEnvConfig config) : config_(config), rng_(config.seed) {
  validate(config_);
}

std::span<const Bit> GapEnv::generate_round() {
  round_ = gap_round(config_, ++t_, rng_);
  return round_.advice;
}

// --- scripted sequences ----------------------------------------------------

std::uint64_t ScriptedEnv::expert_loss(std::size_t expert) const {
  std::uint64_t loss = 0;
  for (std::size_t t = 0; t < horizon; ++t) {
    loss += advice[t * experts + expert] != labels[t] ? 1 : 0;
  }
  return loss;
}

std::uint64_t ScriptedEnv::best_expert_loss() const {
  std::uint64_t best = horizon;
  for (std::size_t i = 0; i < experts; ++i) best = std::min(best, expert_loss(i));
  return best;
}

void write_scripted(std::ostream& out, const ScriptedEnv& env) {
  out << env.horizon << ' ' << env.experts << '\n';
  for (std::size_t t = 0; t < env.horizon; ++t) {
    out << static_cast<int>(env.labels[t]) << ' ';
    for (Bit b : env.advice_at(t)) out << static_cast<int>(b);
    out << '\n';
  }
}

ScriptedEnv read_scripted(std::istream& in) {
  ScriptedEnv env;
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("scripted env: missing header");
  {
    std::istringstream header(line);
    long long n = -1;
    long long experts = -1;
    if (!(header >> n >> experts) || n < 0 || experts <= 0) {
      throw std::runtime_error("scripted env: header must be `n N` with N >= 1");
    }
    std::string rest;
    if (header >> rest) throw std::runtime_error("scripted env: trailing header fields");
    env.horizon = static_cast<std::size_t>(n);
    env.experts = static_cast<std::size_t>(experts);
  }
  env.labels.reserve(env.horizon);
  env.advice.reserve(env.horizon * env.experts);
  for (std::size_t t = 0; t < env.horizon; ++t) {
    if (!std::getline(in, line)) {
      throw std::runtime_error("scripted env: expected " + std::to_string(env.horizon) +
                               " rounds, found " + std::to_string(t));
    }
    std::istringstream row(line);
    std::string label;
    std::string bits;
    if (!(row >> label >> bits) || label.size() != 1 || (label[0] != '0' && label[0] != '1')) {
      throw std::runtime_error("scripted env: malformed round " + std::to_string(t + 1));
    }
    std::string extra;
    if (row >> extra || bits.size() != env.experts ||
        bits.find_first_not_of("01") != std::string::npos) {
      throw std::runtime_error("scripted env: round " + std::to_string(t + 1) + " needs " +
                               std::to_string(env.experts) + " advice bits");
    }
    env.labels.push_back(label[0] == '1' ? 1 : 0);
    for (char c : bits) env.advice.push_back(c == '1' ? 1 : 0);
  }
  return env;
}

ScriptedEnv load_scripted(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open scripted env file '" + path + "'");
  return read_scripted(in);
}

ScriptedReplay::ScriptedReplay(ScriptedEnv env) : env_(std::move(env)) {
  if (env_.experts == 0) throw std::invalid_argument("scripted env has no experts");
  if (env_.labels.size() != env_.horizon || env_.advice.size() != env_.horizon * env_.experts) {
    throw std::invalid_argument("scripted env dimensions are inconsistent");
  }
}

std::span<const Bit> ScriptedReplay::generate_round() {
  if (t_ >= env_.horizon) throw std::out_of_range("scripted env exhausted");
  return env_.advice_at(t_++);
}

// --- enumeration -----------------------------------------------------------

AdversarialEnumerator::AdversarialEnumerator(std::size_t experts, std::size_t horizon,
                                             bool require_perfect_expert)
    : experts_(experts), horizon_(horizon), require_perfect_(require_perfect_expert) {
  if (experts == 0 || horizon == 0) {
    throw std::invalid_argument("enumeration needs at least one expert and one round");
  }
  if (experts > kMaxEnumerationExperts || horizon > kMaxEnumerationHorizon) {
    throw std::invalid_argument("enumeration limited to N <= 4 experts and n <= 6 rounds");
  }
  total_ = std::uint64_t{1} << (horizon * (experts + 1));
}

bool AdversarialEnumerator::next(ScriptedEnv& env) {
  const std::size_t width = experts_ + 1;
  while (cursor_ < total_) {
    const std::uint64_t code = cursor_++;
    env.horizon = horizon_;
    env.experts = experts_;
    env.labels.resize(horizon_);
    env.advice.resize(horizon_ * experts_);
    for (std::size_t t = 0; t < horizon_; ++t) {
      const std::uint64_t row = code >> (t * width);
      env.labels[t] = row & 1;
      for (std::size_t i = 0; i < experts_; ++i) {
        env.advice[t * experts_ + i] = (row >> (i + 1)) & 1;
      }
    }
    if (!require_perfect_ || env.has_perfect_expert()) return true;
  }
  return false;
}

std::uint64_t count_adversarial(std::size_t experts, std::size_t horizon,
                                bool require_perfect_expert) {
  AdversarialEnumerator walker(experts, horizon, require_perfect_expert);
  ScriptedEnv env;
  std::uint64_t count = 0;
  while (walker.next(env)) ++count;
  return count;
}

}  // namespace labeleff
