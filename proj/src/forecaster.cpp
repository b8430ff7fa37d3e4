#include "labeleff/forecaster.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace labeleff {
namespace {

// Log-weights are shifted back to a zero maximum once they drift this low,
// so differences keep full precision.
constexpr double kRenormalizeBelow = -512.0;

const double kLn2 = std::log(2.0);
const double kLn4 = std::log(4.0);

void validate_eta(double eta, const SamplingStrategy& strategy) {
  if (strategy.hard_elimination()) {
    if (eta != kInfiniteEta) {
      throw std::invalid_argument(
          "majority strategies require an infinite learning rate");
    }
    return;
  }
  if (!(eta > 0.0) || std::isinf(eta)) {
    throw std::invalid_argument(
        "learning rate must be positive and finite for this strategy");
  }
  if (strategy.tag == StrategyTag::QStarExact &&
      !(strategy.tolerance > 0.0 && strategy.tolerance < 1.0)) {
    throw std::invalid_argument("q* tolerance must lie in (0, 1)");
  }
}

}  // namespace

std::string_view strategy_name(StrategyTag tag) {
  switch (tag) {
    case StrategyTag::FullInformation: return "full";
    case StrategyTag::FollowMajority: return "majority";
    case StrategyTag::BoostedMajority: return "boosted";
    case StrategyTag::QStarExact: return "qstar";
    case StrategyTag::QStarUpperBound: return "qstar-upper";
  }
  return "unknown";
}

StrategyTag parse_strategy(std::string_view name) {
  for (auto tag : {StrategyTag::FullInformation, StrategyTag::FollowMajority,
                   StrategyTag::BoostedMajority, StrategyTag::QStarExact,
                   StrategyTag::QStarUpperBound}) {
    if (strategy_name(tag) == name) return tag;
  }
  throw std::invalid_argument("unknown strategy '" + std::string(name) + "'");
}

std::size_t ForecasterState::num_surviving() const {
  return static_cast<std::size_t>(std::count(surviving.begin(), surviving.end(), Bit{1}));
}

ForecasterState init_state(std::size_t num_experts, double eta,
                           SamplingStrategy strategy) {
  if (num_experts == 0) throw std::invalid_argument("need at least one expert");
  validate_eta(eta, strategy);
  ForecasterState state;
  state.log_weights.assign(num_experts, -std::log(static_cast<double>(num_experts)));
  state.surviving.assign(num_experts, 1);
  state.eta = eta;
  state.strategy = strategy;
  return state;
}

ForecasterState init_state(std::span<const double> prior_weights, double eta,
                           SamplingStrategy strategy) {
  if (prior_weights.empty()) throw std::invalid_argument("need at least one expert");
  if (strategy.hard_elimination()) {
    throw std::invalid_argument("majority strategies use uniform weights only");
  }
  validate_eta(eta, strategy);
  double total = 0.0;
  for (double w : prior_weights) {
    if (!(w > 0.0) || std::isinf(w)) {
      throw std::invalid_argument("prior weights must be positive and finite");
    }
    total += w;
  }
  ForecasterState state;
  state.log_weights.reserve(prior_weights.size());
  for (double w : prior_weights) state.log_weights.push_back(std::log(w / total));
  state.surviving.assign(prior_weights.size(), 1);
  state.eta = eta;
  state.strategy = strategy;
  return state;
}

double weighted_agreement(const ForecasterState& state, std::span<const Bit> advice) {
  const std::size_t n = state.num_experts();
  if (advice.size() != n) {
    throw std::invalid_argument("advice length does not match the number of experts");
  }
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) {
    if (state.surviving[i]) top = std::max(top, state.log_weights[i]);
  }
  if (std::isinf(top)) throw std::logic_error("no surviving experts");

  double ones = 0.0;
  double total = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    if (!state.surviving[i]) continue;
    const double w = std::exp(state.log_weights[i] - top);
    total += w;
    if (advice[i]) ones += w;
  }
  return std::clamp(ones / total, 0.0, 1.0);
}

double prediction_probability(const SamplingStrategy& strategy, double agreement) {
  const double a = agreement;
  switch (strategy.tag) {
    case StrategyTag::FollowMajority:
      return a >= 0.5 ? 1.0 : 0.0;
    case StrategyTag::BoostedMajority:
      if (a <= 0.25) return 0.0;
      if (a <= 0.5) return 1.0 + std::log(a) / kLn4;
      if (a <= 0.75) return -std::log(1.0 - a) / kLn4;
      return 1.0;
    case StrategyTag::FullInformation:
    case StrategyTag::QStarExact:
    case StrategyTag::QStarUpperBound:
      return a;
  }
  return a;
}

double query_probability(const SamplingStrategy& strategy, double agreement,
                         double eta) {
  const double a = agreement;
  switch (strategy.tag) {
    case StrategyTag::FullInformation:
      return 1.0;
    case StrategyTag::FollowMajority: {
      if (a <= 0.0 || a >= 1.0) return 0.0;
      const double m = std::min(a, 1.0 - a);
      return std::min(1.0, -kLn2 / std::log(m));
    }
    case StrategyTag::BoostedMajority:
      if (a <= 0.0 || a >= 1.0) return 0.0;
      if (a < 0.25) return -kLn4 / std::log(a);
      if (a <= 0.75) return 1.0;
      return -kLn4 / std::log(1.0 - a);
    case StrategyTag::QStarUpperBound:
      return q_star_upper(a, eta);
    case StrategyTag::QStarExact:
      return q_star(a, eta, strategy.tolerance);
  }
  return 1.0;
}

RoundRecord step(ForecasterState& state, std::span<const Bit> advice,
                 const LabelSource& label_source, RandomStream& rng) {
  RoundRecord record;
  record.t = state.round_index + 1;
  record.agreement = weighted_agreement(state, advice);
  record.p = prediction_probability(state.strategy, record.agreement);
  record.q = query_probability(state.strategy, record.agreement, state.eta);

  // Both variates are always consumed, in this order.
  const double u_predict = rng.uniform();
  const double u_query = rng.uniform();
  record.y_hat = u_predict < record.p ? 1 : 0;
  record.queried = (record.q > 0.0 && u_query < record.q) ? 1 : 0;

  if (record.queried) {
    const Bit label = label_source();
    record.label = label;
    std::vector<Bit> losses(advice.size());
    for (std::size_t i = 0; i < advice.size(); ++i) {
      losses[i] = advice[i] != label ? 1 : 0;
    }
    if (state.strategy.hard_elimination()) {
      for (std::size_t i = 0; i < losses.size(); ++i) {
        if (losses[i]) state.surviving[i] = 0;
      }
      if (state.num_surviving() == 0) {
        throw std::logic_error(
            "every expert erred; hard elimination needs a perfect expert");
      }
    } else {
      const double scale = state.eta / record.q;
      double top = -std::numeric_limits<double>::infinity();
      for (std::size_t i = 0; i < losses.size(); ++i) {
        if (losses[i]) state.log_weights[i] -= scale;
        top = std::max(top, state.log_weights[i]);
      }
      if (top < kRenormalizeBelow) {
        for (double& lw : state.log_weights) lw -= top;
      }
    }
    record.expert_losses = std::move(losses);
  }
  ++state.round_index;
  return record;
}

void score_round(RoundRecord& record, Bit true_label) {
  record.forecaster_loss = record.y_hat != true_label ? 1 : 0;
}

}  // namespace labeleff
