#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "labeleff/random.hpp"
#include "labeleff/sampling.hpp"

namespace labeleff {

inline constexpr double kInfiniteEta = std::numeric_limits<double>::infinity();

enum class StrategyTag {
  FullInformation,
  FollowMajority,
  BoostedMajority,
  QStarExact,
  QStarUpperBound,
};

/// Rule that maps the weighted agreement to the prediction and query
/// probabilities.
struct SamplingStrategy {
  StrategyTag tag = StrategyTag::QStarUpperBound;
  /// Solver tolerance, used by QStarExact only.
  double tolerance = kDefaultQStarTolerance;

  /// Majority rules discard an expert on its first observed mistake and
  /// run with an infinite learning rate.
  bool hard_elimination() const {
    return tag == StrategyTag::FollowMajority || tag == StrategyTag::BoostedMajority;
  }
};

/// CLI name: full, majority, boosted, qstar, qstar-upper.
std::string_view strategy_name(StrategyTag tag);
/// Inverse of strategy_name; throws std::invalid_argument on unknown names.
StrategyTag parse_strategy(std::string_view name);

/// Everything the forecaster remembers between rounds.
///
/// Log-weights are natural logs, unnormalized, and only meaningful up to a
/// common additive constant. In hard-elimination mode the weights stay
/// uniform and `surviving` marks experts without an observed mistake.
struct ForecasterState {
  std::vector<double> log_weights;
  std::vector<Bit> surviving;
  double eta = 1.0;
  SamplingStrategy strategy;
  std::uint64_t round_index = 0;

  std::size_t num_experts() const { return log_weights.size(); }
  std::size_t num_surviving() const;
};

/// Per-round trace.
///
/// `label` and `expert_losses` are filled only when the label was queried.
/// `forecaster_loss` is scored by whoever holds the true label (the
/// harness), since an unqueried label is invisible to the forecaster.
struct RoundRecord {
  std::uint64_t t = 0;
  double agreement = 0.0;
  double p = 0.0;
  double q = 0.0;
  Bit y_hat = 0;
  Bit queried = 0;
  std::optional<Bit> label;
  std::optional<Bit> forecaster_loss;
  std::optional<std::vector<Bit>> expert_losses;
};

/// Uniform initialization: every log-weight is -ln N.
/// Throws std::invalid_argument for zero experts, a finite eta with a
/// majority strategy, or an infinite/non-positive eta otherwise.
ForecasterState init_state(std::size_t num_experts, double eta,
                           SamplingStrategy strategy);

/// Non-uniform initialization from prior weights (positive, any scale).
ForecasterState init_state(std::span<const double> prior_weights, double eta,
                           SamplingStrategy strategy);

/// Weighted fraction of experts advising label 1. Throws
/// std::invalid_argument on an advice length mismatch and
/// std::logic_error when no expert survives.
double weighted_agreement(const ForecasterState& state, std::span<const Bit> advice);

double prediction_probability(const SamplingStrategy& strategy, double agreement);

double query_probability(const SamplingStrategy& strategy, double agreement,
                         double eta);

/// Supplies the round's label; invoked at most once per round, and only
/// when the forecaster queries.
using LabelSource = std::function<Bit()>;

/// One round of the protocol. Draws y_hat ~ Ber(p) and then Z ~ Ber(q) from
/// `rng` (always exactly two variates). When Z = 1 the label is pulled once
/// and the weights take the importance-weighted update
/// log w_i -= eta * loss_i / q.
RoundRecord step(ForecasterState& state, std::span<const Bit> advice,
                 const LabelSource& label_source, RandomStream& rng);

/// Fills `forecaster_loss` from the true label.
void score_round(RoundRecord& record, Bit true_label);

}  // namespace labeleff
