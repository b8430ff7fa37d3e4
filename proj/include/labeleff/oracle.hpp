#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "labeleff/environments.hpp"
#include "labeleff/forecaster.hpp"

namespace labeleff {

/// Exact expectations over all of the forecaster's randomness on a fixed
/// sequence. The best expert's loss is a constant for a scripted sequence,
/// so expected_regret = expected_loss - best_expert_loss.
struct ExactResult {
  double expected_loss = 0.0;
  double expected_regret = 0.0;
  double expected_queries = 0.0;
  std::uint64_t best_expert_loss = 0;
};

inline constexpr std::size_t kMaxMajorityExperts = 16;
inline constexpr std::size_t kMaxMajorityHorizon = 12;
inline constexpr std::size_t kMaxGeneralExperts = 4;
inline constexpr std::size_t kMaxGeneralHorizon = 10;

/// Dynamic program over the surviving-expert mask for the hard-elimination
/// strategies. Throws std::invalid_argument without a perfect expert, for a
/// non-majority strategy, or beyond N <= 16, n <= 12.
ExactResult exact_majority(const ScriptedEnv& env, StrategyTag strategy);

/// Enumerates every query path (Z_1, ..., Z_n) with its probability; the
/// prediction draw is integrated out analytically. Throws
/// std::invalid_argument beyond N <= 4, n <= 10 or for a majority strategy.
ExactResult exact_general(const ScriptedEnv& env, double eta,
                          const SamplingStrategy& strategy);

/// Worst case over all sequences of one horizon.
struct HorizonSummary {
  std::size_t experts = 0;
  std::size_t horizon = 0;
  std::uint64_t environments = 0;
  double bound = 0.0;
  /// Largest expected loss (majority sweeps) or expected regret (general).
  double worst_value = 0.0;
  /// bound - worst_value; negative means the bound is violated.
  double margin = 0.0;
  ScriptedEnv worst_env;
};

struct SweepReport {
  std::string suite;
  StrategyTag strategy = StrategyTag::FollowMajority;
  double eta = kInfiniteEta;
  std::vector<HorizonSummary> horizons;

  double worst_margin() const;
  bool passed(double slack) const { return worst_margin() >= -slack; }
};

inline constexpr std::size_t kMaxSweepMajorityExperts = 4;
inline constexpr std::size_t kMaxSweepGeneralExperts = 3;
inline constexpr std::size_t kMaxSweepHorizon = 6;

/// All sequences with a perfect expert for horizons 1..max_horizon, checked
/// against log2 N (FollowMajority) or log4 N (BoostedMajority).
SweepReport sweep_majority(std::size_t experts, std::size_t max_horizon,
                           StrategyTag strategy);

/// All sequences (no filter) for horizons 1..max_horizon, checked against
/// ln N / eta + n eta / 8.
SweepReport sweep_general(std::size_t experts, std::size_t max_horizon, double eta,
                          const SamplingStrategy& strategy);

/// log2 N or log4 N.
double majority_bound(StrategyTag strategy, std::size_t experts);
/// ln N / eta + n eta / 8.
double regret_bound(std::size_t experts, std::size_t horizon, double eta);

}  // namespace labeleff
