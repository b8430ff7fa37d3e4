#include "labeleff/oracle.hpp"

#include <algorithm>
#include <array>
#include <bit>
#include <cmath>
#include <cstring>
#include <limits>
#include <stdexcept>
#include <unordered_map>

namespace labeleff {
namespace {

double expected_round_loss(double p, Bit label) { return label ? 1.0 - p : p; }

std::uint32_t advice_mask(std::span<const Bit> advice) {
  std::uint32_t mask = 0;
  for (std::size_t i = 0; i < advice.size(); ++i) {
    if (advice[i]) mask |= 1u << i;
  }
  return mask;
}

void require_majority(StrategyTag strategy) {
  if (strategy != StrategyTag::FollowMajority && strategy != StrategyTag::BoostedMajority) {
    throw std::invalid_argument("majority oracle needs FollowMajority or BoostedMajority");
  }
}

void require_general(const SamplingStrategy& strategy, double eta) {
  if (strategy.hard_elimination()) {
    throw std::invalid_argument("general oracle does not take majority strategies");
  }
  if (!(eta > 0.0) || std::isinf(eta)) {
    throw std::invalid_argument("general oracle needs a positive finite eta");
  }
}

// Weighted agreement from log-weights, computed here rather than through
// the forecaster so the oracle does not share its code path.
template <typename Weights>
double agreement_of(const Weights& log_weights, std::size_t experts, std::uint32_t ones) {
  double top = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < experts; ++i) top = std::max(top, log_weights[i]);
  double num = 0.0;
  double den = 0.0;
  for (std::size_t i = 0; i < experts; ++i) {
    const double w = std::exp(log_weights[i] - top);
    den += w;
    if (ones >> i & 1u) num += w;
  }
  return std::min(1.0, num / den);
}

// Majority strategies with equal weights reduce to survivor counts.
double mask_agreement(std::uint32_t alive, std::uint32_t ones) {
  return static_cast<double>(std::popcount(alive & ones)) /
         static_cast<double>(std::popcount(alive));
}

}  // namespace

double majority_bound(StrategyTag strategy, std::size_t experts) {
  require_majority(strategy);
  const double n = static_cast<double>(experts);
  return strategy == StrategyTag::FollowMajority ? std::log2(n) : std::log2(n) / 2.0;
}

double regret_bound(std::size_t experts, std::size_t horizon, double eta) {
  return std::log(static_cast<double>(experts)) / eta +
         static_cast<double>(horizon) * eta / 8.0;
}

double SweepReport::worst_margin() const {
  double worst = std::numeric_limits<double>::infinity();
  for (const auto& h : horizons) worst = std::min(worst, h.margin);
  return worst;
}

// --- single-sequence oracles -------------------------------------------------

ExactResult exact_majority(const ScriptedEnv& env, StrategyTag strategy) {
  require_majority(strategy);
  if (env.experts == 0 || env.experts > kMaxMajorityExperts ||
      env.horizon > kMaxMajorityHorizon) {
    throw std::invalid_argument("majority oracle limited to N <= 16, n <= 12");
  }
  if (!env.has_perfect_expert()) {
    throw std::invalid_argument("majority oracle needs a sequence with a perfect expert");
  }
  const SamplingStrategy rule{strategy};
  const std::uint32_t all = (1u << env.experts) - 1u;
  std::vector<double> mass(std::size_t{1} << env.experts, 0.0);
  std::vector<double> next(mass.size(), 0.0);
  mass[all] = 1.0;

  ExactResult result;
  for (std::size_t t = 0; t < env.horizon; ++t) {
    const std::uint32_t ones = advice_mask(env.advice_at(t));
    const Bit label = env.labels[t];
    const std::uint32_t wrong = label ? (~ones & all) : ones;
    std::fill(next.begin(), next.end(), 0.0);
    for (std::uint32_t alive = 1; alive <= all; ++alive) {
      const double m = mass[alive];
      if (m == 0.0) continue;
      const double a = mask_agreement(alive, ones);
      const double p = prediction_probability(rule, a);
      const double q = query_probability(rule, a, kInfiniteEta);
      result.expected_loss += m * expected_round_loss(p, label);
      result.expected_queries += m * q;
      next[alive & ~wrong] += m * q;
      next[alive] += m * (1.0 - q);
    }
    mass.swap(next);
  }
  result.best_expert_loss = 0;
  result.expected_regret = result.expected_loss;
  return result;
}

ExactResult exact_general(const ScriptedEnv& env, double eta,
                          const SamplingStrategy& strategy) {
  require_general(strategy, eta);
  if (env.experts == 0 || env.experts > kMaxGeneralExperts ||
      env.horizon > kMaxGeneralHorizon) {
    throw std::invalid_argument("general oracle limited to N <= 4, n <= 10");
  }
  struct Path {
    std::vector<double> log_weights;
    double probability;
  };
  const double uniform = -std::log(static_cast<double>(env.experts));
  std::vector<Path> paths{{std::vector<double>(env.experts, uniform), 1.0}};

  ExactResult result;
  for (std::size_t t = 0; t < env.horizon; ++t) {
    const std::uint32_t ones = advice_mask(env.advice_at(t));
    const Bit label = env.labels[t];
    std::vector<Path> next;
    next.reserve(paths.size() * 2);
    for (auto& path : paths) {
      const double a = agreement_of(path.log_weights, env.experts, ones);
      const double p = prediction_probability(strategy, a);
      const double q = query_probability(strategy, a, eta);
      result.expected_loss += path.probability * expected_round_loss(p, label);
      result.expected_queries += path.probability * q;
      if (q > 0.0) {
        Path queried{path.log_weights, path.probability * q};
        for (std::size_t i = 0; i < env.experts; ++i) {
          const bool erred = ((ones >> i) & 1u) != label;
          if (erred) queried.log_weights[i] -= eta / q;
        }
        next.push_back(std::move(queried));
      }
      if (q < 1.0) {
        next.push_back({std::move(path.log_weights), path.probability * (1.0 - q)});
      }
    }
    paths = std::move(next);
  }
  result.best_expert_loss = env.best_expert_loss();
  result.expected_regret =
      result.expected_loss - static_cast<double>(result.best_expert_loss);
  return result;
}

// --- exhaustive sweeps -------------------------------------------------------
//
// Both sweeps walk the tree of sequence prefixes depth first. A node holds
// the exact distribution of the forecaster's state after its prefix, so
// every horizon up to the maximum is covered by one walk and each prefix is
// evaluated once.

namespace {

class SweepRecorder {
 public:
  SweepRecorder(std::size_t experts, std::size_t max_horizon)
      : experts_(experts), labels_(max_horizon), advice_(max_horizon) {
    summaries_.resize(max_horizon);
    for (std::size_t h = 0; h < max_horizon; ++h) {
      summaries_[h].experts = experts;
      summaries_[h].horizon = h + 1;
      summaries_[h].worst_value = -std::numeric_limits<double>::infinity();
      summaries_[h].margin = std::numeric_limits<double>::infinity();
    }
  }

  void set_round(std::size_t depth, Bit label, std::uint32_t ones) {
    labels_[depth] = label;
    advice_[depth] = ones;
  }

  // Sequence of length `horizon` (already set through set_round) scored.
  void observe(std::size_t horizon, double value, double bound) {
    auto& s = summaries_[horizon - 1];
    ++s.environments;
    s.bound = bound;
    const double margin = bound - value;
    if (value > s.worst_value) s.worst_value = value;
    if (margin < s.margin) {
      s.margin = margin;
      s.worst_env = materialize(horizon);
    }
  }

  std::vector<HorizonSummary> take() { return std::move(summaries_); }

 private:
  ScriptedEnv materialize(std::size_t horizon) const {
    ScriptedEnv env;
    env.horizon = horizon;
    env.experts = experts_;
    env.labels.assign(labels_.begin(), labels_.begin() + static_cast<long>(horizon));
    env.advice.resize(horizon * experts_);
    for (std::size_t t = 0; t < horizon; ++t) {
      for (std::size_t i = 0; i < experts_; ++i) {
        env.advice[t * experts_ + i] = (advice_[t] >> i) & 1u;
      }
    }
    return env;
  }

  std::size_t experts_;
  std::vector<Bit> labels_;
  std::vector<std::uint32_t> advice_;
  std::vector<HorizonSummary> summaries_;
};

class MajoritySweep {
 public:
  MajoritySweep(std::size_t experts, std::size_t max_horizon, StrategyTag strategy)
      : experts_(experts),
        max_horizon_(max_horizon),
        all_((1u << experts) - 1u),
        rule_{strategy},
        bound_(majority_bound(strategy, experts)),
        recorder_(experts, max_horizon) {}

  std::vector<HorizonSummary> run() {
    std::vector<double> mass(std::size_t{1} << experts_, 0.0);
    mass[all_] = 1.0;
    descend(0, mass, 0.0, all_);
    return recorder_.take();
  }

 private:
  void descend(std::size_t depth, const std::vector<double>& mass, double loss,
               std::uint32_t perfect) {
    std::vector<double> next(mass.size());
    for (Bit label = 0; label <= 1; ++label) {
      for (std::uint32_t ones = 0; ones <= all_; ++ones) {
        const std::uint32_t wrong = label ? (~ones & all_) : ones;
        const std::uint32_t still_perfect = perfect & ~wrong;
        if (still_perfect == 0) continue;
        recorder_.set_round(depth, label, ones);
        std::fill(next.begin(), next.end(), 0.0);
        double total = loss;
        for (std::uint32_t alive = 1; alive <= all_; ++alive) {
          const double m = mass[alive];
          if (m == 0.0) continue;
          const double a = mask_agreement(alive, ones);
          const double p = prediction_probability(rule_, a);
          const double q = query_probability(rule_, a, kInfiniteEta);
          total += m * expected_round_loss(p, label);
          next[alive & ~wrong] += m * q;
          next[alive] += m * (1.0 - q);
        }
        recorder_.observe(depth + 1, total, bound_);
        if (depth + 1 < max_horizon_) descend(depth + 1, next, total, still_perfect);
      }
    }
  }

  std::size_t experts_;
  std::size_t max_horizon_;
  std::uint32_t all_;
  SamplingStrategy rule_;
  double bound_;
  SweepRecorder recorder_;
};

class GeneralSweep {
 public:
  GeneralSweep(std::size_t experts, std::size_t max_horizon, double eta,
               const SamplingStrategy& strategy)
      : experts_(experts),
        max_horizon_(max_horizon),
        all_((1u << experts) - 1u),
        eta_(eta),
        rule_(strategy),
        recorder_(experts, max_horizon) {}

  std::vector<HorizonSummary> run() {
    Path root{};
    root.log_weights.fill(-std::log(static_cast<double>(experts_)));
    root.probability = 1.0;
    descend(0, {root}, 0.0, {});
    return recorder_.take();
  }

 private:
  struct Path {
    std::array<double, kMaxSweepGeneralExperts> log_weights;
    double probability;
  };
  using Losses = std::array<std::uint32_t, kMaxSweepGeneralExperts>;

  double query(double a) {
    if (rule_.tag != StrategyTag::QStarExact) return query_probability(rule_, a, eta_);
    std::uint64_t key = 0;
    std::memcpy(&key, &a, sizeof key);
    auto [it, inserted] = q_cache_.try_emplace(key, 0.0);
    if (inserted) it->second = query_probability(rule_, a, eta_);
    return it->second;
  }

  void descend(std::size_t depth, const std::vector<Path>& paths, double loss,
               const Losses& expert_losses) {
    const bool last = depth + 1 == max_horizon_;
    std::vector<double> p(paths.size());
    std::vector<double> q(paths.size());
    std::vector<Path> next;
    for (std::uint32_t ones = 0; ones <= all_; ++ones) {
      for (std::size_t k = 0; k < paths.size(); ++k) {
        const double a = agreement_of(paths[k].log_weights, experts_, ones);
        p[k] = prediction_probability(rule_, a);
        // The final round's query decision cannot affect any loss.
        q[k] = last ? 0.0 : query(a);
      }
      for (Bit label = 0; label <= 1; ++label) {
        recorder_.set_round(depth, label, ones);
        const std::uint32_t wrong = label ? (~ones & all_) : ones;
        double total = loss;
        for (std::size_t k = 0; k < paths.size(); ++k) {
          total += paths[k].probability * expected_round_loss(p[k], label);
        }
        Losses cumulative = expert_losses;
        std::uint32_t best = std::numeric_limits<std::uint32_t>::max();
        for (std::size_t i = 0; i < experts_; ++i) {
          cumulative[i] += (wrong >> i) & 1u;
          best = std::min(best, cumulative[i]);
        }
        const std::size_t horizon = depth + 1;
        recorder_.observe(horizon, total - static_cast<double>(best),
                          regret_bound(experts_, horizon, eta_));
        if (last) continue;

        // A round where every expert has the same loss shifts all
        // log-weights equally, which leaves the state unchanged.
        const bool uniform_loss = wrong == 0 || wrong == all_;
        next.clear();
        for (std::size_t k = 0; k < paths.size(); ++k) {
          const Path& path = paths[k];
          if (uniform_loss || q[k] == 0.0) {
            next.push_back(path);
            continue;
          }
          Path queried{path.log_weights, path.probability * q[k]};
          for (std::size_t i = 0; i < experts_; ++i) {
            if ((wrong >> i) & 1u) queried.log_weights[i] -= eta_ / q[k];
          }
          next.push_back(queried);
          if (q[k] < 1.0) next.push_back({path.log_weights, path.probability * (1.0 - q[k])});
        }
        descend(depth + 1, next, total, cumulative);
      }
    }
  }

  std::size_t experts_;
  std::size_t max_horizon_;
  std::uint32_t all_;
  double eta_;
  SamplingStrategy rule_;
  SweepRecorder recorder_;
  std::unordered_map<std::uint64_t, double> q_cache_;
};

}  // namespace

SweepReport sweep_majority(std::size_t experts, std::size_t max_horizon,
                           StrategyTag strategy) {
  require_majority(strategy);
  if (experts == 0 || experts > kMaxSweepMajorityExperts || max_horizon == 0 ||
      max_horizon > kMaxSweepHorizon) {
    throw std::invalid_argument("majority sweep limited to 1 <= N <= 4, 1 <= n <= 6");
  }
  SweepReport report;
  report.suite = strategy == StrategyTag::FollowMajority ? "perfect" : "boosted";
  report.strategy = strategy;
  report.horizons = MajoritySweep(experts, max_horizon, strategy).run();
  return report;
}

SweepReport sweep_general(std::size_t experts, std::size_t max_horizon, double eta,
                          const SamplingStrategy& strategy) {
  require_general(strategy, eta);
  if (experts == 0 || experts > kMaxSweepGeneralExperts || max_horizon == 0 ||
      max_horizon > kMaxSweepHorizon) {
    throw std::invalid_argument("general sweep limited to 1 <= N <= 3, 1 <= n <= 6");
  }
  SweepReport report;
  report.suite = "general";
  report.strategy = strategy.tag;
  report.eta = eta;
  report.horizons = GeneralSweep(experts, max_horizon, eta, strategy).run();
  return report;
}

}  // namespace labeleff
