#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "labeleff/random.hpp"

namespace labeleff {

/// Round generator with deferred label reveal.
///
/// Advice is exposed eagerly by next_round(). The label reaches the
/// forecaster only through reveal(), which is counted and cached per round.
/// The harness reads the same label through score_label(), which is not
/// counted.
class Environment {
 public:
  virtual ~Environment() = default;

  virtual std::size_t num_experts() const = 0;

  /// Advances to the next round and returns its advice.
  std::span<const Bit> next_round();

  /// Forecaster-facing reveal of the current round's label.
  Bit reveal();

  /// Harness-facing scoring channel.
  Bit score_label() const { return current_label(); }

  /// Prediction of the Bayes-optimal rule, when the environment has one.
  virtual std::optional<Bit> optimal_prediction() const { return std::nullopt; }

  /// Index of the expert with the smallest expected loss, when known.
  virtual std::optional<std::size_t> best_expert() const { return std::nullopt; }

  /// Rounds whose label was revealed to the forecaster.
  std::uint64_t reveal_count() const { return reveals_; }
  std::uint64_t rounds() const { return rounds_; }

 protected:
  virtual std::span<const Bit> generate_round() = 0;
  virtual Bit current_label() const = 0;

 private:
  std::uint64_t rounds_ = 0;
  std::uint64_t reveals_ = 0;
  bool revealed_this_round_ = false;
};

// --- threshold model -------------------------------------------------------

struct ThresholdEnvConfig {
  double tau0 = 0.5;
  double kappa = 2.0;
  std::size_t num_experts = 3;
  std::uint64_t seed = 0;
};

/// Throws std::invalid_argument unless tau0 in [0,1], kappa > 1, and
/// num_experts is odd and at least 3.
void validate(const ThresholdEnvConfig& config);

/// P(Y = 1 | X = x) = 1/2 + 1/2 sign(x - tau0) |x - tau0|^(kappa - 1).
double label_probability(const ThresholdEnvConfig& config, double x);

struct ThresholdRound {
  std::vector<Bit> advice;
  Bit label = 0;
  double x = 0.0;
  Bit optimal_prediction = 0;
};

/// Fills `advice` with expert i's vote 1{x >= i / (N - 1)} (zero-based i).
void threshold_advice(std::size_t num_experts, double x, std::vector<Bit>& advice);

/// Draws X ~ U[0,1] then Y ~ Ber(label_probability(X)), in that order.
ThresholdRound threshold_round(const ThresholdEnvConfig& config, RandomStream& rng);

/// Risk of the rule 1{x >= tau0}: 1/2 - (tau0^kappa + (1 - tau0)^kappa) / (2 kappa),
/// which is 1/2 - 1/(kappa 2^kappa) at tau0 = 1/2.
double optimal_risk(const ThresholdEnvConfig& config);

/// Zero-based index of the expert whose threshold equals tau0, if any.
std::optional<std::size_t> threshold_optimal_expert(const ThresholdEnvConfig& config);

class ThresholdEnv final : public Environment {
 public:
  explicit ThresholdEnv(ThresholdEnvConfig config);

  std::size_t num_experts() const override { return config_.num_experts; }
  std::optional<Bit> optimal_prediction() const override { return round_.optimal_prediction; }
  std::optional<std::size_t> best_expert() const override { return best_; }
  double feature() const { return round_.x; }

 protected:
  std::span<const Bit> generate_round() override;
  Bit current_label() const override { return round_.label; }

 private:
  ThresholdEnvConfig config_;
  RandomStream rng_;
  ThresholdRound round_;
  std::optional<std::size_t> best_;
};

// --- gap model -------------------------------------------------------------

struct GapEnvConfig {
  double delta = 0.2;
  double base_error = 0.1;
  std::size_t num_experts = 2;
  std::size_t best_index = 0;
  /// Rounds (1-based t <= warmup) during which every expert errs with
  /// probability base_error + delta.
  std::uint64_t warmup = 0;
  std::uint64_t seed = 0;
};

void validate(const GapEnvConfig& config);

/// Per-expert error probability at round t (1-based).
double gap_error_probability(const GapEnvConfig& config, std::size_t expert,
                             std::uint64_t t);

struct GapRound {
  std::vector<Bit> advice;
  Bit label = 0;
};

/// Y ~ Ber(1/2); expert i reports Y xor Ber(eps_i), independently.
GapRound gap_round(const GapEnvConfig& config, std::uint64_t t, RandomStream& rng);

class GapEnv final : public Environment {
 public:
  explicit GapEnv(GapEnvConfig config);

  std::size_t num_experts() const override { return config_.num_experts; }
  std::optional<std::size_t> best_expert() const override { return config_.best_index; }

 protected:
  std::span<const Bit> generate_round() override;
  Bit current_label() const override { return round_.label; }

 private:
  GapEnvConfig config_;
  RandomStream rng_;
  GapRound round_;
  std::uint64_t t_ = 0;
};

// --- scripted sequences ----------------------------------------------------

/// A fixed advice/label sequence. advice is row-major, horizon x experts.
struct ScriptedEnv {
  std::size_t horizon = 0;
  std::size_t experts = 0;
  std::vector<Bit> advice;
  std::vector<Bit> labels;

  std::span<const Bit> advice_at(std::size_t t) const {
    return {advice.data() + t * experts, experts};
  }
  std::uint64_t expert_loss(std::size_t expert) const;
  std::uint64_t best_expert_loss() const;
  bool has_perfect_expert() const { return best_expert_loss() == 0; }

  friend bool operator==(const ScriptedEnv&, const ScriptedEnv&) = default;
};

/// Text format: first line `n N`, then n lines `label advice_bits` with the
/// advice written as N contiguous 0/1 characters.
void write_scripted(std::ostream& out, const ScriptedEnv& env);
/// Throws std::runtime_error on malformed input.
ScriptedEnv read_scripted(std::istream& in);
ScriptedEnv load_scripted(const std::string& path);

/// Replays a ScriptedEnv; running past the horizon throws std::out_of_range.
class ScriptedReplay final : public Environment {
 public:
  explicit ScriptedReplay(ScriptedEnv env);

  std::size_t num_experts() const override { return env_.experts; }
  const ScriptedEnv& script() const { return env_; }

 protected:
  std::span<const Bit> generate_round() override;
  Bit current_label() const override { return env_.labels[t_ - 1]; }

 private:
  ScriptedEnv env_;
  std::size_t t_ = 0;
};

inline constexpr std::size_t kMaxEnumerationExperts = 4;
inline constexpr std::size_t kMaxEnumerationHorizon = 6;

/// Walks every (labels, advice) sequence of the given size: 2^(n (N + 1))
/// in total, optionally keeping only those with a perfect expert.
///
/// Sequence k assigns round t the bits k >> (t (N + 1)): the low bit is
/// the label, the next N bits are the advice.
class AdversarialEnumerator {
 public:
  /// Throws std::invalid_argument when N or n is zero or beyond the limits.
  AdversarialEnumerator(std::size_t experts, std::size_t horizon,
                        bool require_perfect_expert);

  /// Writes the next sequence into `env`; false when exhausted.
  bool next(ScriptedEnv& env);

  std::uint64_t total_raw() const { return total_; }

 private:
  std::size_t experts_;
  std::size_t horizon_;
  bool require_perfect_;
  std::uint64_t cursor_ = 0;
  std::uint64_t total_;
};

std::uint64_t count_adversarial(std::size_t experts, std::size_t horizon,
                                bool require_perfect_expert);

}  // namespace labeleff
