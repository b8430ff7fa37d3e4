#include <stdexcept>
#include <cmath>
#include <random>
#include <set>
#include <sstream>

#include "doctest.h"
#include "labeleff/environments.hpp"

using namespace labeleff;

TEST_CASE("threshold label probability") {
  ThresholdEnvConfig cfg{0.5, 2.0, 3, 0};
  CHECK(label_probability(cfg, 0.75) == doctest::Approx(0.625).epsilon(1e-15));
  CHECK(label_probability(cfg, 0.25) == doctest::Approx(0.375).epsilon(1e-15));
  CHECK(label_probability(cfg, 0.5) == 0.5);
  cfg.tau0 = 0.3;
  cfg.kappa = 1.5;
  CHECK(label_probability(cfg, 0.3) == 0.5);
}

TEST_CASE("threshold advice") {
  std::vector<Bit> advice;
  threshold_advice(3, 0.6, advice);
  CHECK(advice == std::vector<Bit>{1, 1, 0});
  threshold_advice(3, 1.0 - 1e-12, advice);
  CHECK(advice == std::vector<Bit>{1, 1, 0});
  threshold_advice(5, 0.0, advice);
  CHECK(advice == std::vector<Bit>{1, 0, 0, 0, 0});
}

TEST_CASE("threshold configuration checks") {
  CHECK_THROWS_AS(validate(ThresholdEnvConfig{0.5, 1.0, 3, 0}), std::invalid_argument);
  CHECK_THROWS_AS(validate(ThresholdEnvConfig{0.5, 2.0, 4, 0}), std::invalid_argument);
  CHECK_THROWS_AS(validate(ThresholdEnvConfig{1.5, 2.0, 3, 0}), std::invalid_argument);
  CHECK_THROWS_AS(validate(ThresholdEnvConfig{0.5, 2.0, 1, 0}), std::invalid_argument);
  CHECK_NOTHROW(validate(ThresholdEnvConfig{0.5, 2.0, 225, 0}));
}

TEST_CASE("optimal risk") {
  CHECK(optimal_risk(ThresholdEnvConfig{0.5, 2.0, 3, 0}) == doctest::Approx(0.375).epsilon(1e-15));
  // 1/2 - 1/(1.5 * 2^1.5), mpmath.
  CHECK(optimal_risk(ThresholdEnvConfig{0.5, 1.5, 3, 0}) ==
        doctest::Approx(0.264297739604484159).epsilon(1e-14));
  double previous = 0.0;
  for (double kappa : {2.0, 4.0, 8.0, 16.0}) {
    const double risk = optimal_risk(ThresholdEnvConfig{0.5, kappa, 3, 0});
    CHECK(risk < 0.5);
    CHECK(risk > previous);
    previous = risk;
  }
  const double flat = optimal_risk(ThresholdEnvConfig{0.5, 64.0, 3, 0});
  CHECK(flat <= 0.5);
  CHECK(0.5 - flat < 1e-15);
}

TEST_CASE("optimal risk matches quadrature for any boundary") {
  for (double tau0 : {0.0, 0.2, 0.5, 0.77, 1.0}) {
    for (double kappa : {1.5, 2.0, 3.0}) {
      const ThresholdEnvConfig cfg{tau0, kappa, 3, 0};
      // Composite midpoint rule of min(zeta, 1 - zeta).
      const int steps = 200000;
      double sum = 0.0;
      for (int k = 0; k < steps; ++k) {
        const double x = (k + 0.5) / steps;
        const double z = label_probability(cfg, x);
        sum += std::min(z, 1.0 - z);
      }
      CHECK(std::abs(optimal_risk(cfg) - (sum / steps)) <= 1e-6);
    }
  }
}

TEST_CASE("optimal risk matches Monte Carlo") {
  const ThresholdEnvConfig cfg{0.5, 1.5, 3, 0};
  RandomStream rng(2024);
  const int samples = 10000000;
  long errors = 0;
  for (int k = 0; k < samples; ++k) {
    const auto round = threshold_round(cfg, rng);
    errors += round.optimal_prediction != round.label;
  }
  CHECK(std::abs(double(errors) / samples - optimal_risk(cfg)) <= 3e-4);
}

TEST_CASE("threshold labels follow zeta on intervals") {
  const ThresholdEnvConfig cfg{0.5, 2.0, 3, 0};
  RandomStream rng(99);
  const int samples = 1000000;
  std::vector<std::pair<double, Bit>> draws;
  draws.reserve(samples);
  for (int k = 0; k < samples; ++k) {
    const auto round = threshold_round(cfg, rng);
    draws.emplace_back(round.x, round.label);
  }
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int trial = 0; trial < 10; ++trial) {
    double a = u(gen);
    double b = u(gen);
    if (a > b) std::swap(a, b);
    if (b - a < 0.05) b = std::min(1.0, a + 0.05);
    long hits = 0;
    long ones = 0;
    for (const auto& [x, y] : draws) {
      if (x < a || x > b) continue;
      ++hits;
      ones += y;
    }
    double expected = 0.0;
    const int steps = 10000;
    for (int k = 0; k < steps; ++k) {
      expected += label_probability(cfg, a + (b - a) * (k + 0.5) / steps);
    }
    expected /= steps;
    const double sigma = std::sqrt(expected * (1.0 - expected) / hits);
    CHECK(std::abs(double(ones) / hits - expected) <= 3.0 * sigma);
  }
}

TEST_CASE("threshold environment exposes the optimal rule") {
  ThresholdEnv env(ThresholdEnvConfig{0.5, 2.0, 5, 8});
  CHECK(env.best_expert() == std::optional<std::size_t>{2});
  for (int t = 0; t < 100; ++t) {
    const auto advice = env.next_round();
    CHECK(advice[2] == *env.optimal_prediction());
    CHECK(*env.optimal_prediction() == (env.feature() >= 0.5 ? 1 : 0));
  }
  CHECK(env.reveal_count() == 0);
}

TEST_CASE("gap error probabilities") {
  GapEnvConfig cfg{0.2, 0.1, 3, 1, 0, 0};
  CHECK(gap_error_probability(cfg, 1, 1) == doctest::Approx(0.1));
  CHECK(gap_error_probability(cfg, 0, 1) == doctest::Approx(0.3));
  cfg.warmup = 10;
  CHECK(gap_error_probability(cfg, 1, 10) == doctest::Approx(0.3));
  CHECK(gap_error_probability(cfg, 1, 11) == doctest::Approx(0.1));
  cfg.delta = 0.0;
  cfg.warmup = 0;
  CHECK(gap_error_probability(cfg, 0, 5) == gap_error_probability(cfg, 1, 5));
  CHECK_THROWS_AS(validate(GapEnvConfig{0.5, 0.6, 3, 0, 0, 0}), std::invalid_argument);
  CHECK_THROWS_AS(validate(GapEnvConfig{0.2, 0.1, 3, 3, 0, 0}), std::invalid_argument);
}

TEST_CASE("gap environment realizes the gap") {
  const GapEnvConfig cfg{0.2, 0.1, 3, 0, 0, 0};
  RandomStream rng(5);
  const int rounds = 1000000;
  long gap_sum = 0;
  long best_errors = 0;
  for (int t = 1; t <= rounds; ++t) {
    const auto r = gap_round(cfg, t, rng);
    const int best = r.advice[0] != r.label;
    const int other = r.advice[2] != r.label;
    gap_sum += other - best;
    best_errors += best;
  }
  CHECK(std::abs(double(gap_sum) / rounds - 0.2) <= 0.002);
  CHECK(std::abs(double(best_errors) / rounds - 0.1) <= 0.002);
}

TEST_CASE("reveal is counted once per round and scoring is free") {
  GapEnv env(GapEnvConfig{0.2, 0.1, 4, 0, 0, 3});
  CHECK_THROWS_AS(env.reveal(), std::logic_error);
  env.next_round();
  const Bit scored = env.score_label();
  CHECK(env.reveal_count() == 0);
  CHECK(env.reveal() == scored);
  CHECK(env.reveal() == scored);
  CHECK(env.reveal_count() == 1);
  env.next_round();
  env.score_label();
  CHECK(env.reveal_count() == 1);
  CHECK(env.rounds() == 2);
}

TEST_CASE("scripted text format") {
  ScriptedEnv env{3, 2, {1, 0, 0, 0, 1, 1}, {0, 0, 1}};
  std::ostringstream out;
  write_scripted(out, env);
  CHECK(out.str() == "3 2\n0 10\n0 00\n1 11\n");
  std::istringstream in(out.str());
  CHECK(read_scripted(in) == env);
  CHECK(env.expert_loss(0) == 1);
  CHECK(env.expert_loss(1) == 0);
  CHECK(env.has_perfect_expert());

  for (const char* bad : {"", "2\n", "2 2\n0 10\n", "1 2\n2 10\n", "1 2\n0 1\n", "1 2\n0 1x\n",
                          "1 2\n0 10 1\n", "1 0\n"}) {
    std::istringstream broken(bad);
    CHECK_THROWS_AS(read_scripted(broken), std::runtime_error);
  }
}

TEST_CASE("scripted replay") {
  ScriptedReplay env(ScriptedEnv{2, 2, {1, 0, 0, 1}, {1, 0}});
  auto advice = env.next_round();
  CHECK(advice[0] == 1);
  CHECK(env.score_label() == 1);
  advice = env.next_round();
  CHECK(advice[1] == 1);
  CHECK(env.reveal() == 0);
  CHECK_THROWS_AS(env.next_round(), std::out_of_range);
}

namespace {

// Brute-force count over explicit nested choices, independent of the
// enumerator's bit packing.
std::uint64_t brute_count(std::size_t experts, std::size_t horizon, bool perfect) {
  const std::uint64_t per_round = std::uint64_t{1} << (experts + 1);
  std::uint64_t total = 1;
  for (std::size_t t = 0; t < horizon; ++t) total *= per_round;
  std::uint64_t count = 0;
  for (std::uint64_t code = 0; code < total; ++code) {
    std::vector<bool> ok(experts, true);
    std::uint64_t rest = code;
    for (std::size_t t = 0; t < horizon; ++t) {
      const std::uint64_t row = rest % per_round;
      rest /= per_round;
      const int label = static_cast<int>(row / (per_round / 2));
      for (std::size_t i = 0; i < experts; ++i) {
        const int vote = static_cast<int>((row >> i) & 1);
        if (vote != label) ok[i] = false;
      }
    }
    const bool any = std::find(ok.begin(), ok.end(), true) != ok.end();
    if (!perfect || any) ++count;
  }
  return count;
}

}  // namespace

TEST_CASE("adversarial enumeration counts") {
  CHECK(count_adversarial(1, 1, true) == 2);
  CHECK(count_adversarial(2, 1, true) == 6);
  CHECK(count_adversarial(2, 1, false) == 8);
  for (std::size_t n = 1; n <= 3; ++n) {
    for (std::size_t experts = 1; experts <= 3; ++experts) {
      CHECK(count_adversarial(experts, n, true) == brute_count(experts, n, true));
      CHECK(count_adversarial(experts, n, false) == brute_count(experts, n, false));
    }
  }
  CHECK_THROWS_AS(AdversarialEnumerator(5, 1, false), std::invalid_argument);
  CHECK_THROWS_AS(AdversarialEnumerator(2, 7, false), std::invalid_argument);
  CHECK_THROWS_AS(AdversarialEnumerator(0, 1, false), std::invalid_argument);
}

TEST_CASE("adversarial enumeration yields distinct sequences") {
  AdversarialEnumerator walker(2, 2, false);
  std::set<std::string> seen;
  ScriptedEnv env;
  while (walker.next(env)) {
    std::ostringstream out;
    write_scripted(out, env);
    seen.insert(out.str());
  }
  CHECK(seen.size() == 64);

  AdversarialEnumerator perfect(1, 1, true);
  REQUIRE(perfect.next(env));
  CHECK(env.labels[0] == env.advice[0]);
  REQUIRE(perfect.next(env));
  CHECK(env.labels[0] == env.advice[0]);
  CHECK_FALSE(perfect.next(env));
}
