#include <stdexcept>
#include <cmath>
#include <random>
#include <sstream>
#include <vector>

#include "doctest.h"
#include "labeleff/sampling.hpp"

using namespace labeleff;

namespace {

// Direct long-double evaluation of the constraint predicate, kept separate
// from the library's underflow-safe path.
bool naive_feasible(long double x, long double eta, long double q) {
  const long double r = eta / q;
  const long double c1 = x + std::log(1.0L - x + x * std::exp(-r)) / r;
  const long double c2 = 1.0L - x + std::log(x + (1.0L - x) * std::exp(-r)) / r;
  return c1 <= eta / 8.0L && c2 <= eta / 8.0L;
}

// Smallest grid point above which every point of a `points`-grid on (0, 1]
// is feasible.
double grid_scan_q_star(double x, double eta, int points) {
  int lowest = points;
  for (int j = points; j >= 1; --j) {
    if (!naive_feasible(x, eta, static_cast<long double>(j) / points)) break;
    lowest = j;
  }
  return static_cast<double>(lowest) / points;
}

}  // namespace

TEST_CASE("constraint values at the endpoints vanish") {
  for (double eta : {0.1, 1.0, 5.0}) {
    auto c = constraint_values(0.0, eta, 1.0);
    CHECK(std::abs(c.first) < 1e-15);
    CHECK(std::abs(c.second) < 1e-15);
    c = constraint_values(1.0, eta, 1.0);
    CHECK(std::abs(c.first) < 1e-15);
    CHECK(std::abs(c.second) < 1e-15);
  }
}

TEST_CASE("constraint values match high-precision evaluation") {
  // mpmath, 30 digits.
  auto c = constraint_values(0.5, 1.0, 1.0);
  CHECK(c.first == doctest::Approx(0.120114506958277524).epsilon(1e-14));
  CHECK(c.second == doctest::Approx(0.120114506958277524).epsilon(1e-14));

  c = constraint_values(0.3, 0.7, 0.4);
  CHECK(c.first == doctest::Approx(0.137232459904977226).epsilon(1e-14));
  CHECK(c.second == doctest::Approx(0.206514723176085397).epsilon(1e-14));

  // eta / q = 1000: e^{-eta/q} underflows.
  c = constraint_values(0.3, 1.0, 1e-3);
  CHECK(c.first == doctest::Approx(0.299643325056061268).epsilon(1e-13));
  CHECK(c.second == doctest::Approx(0.698796027195674064).epsilon(1e-13));
}

TEST_CASE("constraint values reject q outside (0, 1]") {
  CHECK_THROWS_AS(constraint_values(0.5, 1.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(constraint_values(0.5, 1.0, -0.1), std::invalid_argument);
  CHECK_THROWS_AS(constraint_values(0.5, 1.0, 1.5), std::invalid_argument);
  CHECK_THROWS_AS(constraint_values(1.2, 1.0, 0.5), std::invalid_argument);
}

TEST_CASE("q_star examples") {
  CHECK(q_star(0.0, 0.5) == 0.0);
  CHECK(q_star(1.0, 0.5) == 0.0);
  CHECK(q_star(0.5, 8.5) == 0.0);
  const double q = q_star(0.5, 1e-4);
  CHECK(std::abs(q - (grid_scan_q_star(0.5, 1e-4, 1000000))) <= 1e-3);
  CHECK(std::abs(q - 1.0) <= 1e-3);
}

TEST_CASE("q_star agrees with a fine grid scan") {
  std::mt19937_64 gen(7);
  std::uniform_real_distribution<double> ux(0.0, 1.0);
  std::uniform_real_distribution<double> ueta(0.01, 6.0);
  for (int k = 0; k < 40; ++k) {
    const double x = ux(gen);
    const double eta = ueta(gen);
    const double scan = grid_scan_q_star(x, eta, 20000);
    const double fast = q_star(x, eta);
    // The scan rounds up to its grid; q_star is accurate to 1e-10.
    CHECK(fast <= scan + 1e-9);
    CHECK(fast >= scan - 1.0 / 20000 - 1e-9);
  }
}

TEST_CASE("q_star_upper examples") {
  CHECK(q_star_upper(0.5, 0.3) == 1.0);
  CHECK(q_star_upper(0.0, 0.0) == 0.0);
  CHECK(q_star_upper(0.1, 0.3) == doctest::Approx(0.46).epsilon(1e-15));
}

TEST_CASE("feasibility at q = 1 on random pairs") {
  std::mt19937_64 gen(11);
  std::uniform_real_distribution<double> ux(0.0, 1.0);
  std::uniform_real_distribution<double> ulog(-8.0, std::log(20.0));
  for (int k = 0; k < 10000; ++k) {
    const double x = ux(gen);
    const double eta = std::exp(ulog(gen));
    const auto c = constraint_values(x, eta, 1.0);
    REQUIRE(c.first <= eta / 8.0 + 1e-12);
    REQUIRE(c.second <= eta / 8.0 + 1e-12);
  }
}

TEST_CASE("q_star properties: upper bound, symmetry, regret safety") {
  std::mt19937_64 gen(5);
  std::uniform_real_distribution<double> ux(0.0, 1.0);
  std::uniform_real_distribution<double> ulog(std::log(1e-4), std::log(10.0));
  for (int k = 0; k < 300; ++k) {
    const double x = ux(gen);
    const double eta = std::exp(ulog(gen));
    const double q = q_star(x, eta);
    CHECK(q >= 0.0);
    CHECK(q <= q_star_upper(x, eta) + 1e-10);
    CHECK(std::abs(q - (q_star(1.0 - x, eta))) <= 1e-8);
    for (int j = 0; j <= 20; ++j) {
      const double above = q + (1.0 - q) * j / 20.0;
      if (above > 0.0) CHECK(constraints_hold(x, eta, above));
    }
  }
}

TEST_CASE("q_star approaches 4x(1-x) for small eta") {
  for (int k = 0; k <= 100; ++k) {
    const double x = k / 100.0;
    CHECK(std::abs(q_star(x, 1e-4) - 4.0 * x * (1.0 - x)) <= 2e-3);
  }
}

TEST_CASE("feasible set is connected on grids") {
  for (double eta : {0.05, 0.5, 2.0, 6.0}) {
    for (int k = 1; k < 20; ++k) {
      const double x = k / 20.0;
      bool seen_feasible = false;
      for (int j = 1; j <= 2000; ++j) {
        const bool ok = constraints_hold(x, eta, j / 2000.0);
        if (seen_feasible) REQUIRE(ok);
        seen_feasible = seen_feasible || ok;
      }
    }
  }
}

TEST_CASE("q_star_curve") {
  const std::vector<double> single{0.5};
  auto rows = q_star_curve(single, 3);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].x == 0.0);
  CHECK(rows[1].x == 0.5);
  CHECK(rows[2].x == 1.0);
  CHECK(rows[0].q_star == 0.0);
  CHECK(rows[1].q_star == doctest::Approx(q_star(0.5, 0.5, kCurveQStarTolerance)));
  CHECK(rows[2].q_star == 0.0);

  const std::vector<double> tiny{1e-4};
  for (const auto& row : q_star_curve(tiny, 5)) {
    CHECK(std::abs(row.q_star - 4.0 * row.x * (1.0 - row.x)) <= 2e-3);
  }
  const std::vector<double> big{9.0};
  for (const auto& row : q_star_curve(big, 11)) CHECK(row.q_star == 0.0);

  const std::vector<double> unsorted{2.0, 0.5};
  rows = q_star_curve(unsorted, 4);
  CHECK(rows.front().eta == 0.5);
  CHECK(rows.back().eta == 2.0);

  CHECK_THROWS_AS(q_star_curve(single, 1), std::invalid_argument);
  const std::vector<double> bad{0.0};
  CHECK_THROWS_AS(q_star_curve(bad, 3), std::invalid_argument);
}

TEST_CASE("q_star csv layout") {
  const std::vector<double> etas{1.0};
  std::ostringstream out;
  write_q_star_csv(out, q_star_curve(etas, 2));
  CHECK(out.str() == "x,eta,q_star\n0,1,0\n1,1,0\n");
}

TEST_CASE("q_star stays inside its domain on random inputs") {
  std::mt19937_64 gen(3);
  std::uniform_real_distribution<double> ux(0.0, 1.0);
  std::uniform_real_distribution<double> ulog(std::log(1e-4), std::log(8.0));
  for (int k = 0; k < 20000; ++k) {
    const double x = ux(gen);
    const double eta = std::exp(ulog(gen));
    double q = -1.0;
    REQUIRE_NOTHROW(q = q_star(x, eta));
    REQUIRE(q >= 0.0);
    REQUIRE(q <= 1.0);
  }
}
