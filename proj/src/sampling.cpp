#include "labeleff/sampling.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <ostream>
#include <stdexcept>

#include "labeleff/format.hpp"

namespace labeleff {
namespace {

constexpr std::size_t kCoarseGrid = 64;
constexpr std::size_t kVerifyGrid = 256;
constexpr std::size_t kFallbackGrid = 100000;

// ln(1 - a + a e^{-r}) for a in [0, 1], r > 0, without forming e^{-r} when
// it would underflow.
double log_mixture(double a, double r) {
  if (a == 0.0) return 0.0;
  if (a == 1.0) return -r;
  if (r < 1.0) return std::log1p(a * std::expm1(-r));
  const double lhs = std::log1p(-a);
  const double rhs = std::log(a) - r;
  const double hi = std::max(lhs, rhs);
  return hi + std::log1p(std::exp(-std::abs(lhs - rhs)));
}

void check_unit(double x, const char* what) {
  if (!(x >= 0.0 && x <= 1.0)) {
    throw std::invalid_argument(std::string(what) + " must lie in [0, 1]");
  }
}

// Smallest point of a uniform grid on (0, 1] above which every grid point is
// feasible. Used only when the bisection result fails verification.
double exhaustive_scan(double x, double eta, double tol) {
  std::size_t lowest_feasible = kFallbackGrid;
  for (std::size_t j = kFallbackGrid; j >= 1; --j) {
    const double q = static_cast<double>(j) / kFallbackGrid;
    if (!constraints_hold(x, eta, q)) break;
    lowest_feasible = j;
  }
  if (lowest_feasible == 1 && constraints_hold(x, eta, tol)) return 0.0;
  return static_cast<double>(lowest_feasible) / kFallbackGrid;
}

}  // namespace

ConstraintValues constraint_values(double x, double eta, double q) {
  check_unit(x, "x");
  if (!(eta > 0.0)) throw std::invalid_argument("eta must be positive");
  if (!(q > 0.0 && q <= 1.0)) {
    throw std::invalid_argument("q must lie in (0, 1]");
  }
  const double r = eta / q;
  const double y = 1.0 - x;
  return {x + log_mixture(x, r) / r, y + log_mixture(y, r) / r};
}

bool constraints_hold(double x, double eta, double q) {
  const auto c = constraint_values(x, eta, q);
  const double limit = eta / 8.0;
  return c.first <= limit && c.second <= limit;
}

double q_star(double x, double eta, double tol) {
  check_unit(x, "x");
  if (!(eta > 0.0)) throw std::invalid_argument("eta must be positive");
  if (!(tol > 0.0 && tol < 1.0)) {
    throw std::invalid_argument("tolerance must lie in (0, 1)");
  }
  // Both constraints vanish identically at the endpoints, and for
  // eta >= 8 the first terms alone are already below eta / 8.
  if (x == 0.0 || x == 1.0 || eta >= 8.0) return 0.0;

  std::array<double, kCoarseGrid> grid{};
  const double log_tol = std::log(tol);
  for (std::size_t k = 0; k < kCoarseGrid; ++k) {
    const double frac = static_cast<double>(k) / (kCoarseGrid - 1);
    grid[k] = std::exp(log_tol * (1.0 - frac));
  }
  grid.back() = 1.0;

  std::size_t infeasible = kCoarseGrid;
  for (std::size_t k = kCoarseGrid; k-- > 0;) {
    if (!constraints_hold(x, eta, grid[k])) {
      infeasible = k;
      break;
    }
  }
  if (infeasible == kCoarseGrid) return 0.0;
  if (infeasible == kCoarseGrid - 1) return 1.0;

  double lo = grid[infeasible];
  double hi = grid[infeasible + 1];
  while (hi - lo > tol) {
    const double mid = 0.5 * (lo + hi);
    if (constraints_hold(x, eta, mid)) {
      hi = mid;
    } else {
      lo = mid;
    }
  }

  for (std::size_t j = 0; j < kVerifyGrid; ++j) {
    const double q = std::min(1.0, hi + (1.0 - hi) * static_cast<double>(j) / (kVerifyGrid - 1));
    if (!constraints_hold(x, eta, q)) return exhaustive_scan(x, eta, tol);
  }
  return hi;
}

double q_star_upper(double x, double eta) {
  check_unit(x, "x");
  if (!(eta >= 0.0)) throw std::invalid_argument("eta must be nonnegative");
  return std::min(4.0 * x * (1.0 - x) + eta / 3.0, 1.0);
}

std::vector<QStarRow> q_star_curve(std::span<const double> etas,
                                   std::size_t grid_points, double tol) {
  if (grid_points < 2) {
    throw std::invalid_argument("q* curve needs at least 2 grid points");
  }
  std::vector<double> sorted(etas.begin(), etas.end());
  for (double eta : sorted) {
    if (!(eta > 0.0)) throw std::invalid_argument("eta must be positive");
  }
  std::sort(sorted.begin(), sorted.end());

  std::vector<QStarRow> rows;
  rows.reserve(sorted.size() * grid_points);
  for (double eta : sorted) {
    for (std::size_t k = 0; k < grid_points; ++k) {
      const double x = static_cast<double>(k) / (grid_points - 1);
      rows.push_back({x, eta, q_star(x, eta, tol)});
    }
  }
  return rows;
}

void write_q_star_csv(std::ostream& out, std::span<const QStarRow> rows) {
  out << "x,eta,q_star\n";
  for (const auto& row : rows) {
    out << format_real(row.x) << ',' << format_real(row.eta) << ','
        << format_real(row.q_star) << '\n';
  }
}

}  // namespace labeleff
