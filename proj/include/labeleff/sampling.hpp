#pragma once

#include <iosfwd>
#include <span>
#include <vector>

namespace labeleff {

inline constexpr double kDefaultQStarTolerance = 1e-10;
inline constexpr double kCurveQStarTolerance = 1e-8;

/// Left-hand sides of the two regret-safety constraints on the query
/// probability. Callers compare each against eta / 8.
struct ConstraintValues {
  double first;   // x + (q/eta) ln(1 - x + x e^{-eta/q})
  double second;  // 1 - x + (q/eta) ln(x + (1 - x) e^{-eta/q})
};

/// Evaluates both constraints at query probability q in (0, 1].
/// Throws std::invalid_argument for q outside (0, 1] or x outside [0, 1].
ConstraintValues constraint_values(double x, double eta, double q);

/// True when both constraints hold at q.
bool constraints_hold(double x, double eta, double q);

/// Smallest query probability q in (0, 1] for which both constraints hold,
/// to absolute accuracy `tol`. Returns 0 when the constraints hold all the
/// way down to q = tol.
///
/// The search brackets on a 64-point log grid, bisects on the pointwise
/// predicate, then checks feasibility on a 256-point grid above the
/// result. If that check fails the answer comes from an exhaustive scan.
double q_star(double x, double eta, double tol = kDefaultQStarTolerance);

/// Closed-form upper bound min(4x(1-x) + eta/3, 1).
double q_star_upper(double x, double eta);

struct QStarRow {
  double x;
  double eta;
  double q_star;
};

/// q_star on a uniform x-grid of `grid_points` points for each eta; rows
/// sorted by (eta, x). Throws std::invalid_argument if grid_points < 2 or
/// any eta <= 0.
std::vector<QStarRow> q_star_curve(std::span<const double> etas,
                                   std::size_t grid_points,
                                   double tol = kCurveQStarTolerance);

/// CSV with header `x,eta,q_star`.
void write_q_star_csv(std::ostream& out, std::span<const QStarRow> rows);

}  // namespace labeleff
