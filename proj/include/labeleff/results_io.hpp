#pragma once

#include <iosfwd>
#include <string>

#include "json.hpp"

#include "labeleff/harness.hpp"

namespace labeleff {

inline constexpr const char* kVersion = "0.1.0";

/// Long-format results: header `t,metric,mean,ci_lo,ci_hi,runs`, rows
/// ordered by t and then by the series' metric order.
void write_results_csv(std::ostream& out, const MetricsSeries& series);

/// Parses the output of write_results_csv. Throws std::runtime_error on
/// malformed input. tail_mean_q is not part of the CSV and stays zero.
MetricsSeries read_results_csv(std::istream& in);

/// Sidecar metadata: configuration, seeds, version, interval method,
/// bounds, and wall-clock seconds.
nlohmann::json experiment_metadata(const ExperimentConfig& config,
                                   const MetricsSeries& series, double wall_seconds);

}  // namespace labeleff
