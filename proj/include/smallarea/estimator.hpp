#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "smallarea/survey_data.hpp"

namespace smallarea {

/// Expansion estimate of a frame total: (N / n) * sum(counts).
/// Requires 1 <= n <= N.
double expansion_total(std::span<const std::int64_t> counts, std::int64_t frame_size);

/// Plug-in variance of a tract count, (1/n) * sum((c_i - mean)^2).
/// Divisor n, not n - 1. Requires n >= 2.
double count_variance(std::span<const std::int64_t> counts);

/// Variance of the expansion total,
///   (N/n)^2 * n * var_c * (N - n) / (N - 1),
/// where the last factor is the finite population correction.
/// Requires 2 <= n <= N and var_c >= 0.
double total_variance(double count_var, std::int64_t frame_size, std::int64_t sample_size);

struct StratumEstimate {
  std::string stratum_id;
  std::int64_t frame_size = 0;        // N
  std::int64_t sample_size = 0;       // n, tracts with observed counts
  std::int64_t sampled_count = 0;     // raw sum of sampled counts
  std::int64_t certainty_tracts = 0;  // certainty tracts with observed counts
  std::int64_t certainty_total = 0;
  std::int64_t shelter_total = 0;
  double tau_hat = 0.0;
  /// Empty when the sample cannot support a variance (n = 1 with N > 1, or
  /// n = 0 with N > 0).
  std::optional<double> var_tau;
  /// False when the frame is non-empty but nothing was sampled; tau_hat is
  /// then 0 and the total covers only certainty and shelter counts.
  bool frame_estimated = true;
  double total = 0.0;

  std::optional<double> se() const;
  std::optional<double> margin() const;
};

StratumEstimate stratum_report(std::string stratum_id, std::span<const std::int64_t> sampled_counts,
                               std::int64_t frame_size, std::int64_t certainty_total, std::int64_t shelter_total);

struct CountyEstimate {
  std::vector<StratumEstimate> per_stratum;
  double total = 0.0;
  /// Root of summed stratum variances; empty if any stratum's is unavailable.
  std::optional<double> se;

  std::optional<double> margin() const;
};

CountyEstimate county_report(std::vector<StratumEstimate> per_stratum);

/// Builds every stratum's estimate from a survey table. N counts frame tracts
/// (sampled + unsampled); n counts sampled tracts whose count resolved as
/// observed, so a dropped ambiguous tract stays in N but not in n.
std::vector<StratumEstimate> estimate_strata(const TractTable& tracts, const std::vector<ShelterCount>& shelters);

/// "<total> ± <2 se>" with both rounded to integers, e.g. "1200 ± 348".
std::string format_margin(double total, double se);

inline const std::vector<std::string> kTable1Columns = {"stratum_id", "count_selected", "n_selected", "count_sampled",
                                                        "n_sampled",  "count_shelter",  "total",      "se"};

/// Table-1 style report: one row per stratum plus a final "Total" row.
/// Totals and standard errors are rounded to integers; unavailable standard
/// errors print as NA.
void write_table1(std::ostream& out, const CountyEstimate& county);

}  // namespace smallarea
