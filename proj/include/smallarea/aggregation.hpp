#pragma once

#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "smallarea/estimator.hpp"
#include "smallarea/imputation.hpp"
#include "smallarea/survey_data.hpp"

namespace smallarea {

struct RegionMember {
  std::string tract_id;
  double share = 1.0;  // in (0, 1]
};

struct RegionDefinition {
  std::string region_id;
  std::vector<RegionMember> members;
};

/// Whole-tract region covering one stratum.
RegionDefinition stratum_region(const TractTable& tracts, const std::string& stratum_id);
/// Whole-tract region covering the table.
RegionDefinition county_region(const TractTable& tracts, std::string region_id = "Total");
/// One region per city, in lexicographic city_id order.
std::vector<RegionDefinition> city_regions(const std::vector<CityShare>& shares);

/// Sum of share * count over members. `final_counts` is aligned with `tracts`.
double aggregate_region(const TractTable& tracts, std::span<const double> final_counts,
                        const RegionDefinition& region);

/// Sampling standard error of a region's Model 0 total:
///   sqrt( sum_h W_h^2 * var(tau_h) / N_h^2 ),
/// with W_h the summed shares of the region's unobserved tracts in stratum h.
/// Observed tracts contribute nothing. Throws Error(infeasible) when a
/// contributing stratum has no variance estimate (n < 2).
double model0_region_se(const TractTable& tracts, const RegionDefinition& region,
                        const std::vector<StratumEstimate>& strata);

struct RegionEstimate {
  std::string region_id;
  std::vector<double> totals;  // one per model, in input order
  std::optional<double> model0_se;
};

/// One row per region with one total per model. Model 0 SE is left empty
/// where it cannot be computed.
std::vector<RegionEstimate> comparison_table(const TractTable& tracts, const std::vector<RegionDefinition>& regions,
                                             const std::vector<TractPredictions>& models,
                                             const std::vector<StratumEstimate>& strata);

/// Strata in id order, then the county "Total" row, then cities.
std::vector<RegionDefinition> standard_regions(const TractTable& tracts, const std::vector<CityShare>& shares);

/// region_id, one column per model (names as given), model0_se. Values are
/// rounded to integers.
void write_regions(std::ostream& out, const std::vector<std::string>& model_names,
                   const std::vector<RegionEstimate>& rows);

}  // namespace smallarea
