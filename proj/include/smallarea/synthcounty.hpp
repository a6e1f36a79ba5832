#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "smallarea/survey_data.hpp"

namespace smallarea {

enum class CertaintyMode {
  exact,  // certainty tracts are the true top counts of each stratum
  noisy,  // ranked on a log-normally perturbed count ("local knowledge")
};

struct SynthConfig {
  std::size_t n_tracts = 2054;
  std::size_t n_strata = 8;
  /// Relative stratum sizes; empty uses the built-in eight-stratum profile
  /// (or equal weights for other stratum counts).
  std::vector<std::int64_t> stratum_weights;

  double certainty_fraction = 0.1027;
  CertaintyMode certainty_mode = CertaintyMode::exact;
  double certainty_noise = 1.0;  // log-scale sd in noisy mode

  // Count mean: base + industrial_slope * pct_industrial
  //           + vacancy_amplitude * [pct_vacant > vacancy_threshold]
  //           + income_amplitude  * [median_income < income_threshold]
  double base_rate = 3.0;
  double industrial_slope = 20.0;
  double vacancy_threshold = 0.10;
  double vacancy_amplitude = 40.0;
  double income_threshold = 38000.0;
  double income_amplitude = 50.0;
  /// Negative-binomial overdispersion 1/size; 0 makes counts the rounded mean.
  double overdispersion = 0.05;

  double cluster_spread_deg = 0.12;
  /// Correlation between closeness to the stratum centre and low income.
  double spatial_gradient = 0.0;
  std::size_t n_cities = 12;
  std::size_t n_out_of_frame_cities = 3;
  /// Strata hosting the out-of-frame city centres, cycled; empty uses
  /// SPA2, SPA3, SPA8 for the built-in profile and random tracts otherwise.
  std::vector<std::string> out_of_frame_strata;
  double city_radius_deg = 0.05;

  std::int64_t total_sample = 299;
  /// Stratum whose first sampled tract gets a blank count; empty disables.
  std::string ambiguous_stratum = "SPA2";
  double shelter_fraction = 0.25;

  std::uint64_t seed = 1;

  /// Throws Error(invalid_argument) on out-of-range parameters.
  void validate() const;
};

/// A generated county: the surveyed tract table (statuses set, counts on
/// certainty and sampled tracts), the latent true count of every tract,
/// shelters, and city area shares.
struct SynthCounty {
  TractTable tracts;
  std::vector<std::int64_t> true_counts;  // aligned with tracts
  std::vector<ShelterCount> shelters;
  std::vector<CityShare> shares;
};

/// Deterministic mean count for a tract's covariates under `config`.
double expected_count(const Covariates& covariates, const SynthConfig& config);

/// Generates tracts, true counts, cities, out-of-frame and certainty flags,
/// then draws the stratified sample and records its counts.
SynthCounty generate_county(const SynthConfig& config);

void write_truth(std::ostream& out, const TractTable& tracts, const std::vector<std::int64_t>& true_counts);
std::vector<std::pair<std::string, std::int64_t>> read_truth(std::istream& in, const std::string& source = "truth.csv");

/// JSON object whose keys are SynthConfig field names; unspecified fields
/// keep their values from `base`.
SynthConfig read_synth_config(std::istream& in, SynthConfig base = {});

}  // namespace smallarea
