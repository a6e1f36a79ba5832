#pragma once

#include <cstdint>
#include <iosfwd>
#include <set>
#include <string>
#include <vector>

#include "smallarea/imputation.hpp"
#include "smallarea/survey_data.hpp"

namespace smallarea {

/// Sampled tracts with their observed count ("truth") and each model's
/// held-out prediction.
struct ValidationMatrix {
  std::vector<std::string> model_names;
  std::vector<std::string> tract_ids;
  std::vector<double> truth;
  std::vector<std::vector<double>> predictions;  // [model][row]

  std::size_t rows() const noexcept { return tract_ids.size(); }
};

struct ValidationExclusions {
  std::set<std::string> strata;
};

/// Rows are sampled tracts with an observed count outside the excluded
/// strata; a dropped ambiguous count never enters. Throws
/// Error(missing_prediction) when a model lacks a value for a retained tract.
ValidationMatrix build_matrix(const TractTable& tracts, const std::vector<TractPredictions>& models,
                              const ValidationExclusions& exclusions = {});

struct GeoPoint {
  double latitude = 0.0;
  double longitude = 0.0;
};

std::vector<GeoPoint> matrix_locations(const ValidationMatrix& matrix, const TractTable& tracts);

struct AggregationDraw {
  std::vector<std::size_t> rows;  // matrix rows, ascending
  double truth_total = 0.0;
  std::vector<double> predicted_totals;  // one per model
  bool operator==(const AggregationDraw&) const = default;
};

std::vector<AggregationDraw> draw_random_aggregates(const ValidationMatrix& matrix, std::size_t size,
                                                    std::size_t draws, std::uint64_t seed);

struct GeographicOptions {
  /// Extra neighbours in the candidate pool beyond the aggregate size.
  std::size_t pool_margin = 8;
  /// When true the seed tract counts as one of the pool's members.
  bool include_seed = false;
};

/// Candidate pool around `seed_row`: the size + margin rows nearest to it by
/// Euclidean distance on (latitude, longitude * cos(mean latitude)), ties by
/// tract_id. Returned nearest first.
std::vector<std::size_t> geographic_pool(const ValidationMatrix& matrix, const std::vector<GeoPoint>& locations,
                                         std::size_t seed_row, std::size_t size, const GeographicOptions& options = {});

std::vector<AggregationDraw> draw_geographic_aggregates(const ValidationMatrix& matrix,
                                                        const std::vector<GeoPoint>& locations, std::size_t size,
                                                        std::size_t draws, std::uint64_t seed,
                                                        const GeographicOptions& options = {});

enum class Selection { random, geographic };
std::string_view to_string(Selection selection);

enum class UsOlDenominator { subgroup, all_draws };

/// Percentages; rounding happens in write_table5.
struct ScoreRow {
  std::size_t size = 0;
  Selection selection = Selection::random;
  std::string model;
  double mape = 0.0;
  double us = 0.0;  // small totals undershot
  double ol = 0.0;  // large totals overshot
  std::size_t zero_truth_excluded = 0;
  // Complementary rates within each subgroup.
  double small_overshoot = 0.0;
  double large_undershoot = 0.0;
  std::size_t small_draws = 0;
  std::size_t large_draws = 0;
};

/// Small/large split at the median truth total (exact-median draws are in
/// neither group). MAPE is the median absolute percent error over draws with
/// non-zero truth. A prediction equal to the truth is neither an undershoot
/// nor an overshoot.
ScoreRow score_draws(const std::vector<AggregationDraw>& draws, std::size_t model,
                     UsOlDenominator denominator = UsOlDenominator::subgroup);

struct Table5Options {
  std::vector<std::size_t> sizes{4, 8, 16, 32, 64};
  std::size_t draws = 500;
  std::uint64_t seed = 0;
  UsOlDenominator denominator = UsOlDenominator::subgroup;
  GeographicOptions geographic;
};

/// Rows ordered by size, then selection (random first), then model. All
/// models in a (size, selection) cell are scored on the same draws.
std::vector<ScoreRow> table5_report(const ValidationMatrix& matrix, const std::vector<GeoPoint>& locations,
                                    const Table5Options& options);

inline const std::vector<std::string> kTable5Columns = {"size", "selection", "model", "mape",
                                                        "us",   "ol",        "zero_truth_excluded"};

void write_table5(std::ostream& out, const std::vector<ScoreRow>& rows);

}  // namespace smallarea
