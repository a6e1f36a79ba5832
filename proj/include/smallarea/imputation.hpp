#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "smallarea/forest.hpp"
#include "smallarea/survey_data.hpp"

namespace smallarea {

enum class ModelKind { spa_mean, matched, forest };

/// Which observed tracts a matched model may draw neighbours from.
enum class MatchPool {
  observed,         // every certainty and sampled tract with an observed count
  stratum_sampled,  // sampled tracts in the target's own stratum
};

struct ModelSpec {
  std::string name;
  ModelKind kind = ModelKind::spa_mean;
  std::vector<std::string> predictors;
  /// Neighbours averaged by matched models; 0 means the whole pool.
  std::size_t k = 5;
  MatchPool pool = MatchPool::observed;
  ForestParams forest;
  /// When false, certainty tracts are left out of the matched pool and the
  /// forest training set.
  bool train_on_certainty = true;
};

/// Stratum sampled-mean benchmark ("Model 0").
ModelSpec model0_spec();
/// Forest models on 3, 5, and 8 predictors respectively.
ModelSpec model1_spec(std::uint64_t seed);
ModelSpec model2_spec(std::uint64_t seed);
ModelSpec model3_spec(std::uint64_t seed);
std::vector<ModelSpec> default_model_specs(std::uint64_t seed);

enum class CountSource { observed, imputed };

struct TractPrediction {
  std::string tract_id;
  std::optional<std::int64_t> observed;
  /// Model value for the tract. For observed tracts this is the model's
  /// held-out fit (out-of-bag for forests, leave-one-out for matching, the
  /// stratum mean for Model 0); it never replaces the observed count.
  std::optional<double> imputed;
  double final_count = 0.0;
  CountSource source = CountSource::imputed;

  bool operator==(const TractPrediction&) const = default;
};

struct TractPredictions {
  std::string model_name;
  std::vector<TractPrediction> rows;  // aligned with the tract table

  bool operator==(const TractPredictions&) const = default;
};

/// Every tract without an observed count gets the mean count of the sampled
/// tracts in its stratum. Throws Error(infeasible) for a stratum that needs
/// imputation but has no sampled counts.
TractPredictions impute_spa_mean(const TractTable& tracts, const std::string& model_name = "Model 0");

/// Average of the k nearest pool tracts in z-scored predictor space
/// (Euclidean). Standardisation uses pool statistics only; distance ties go to
/// the earlier table row.
TractPredictions impute_matched(const TractTable& tracts, const ModelSpec& spec);

/// Random-forest conditional mean fitted on pool tracts' raw counts, used for
/// every unobserved tract including out-of-frame ones.
TractPredictions impute_forest_model(const TractTable& tracts, const ModelSpec& spec, std::size_t n_threads = 1);

/// Dispatches on spec.kind.
TractPredictions impute(const TractTable& tracts, const ModelSpec& spec, std::size_t n_threads = 1);

/// Design matrix of the named predictors for the given table rows.
FeatureMatrix predictor_matrix(const TractTable& tracts, const std::vector<std::size_t>& rows,
                               const std::vector<std::string>& predictors);

struct FullCounts {
  std::vector<double> counts;  // aligned with the tract table
  std::vector<CountSource> source;
};

/// Observed counts pass through; every other tract takes the prediction's
/// imputed value. Throws Error(missing_prediction) for an uncovered tract.
FullCounts assemble_full_counts(const TractTable& tracts, const TractPredictions& predictions);

inline const std::vector<std::string> kPredictionColumns = {"tract_id", "model_name", "observed",
                                                            "imputed",  "final",      "source"};

void write_predictions(std::ostream& out, const std::vector<TractPredictions>& models);
/// Groups rows by model_name in order of first appearance.
std::vector<TractPredictions> read_predictions(std::istream& in, const std::string& source = "predictions.csv");

/// Re-keys predictions onto the table's row order. Throws
/// Error(missing_prediction) when a tract has no row.
TractPredictions align_predictions(const TractTable& tracts, const TractPredictions& predictions);

struct ModelConfig {
  std::uint64_t seed = 0;
  std::vector<ModelSpec> models;
};

/// JSON model configuration:
///   {"seed": 7, "train_on_certainty": true,
///    "models": [{"name": "Model 1", "kind": "forest",
///                "predictors": ["median_income", ...],
///                "n_trees": 500, "mtry": 1, "min_node_size": 5, "seed": 11},
///               {"name": "Matched", "kind": "matched", "predictors": [...], "k": 5}]}
/// A forest without its own seed gets derive_seed(seed, model position).
ModelConfig read_model_config(std::istream& in, std::uint64_t default_seed);

}  // namespace smallarea
