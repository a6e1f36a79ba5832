#include "smallarea/smallarea.h"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>
#include <memory>
#include <new>
#include <string>

#include "smallarea/aggregation.hpp"
#include "smallarea/error.hpp"
#include "smallarea/estimator.hpp"
#include "smallarea/forest.hpp"
#include "smallarea/imputation.hpp"
#include "smallarea/sampling_design.hpp"
#include "smallarea/survey_data.hpp"
#include "smallarea/synthcounty.hpp"
#include "smallarea/validation.hpp"

struct sa_dataset {
  smallarea::TractTable tracts;
  std::vector<smallarea::ShelterCount> shelters;
  std::vector<smallarea::CityShare> shares;
};

struct sa_predictions {
  std::vector<smallarea::TractPredictions> models;
};

struct sa_forest {
  smallarea::Forest forest;
};

namespace {

thread_local std::string g_last_error;

sa_status to_status(smallarea::ErrorKind kind) {
  using smallarea::ErrorKind;
  switch (kind) {
    case ErrorKind::invalid_argument: return SA_ERR_INVALID_ARGUMENT;
    case ErrorKind::schema: return SA_ERR_SCHEMA;
    case ErrorKind::infeasible: return SA_ERR_INFEASIBLE;
    case ErrorKind::missing_prediction: return SA_ERR_MISSING_PREDICTION;
    case ErrorKind::io: return SA_ERR_IO;
  }
  return SA_ERR_INTERNAL;
}

template <typename F>
sa_status guarded(F&& body) {
  try {
    g_last_error.clear();
    body();
    return SA_OK;
  } catch (const smallarea::Error& e) {
    g_last_error = e.what();
    return to_status(e.kind());
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return SA_ERR_INTERNAL;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return SA_ERR_INTERNAL;
  } catch (...) {
    g_last_error = "unknown error";
    return SA_ERR_INTERNAL;
  }
}

void require(bool condition, const char* message) {
  if (!condition) smallarea::fail(smallarea::ErrorKind::invalid_argument, message);
}

std::ofstream open_output(const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) smallarea::fail(smallarea::ErrorKind::io, "cannot write '" + path.string() + "'");
  return out;
}

void close_output(std::ofstream& out, const std::filesystem::path& path) {
  out.close();
  if (!out) smallarea::fail(smallarea::ErrorKind::io, "error writing '" + path.string() + "'");
}

template <typename Writer>
void write_file(const std::filesystem::path& path, Writer&& writer) {
  auto out = open_output(path);
  writer(out);
  close_output(out, path);
}

}  // namespace

extern "C" {

const char* sa_version(void) { return "1.0.0"; }

const char* sa_last_error(void) { return g_last_error.c_str(); }

const char* sa_status_name(sa_status status) {
  switch (status) {
    case SA_OK: return "ok";
    case SA_ERR_INVALID_ARGUMENT: return "invalid argument";
    case SA_ERR_SCHEMA: return "bad schema";
    case SA_ERR_INFEASIBLE: return "infeasible";
    case SA_ERR_MISSING_PREDICTION: return "missing prediction";
    case SA_ERR_IO: return "i/o error";
    case SA_ERR_INTERNAL: return "internal error";
  }
  return "unknown status";
}

sa_status sa_expansion_total(const int64_t* counts, size_t n, int64_t frame_size, double* out) {
  return guarded([&] {
    require(out != nullptr && (counts != nullptr || n == 0), "sa_expansion_total: null pointer");
    *out = smallarea::expansion_total({counts, n}, frame_size);
  });
}

sa_status sa_count_variance(const int64_t* counts, size_t n, double* out) {
  return guarded([&] {
    require(out != nullptr && (counts != nullptr || n == 0), "sa_count_variance: null pointer");
    *out = smallarea::count_variance({counts, n});
  });
}

sa_status sa_total_variance(double count_variance, int64_t frame_size, int64_t sample_size, double* out) {
  return guarded([&] {
    require(out != nullptr, "sa_total_variance: null pointer");
    *out = smallarea::total_variance(count_variance, frame_size, sample_size);
  });
}

sa_status sa_dataset_load(const char* tracts_path, const char* shelters_path, const char* shares_path,
                          sa_ambiguity_policy policy, sa_dataset** out) {
  return guarded([&] {
    require(tracts_path != nullptr && out != nullptr, "sa_dataset_load: null pointer");
    require(policy == SA_AMBIGUITY_DROP || policy == SA_AMBIGUITY_ZERO, "sa_dataset_load: unknown ambiguity policy");
    auto ds = std::make_unique<sa_dataset>();
    ds->tracts = smallarea::load_tracts(tracts_path, policy == SA_AMBIGUITY_DROP
                                                         ? smallarea::AmbiguityPolicy::drop_ambiguous
                                                         : smallarea::AmbiguityPolicy::treat_as_zero);
    if (shelters_path) ds->shelters = smallarea::load_shelters(shelters_path);
    if (shares_path) ds->shares = smallarea::load_city_shares(shares_path);
    *out = ds.release();
  });
}

void sa_dataset_free(sa_dataset* dataset) { delete dataset; }

size_t sa_dataset_tract_count(const sa_dataset* dataset) { return dataset ? dataset->tracts.size() : 0; }

sa_status sa_dataset_write_tracts(const sa_dataset* dataset, const char* path) {
  return guarded([&] {
    require(dataset != nullptr && path != nullptr, "sa_dataset_write_tracts: null pointer");
    write_file(path, [&](std::ostream& o) { smallarea::write_tracts(o, dataset->tracts); });
  });
}

void sa_synth_options_init(sa_synth_options* options) {
  if (!options) return;
  const smallarea::SynthConfig defaults;
  options->seed = defaults.seed;
  options->n_tracts = defaults.n_tracts;
  options->n_strata = defaults.n_strata;
  options->total_sample = defaults.total_sample;
  options->certainty_fraction = defaults.certainty_fraction;
  options->noisy_certainty = defaults.certainty_mode == smallarea::CertaintyMode::noisy;
  options->config_path = nullptr;
}

sa_status sa_synth_write(const sa_synth_options* options, const char* out_dir) {
  return guarded([&] {
    require(options != nullptr && out_dir != nullptr, "sa_synth_write: null pointer");
    smallarea::SynthConfig cfg;
    cfg.seed = options->seed;
    cfg.n_tracts = options->n_tracts;
    cfg.n_strata = options->n_strata;
    cfg.total_sample = options->total_sample;
    cfg.certainty_fraction = options->certainty_fraction;
    cfg.certainty_mode = options->noisy_certainty ? smallarea::CertaintyMode::noisy : smallarea::CertaintyMode::exact;
    if (options->config_path) {
      std::ifstream in(options->config_path);
      if (!in) smallarea::fail(smallarea::ErrorKind::io, std::string("cannot open '") + options->config_path + "'");
      cfg = smallarea::read_synth_config(in, cfg);
    }
    const auto county = smallarea::generate_county(cfg);
    const std::filesystem::path dir(out_dir);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec) smallarea::fail(smallarea::ErrorKind::io, "cannot create '" + dir.string() + "': " + ec.message());
    write_file(dir / "tracts.csv", [&](std::ostream& o) { smallarea::write_tracts(o, county.tracts); });
    write_file(dir / "shelters.csv", [&](std::ostream& o) { smallarea::write_shelters(o, county.shelters); });
    write_file(dir / "city_shares.csv", [&](std::ostream& o) { smallarea::write_city_shares(o, county.shares); });
    write_file(dir / "truth.csv",
               [&](std::ostream& o) { smallarea::write_truth(o, county.tracts, county.true_counts); });
  });
}

sa_status sa_design_write(const sa_dataset* dataset, int64_t total_sample, uint64_t seed, const char* plan_path) {
  return guarded([&] {
    require(dataset != nullptr && plan_path != nullptr, "sa_design_write: null pointer");
    const auto plan = smallarea::make_plan(dataset->tracts, total_sample, seed);
    const auto selection = smallarea::draw_stratified(plan);
    write_file(plan_path, [&](std::ostream& o) { smallarea::write_plan(o, plan, selection); });
  });
}

sa_status sa_estimate_write(const sa_dataset* dataset, const char* table_path, double* county_total,
                            double* county_se) {
  return guarded([&] {
    require(dataset != nullptr && table_path != nullptr, "sa_estimate_write: null pointer");
    const auto county = smallarea::county_report(smallarea::estimate_strata(dataset->tracts, dataset->shelters));
    write_file(table_path, [&](std::ostream& o) { smallarea::write_table1(o, county); });
    if (county_total) *county_total = county.total;
    if (county_se) *county_se = county.se ? *county.se : std::numeric_limits<double>::quiet_NaN();
  });
}

void sa_impute_options_init(sa_impute_options* options) {
  if (!options) return;
  *options = sa_impute_options{0, nullptr, 0, 0, 0, 1};
}

sa_status sa_impute(const sa_dataset* dataset, const sa_impute_options* options, sa_predictions** out) {
  return guarded([&] {
    require(dataset != nullptr && options != nullptr && out != nullptr, "sa_impute: null pointer");
    std::vector<smallarea::ModelSpec> specs;
    if (options->model_config_path) {
      std::ifstream in(options->model_config_path);
      if (!in) {
        smallarea::fail(smallarea::ErrorKind::io, std::string("cannot open '") + options->model_config_path + "'");
      }
      specs = smallarea::read_model_config(in, options->seed).models;
    } else {
      specs = smallarea::default_model_specs(options->seed);
    }
    auto preds = std::make_unique<sa_predictions>();
    for (auto& spec : specs) {
      if (options->n_trees) spec.forest.n_trees = options->n_trees;
      if (options->mtry) spec.forest.mtry = options->mtry;
      if (options->min_node_size) spec.forest.min_node_size = options->min_node_size;
      preds->models.push_back(smallarea::impute(dataset->tracts, spec, options->n_threads));
    }
    *out = preds.release();
  });
}

sa_status sa_predictions_load(const char* path, sa_predictions** out) {
  return guarded([&] {
    require(path != nullptr && out != nullptr, "sa_predictions_load: null pointer");
    std::ifstream in(path);
    if (!in) smallarea::fail(smallarea::ErrorKind::io, std::string("cannot open '") + path + "'");
    auto preds = std::make_unique<sa_predictions>();
    preds->models = smallarea::read_predictions(in, path);
    *out = preds.release();
  });
}

sa_status sa_predictions_write(const sa_predictions* predictions, const char* path) {
  return guarded([&] {
    require(predictions != nullptr && path != nullptr, "sa_predictions_write: null pointer");
    write_file(path, [&](std::ostream& o) { smallarea::write_predictions(o, predictions->models); });
  });
}

void sa_predictions_free(sa_predictions* predictions) { delete predictions; }

size_t sa_predictions_model_count(const sa_predictions* predictions) {
  return predictions ? predictions->models.size() : 0;
}

const char* sa_predictions_model_name(const sa_predictions* predictions, size_t index) {
  if (!predictions || index >= predictions->models.size()) return nullptr;
  return predictions->models[index].model_name.c_str();
}

sa_status sa_aggregate_write(const sa_dataset* dataset, const sa_predictions* predictions, const char* regions_path) {
  return guarded([&] {
    require(dataset != nullptr && predictions != nullptr && regions_path != nullptr,
            "sa_aggregate_write: null pointer");
    const auto strata = smallarea::estimate_strata(dataset->tracts, dataset->shelters);
    const auto regions = smallarea::standard_regions(dataset->tracts, dataset->shares);
    const auto rows = smallarea::comparison_table(dataset->tracts, regions, predictions->models, strata);
    std::vector<std::string> names;
    for (const auto& m : predictions->models) names.push_back(m.model_name);
    write_file(regions_path, [&](std::ostream& o) { smallarea::write_regions(o, names, rows); });
  });
}

void sa_validate_options_init(sa_validate_options* options) {
  if (!options) return;
  *options = sa_validate_options{0, 500, nullptr, 0, nullptr, 0, SA_USOL_SUBGROUP, 0};
}

sa_status sa_validate_write(const sa_dataset* dataset, const sa_predictions* predictions,
                            const sa_validate_options* options, const char* table_path) {
  return guarded([&] {
    require(dataset != nullptr && predictions != nullptr && options != nullptr && table_path != nullptr,
            "sa_validate_write: null pointer");
    require(options->sizes != nullptr || options->n_sizes == 0, "sa_validate_write: null sizes");
    require(options->excluded_strata != nullptr || options->n_excluded_strata == 0,
            "sa_validate_write: null excluded strata");
    smallarea::ValidationExclusions exclusions;
    for (size_t i = 0; i < options->n_excluded_strata; ++i) exclusions.strata.insert(options->excluded_strata[i]);
    const auto matrix = smallarea::build_matrix(dataset->tracts, predictions->models, exclusions);
    smallarea::Table5Options t5;
    if (options->sizes) t5.sizes.assign(options->sizes, options->sizes + options->n_sizes);
    t5.draws = options->draws;
    t5.seed = options->seed;
    t5.denominator = options->denominator == SA_USOL_ALL ? smallarea::UsOlDenominator::all_draws
                                                         : smallarea::UsOlDenominator::subgroup;
    t5.geographic.include_seed = options->include_seed_tract != 0;
    const auto rows = smallarea::table5_report(matrix, smallarea::matrix_locations(matrix, dataset->tracts), t5);
    write_file(table_path, [&](std::ostream& o) { smallarea::write_table5(o, rows); });
  });
}

void sa_forest_params_init(sa_forest_params* params) {
  if (!params) return;
  const smallarea::ForestParams defaults;
  *params = sa_forest_params{defaults.n_trees, defaults.mtry, defaults.min_node_size, defaults.seed, 1};
}

sa_status sa_forest_fit(const double* x, size_t rows, size_t cols, const double* y, const sa_forest_params* params,
                        sa_forest** out) {
  return guarded([&] {
    require(x != nullptr && y != nullptr && params != nullptr && out != nullptr, "sa_forest_fit: null pointer");
    smallarea::FeatureMatrix m(rows, cols, std::vector<double>(x, x + rows * cols));
    smallarea::ForestParams p;
    p.n_trees = params->n_trees;
    p.mtry = params->mtry;
    p.min_node_size = params->min_node_size;
    p.seed = params->seed;
    auto f = std::make_unique<sa_forest>();
    f->forest = smallarea::fit_forest(m, {y, rows}, p, params->n_threads);
    *out = f.release();
  });
}

void sa_forest_free(sa_forest* forest) { delete forest; }

size_t sa_forest_tree_count(const sa_forest* forest) { return forest ? forest->forest.trees().size() : 0; }

sa_status sa_forest_predict(const sa_forest* forest, const double* x, size_t cols, double* out) {
  return guarded([&] {
    require(forest != nullptr && x != nullptr && out != nullptr, "sa_forest_predict: null pointer");
    *out = forest->forest.predict({x, cols});
  });
}

sa_status sa_forest_oob(const sa_forest* forest, const double* x, size_t rows, size_t cols, double* fitted,
                        int* no_oob) {
  return guarded([&] {
    require(forest != nullptr && x != nullptr && fitted != nullptr, "sa_forest_oob: null pointer");
    smallarea::FeatureMatrix m(rows, cols, std::vector<double>(x, x + rows * cols));
    const auto fit = smallarea::oob_fitted(forest->forest, m);
    for (size_t i = 0; i < rows; ++i) {
      fitted[i] = fit.fitted[i];
      if (no_oob) no_oob[i] = fit.no_oob_tree[i] ? 1 : 0;
    }
  });
}

sa_status sa_forest_save(const sa_forest* forest, const char* path) {
  return guarded([&] {
    require(forest != nullptr && path != nullptr, "sa_forest_save: null pointer");
    write_file(path, [&](std::ostream& o) { smallarea::write_forest(o, forest->forest); });
  });
}

sa_status sa_forest_load(const char* path, sa_forest** out) {
  return guarded([&] {
    require(path != nullptr && out != nullptr, "sa_forest_load: null pointer");
    std::ifstream in(path);
    if (!in) smallarea::fail(smallarea::ErrorKind::io, std::string("cannot open '") + path + "'");
    auto f = std::make_unique<sa_forest>();
    f->forest = smallarea::read_forest(in);
    *out = f.release();
  });
}

}  // extern "C"
