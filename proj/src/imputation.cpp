#include "smallarea/imputation.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <map>
#include <ostream>
#include <set>

#include <json.hpp>

#include "smallarea/csv.hpp"
#include "smallarea/error.hpp"

namespace smallarea {

ModelSpec model0_spec() {
  ModelSpec s;
  s.name = "Model 0";
  s.kind = ModelKind::spa_mean;
  return s;
}

namespace {

ModelSpec forest_spec(std::string name, std::vector<std::string> predictors, std::uint64_t seed) {
  ModelSpec s;
  s.name = std::move(name);
  s.kind = ModelKind::forest;
  s.predictors = std::move(predictors);
  s.forest.seed = seed;
  return s;
}

}  // namespace

ModelSpec model1_spec(std::uint64_t seed) {
  return forest_spec("Model 1", {"median_income", "pct_vacant", "pct_residential"}, seed);
}

ModelSpec model2_spec(std::uint64_t seed) {
  return forest_spec("Model 2", {"median_income", "pct_residential", "pct_industrial", "latitude", "longitude"}, seed);
}

ModelSpec model3_spec(std::uint64_t seed) {
  auto s = model2_spec(seed);
  s.name = "Model 3";
  s.predictors.insert(s.predictors.end(), {"pct_owner_occupied", "pct_vacant", "pct_minority"});
  return s;
}

std::vector<ModelSpec> default_model_specs(std::uint64_t seed) {
  return {model0_spec(), model1_spec(derive_seed(seed, 1)), model2_spec(derive_seed(seed, 2)),
          model3_spec(derive_seed(seed, 3))};
}

namespace {

TractPredictions blank_predictions(const TractTable& tracts, const std::string& model_name) {
  TractPredictions p;
  p.model_name = model_name;
  p.rows.reserve(tracts.size());
  for (const auto& t : tracts) {
    TractPrediction row;
    row.tract_id = t.tract_id;
    row.observed = t.observed_count();
    row.source = row.observed ? CountSource::observed : CountSource::imputed;
    p.rows.push_back(std::move(row));
  }
  return p;
}

// Fills final_count from observed / imputed and checks coverage.
void finalize(TractPredictions& p) {
  for (auto& row : p.rows) {
    if (row.observed) {
      row.final_count = static_cast<double>(*row.observed);
    } else if (row.imputed) {
      row.final_count = *row.imputed;
    } else {
      fail(ErrorKind::missing_prediction, p.model_name + ": no value for tract '" + row.tract_id + "'");
    }
  }
}

bool in_pool(const Tract& t, const ModelSpec& spec) {
  if (!t.observed_count()) return false;
  if (spec.pool == MatchPool::stratum_sampled) return t.status == TractStatus::sampled;
  return t.status == TractStatus::sampled || spec.train_on_certainty;
}

void check_predictors(const ModelSpec& spec) {
  if (spec.predictors.empty()) fail(ErrorKind::invalid_argument, spec.name + ": no predictors");
  for (const auto& name : spec.predictors) {
    if (!is_predictor_name(name)) fail(ErrorKind::invalid_argument, spec.name + ": unknown predictor '" + name + "'");
  }
}

void check_finite_row(const FeatureMatrix& x, std::size_t r, const Tract& t, const ModelSpec& spec) {
  for (std::size_t c = 0; c < x.cols(); ++c) {
    if (!std::isfinite(x.at(r, c))) {
      fail(ErrorKind::invalid_argument,
           spec.name + ": missing covariate '" + spec.predictors[c] + "' on tract '" + t.tract_id + "'");
    }
  }
}

}  // namespace

TractPredictions impute_spa_mean(const TractTable& tracts, const std::string& model_name) {
  std::map<std::string, std::pair<double, std::size_t>> sums;
  for (const auto& t : tracts) {
    if (t.status != TractStatus::sampled) continue;
    if (auto c = t.observed_count()) {
      auto& [sum, n] = sums[t.stratum_id];
      sum += static_cast<double>(*c);
      ++n;
    }
  }
  auto p = blank_predictions(tracts, model_name);
  for (std::size_t i = 0; i < tracts.size(); ++i) {
    auto it = sums.find(tracts[i].stratum_id);
    if (it != sums.end()) {
      p.rows[i].imputed = it->second.first / static_cast<double>(it->second.second);
    } else if (!p.rows[i].observed) {
      fail(ErrorKind::infeasible, model_name + ": stratum '" + tracts[i].stratum_id +
                                      "' has no sampled counts to impute tract '" + tracts[i].tract_id + "'");
    }
  }
  finalize(p);
  return p;
}

FeatureMatrix predictor_matrix(const TractTable& tracts, const std::vector<std::size_t>& rows,
                               const std::vector<std::string>& predictors) {
  FeatureMatrix x(rows.size(), predictors.size());
  for (std::size_t r = 0; r < rows.size(); ++r) {
    for (std::size_t c = 0; c < predictors.size(); ++c) x.at(r, c) = covariate_value(tracts[rows[r]], predictors[c]);
  }
  return x;
}

TractPredictions impute_matched(const TractTable& tracts, const ModelSpec& spec) {
  auto p = blank_predictions(tracts, spec.name);

  if (spec.pool == MatchPool::stratum_sampled) {
    if (spec.k != 0) fail(ErrorKind::invalid_argument, spec.name + ": stratum pool requires k = 0 (whole pool)");
    // Whole-stratum average; predictors play no role.
    std::map<std::string, std::vector<std::size_t>> pools;
    for (std::size_t i = 0; i < tracts.size(); ++i) {
      if (in_pool(tracts[i], spec)) pools[tracts[i].stratum_id].push_back(i);
    }
    for (std::size_t i = 0; i < tracts.size(); ++i) {
      auto it = pools.find(tracts[i].stratum_id);
      if (it == pools.end()) {
        if (!p.rows[i].observed) {
          fail(ErrorKind::infeasible, spec.name + ": no pool tracts for stratum '" + tracts[i].stratum_id + "'");
        }
        continue;
      }
      double sum = 0.0;
      for (auto j : it->second) sum += static_cast<double>(*tracts[j].observed_count());
      p.rows[i].imputed = sum / static_cast<double>(it->second.size());
    }
    finalize(p);
    return p;
  }

  check_predictors(spec);
  std::vector<std::size_t> pool;
  for (std::size_t i = 0; i < tracts.size(); ++i) {
    if (in_pool(tracts[i], spec)) pool.push_back(i);
  }
  if (pool.empty()) fail(ErrorKind::infeasible, spec.name + ": no observed tracts to match against");
  if (spec.k > pool.size()) {
    fail(ErrorKind::infeasible, spec.name + ": k = " + std::to_string(spec.k) + " exceeds the " +
                                    std::to_string(pool.size()) + " observed tracts");
  }

  std::vector<std::size_t> all(tracts.size());
  for (std::size_t i = 0; i < all.size(); ++i) all[i] = i;
  const auto x = predictor_matrix(tracts, all, spec.predictors);
  const std::size_t dims = spec.predictors.size();

  std::vector<double> centre(dims, 0.0);
  std::vector<double> scale(dims, 0.0);
  for (std::size_t c = 0; c < dims; ++c) {
    for (auto j : pool) centre[c] += x.at(j, c);
    centre[c] /= static_cast<double>(pool.size());
    for (auto j : pool) scale[c] += (x.at(j, c) - centre[c]) * (x.at(j, c) - centre[c]);
    scale[c] = std::sqrt(scale[c] / static_cast<double>(pool.size()));
    if (!(scale[c] > 0.0)) scale[c] = 1.0;
  }

  std::vector<bool> pooled(tracts.size(), false);
  for (auto j : pool) pooled[j] = true;

  std::vector<std::pair<double, std::size_t>> dist;
  for (std::size_t i = 0; i < tracts.size(); ++i) {
    check_finite_row(x, i, tracts[i], spec);
    dist.clear();
    for (auto j : pool) {
      // Held-out fit for pool members: a tract is never its own neighbour.
      if (j == i && spec.k != 0) continue;
      double d2 = 0.0;
      for (std::size_t c = 0; c < dims; ++c) {
        const double d = (x.at(i, c) - x.at(j, c)) / scale[c];
        d2 += d * d;
      }
      dist.emplace_back(d2, j);
    }
    if (dist.empty()) continue;
    const std::size_t k = spec.k == 0 ? dist.size() : std::min(spec.k, dist.size());
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
    std::vector<std::size_t> chosen;
    for (std::size_t m = 0; m < k; ++m) chosen.push_back(dist[m].second);
    std::sort(chosen.begin(), chosen.end());
    double sum = 0.0;
    for (auto j : chosen) sum += static_cast<double>(*tracts[j].observed_count());
    p.rows[i].imputed = sum / static_cast<double>(k);
  }
  finalize(p);
  return p;
}

TractPredictions impute_forest_model(const TractTable& tracts, const ModelSpec& spec, std::size_t n_threads) {
  check_predictors(spec);
  ModelSpec fit_spec = spec;
  fit_spec.pool = MatchPool::observed;
  std::vector<std::size_t> train;
  for (std::size_t i = 0; i < tracts.size(); ++i) {
    if (in_pool(tracts[i], fit_spec)) train.push_back(i);
  }
  if (train.size() < 2) fail(ErrorKind::infeasible, spec.name + ": need at least 2 observed tracts to fit");

  const auto x_train = predictor_matrix(tracts, train, spec.predictors);
  for (std::size_t r = 0; r < train.size(); ++r) check_finite_row(x_train, r, tracts[train[r]], spec);
  std::vector<double> y;
  y.reserve(train.size());
  for (auto i : train) y.push_back(static_cast<double>(*tracts[i].observed_count()));

  const auto forest = fit_forest(x_train, y, spec.forest, n_threads);
  const auto oob = oob_fitted(forest, x_train);

  auto p = blank_predictions(tracts, spec.name);
  std::vector<bool> trained(tracts.size(), false);
  for (std::size_t r = 0; r < train.size(); ++r) {
    p.rows[train[r]].imputed = oob.fitted[r];
    trained[train[r]] = true;
  }
  std::vector<std::size_t> rest;
  for (std::size_t i = 0; i < tracts.size(); ++i) {
    if (!trained[i]) rest.push_back(i);
  }
  const auto x_rest = predictor_matrix(tracts, rest, spec.predictors);
  for (std::size_t r = 0; r < rest.size(); ++r) {
    check_finite_row(x_rest, r, tracts[rest[r]], spec);
    p.rows[rest[r]].imputed = forest.predict(x_rest.row(r));
  }
  finalize(p);
  return p;
}

TractPredictions impute(const TractTable& tracts, const ModelSpec& spec, std::size_t n_threads) {
  switch (spec.kind) {
    case ModelKind::spa_mean: return impute_spa_mean(tracts, spec.name);
    case ModelKind::matched: return impute_matched(tracts, spec);
    case ModelKind::forest: return impute_forest_model(tracts, spec, n_threads);
  }
  fail(ErrorKind::invalid_argument, "unknown model kind");
}

FullCounts assemble_full_counts(const TractTable& tracts, const TractPredictions& predictions) {
  std::map<std::string_view, const TractPrediction*> by_id;
  for (const auto& row : predictions.rows) by_id[row.tract_id] = &row;
  FullCounts out;
  out.counts.reserve(tracts.size());
  for (const auto& t : tracts) {
    if (auto c = t.observed_count()) {
      out.counts.push_back(static_cast<double>(*c));
      out.source.push_back(CountSource::observed);
      continue;
    }
    auto it = by_id.find(t.tract_id);
    if (it == by_id.end() || !it->second->imputed) {
      fail(ErrorKind::missing_prediction,
           predictions.model_name + ": no imputed value for tract '" + t.tract_id + "'");
    }
    out.counts.push_back(*it->second->imputed);
    out.source.push_back(CountSource::imputed);
  }
  return out;
}

void write_predictions(std::ostream& out, const std::vector<TractPredictions>& models) {
  out << csv::join_record(kPredictionColumns) << '\n';
  for (const auto& m : models) {
    for (const auto& r : m.rows) {
      out << csv::join_record({r.tract_id, m.model_name, r.observed ? std::to_string(*r.observed) : std::string(),
                               r.imputed ? csv::format_double(*r.imputed) : std::string(),
                               csv::format_double(r.final_count),
                               r.source == CountSource::observed ? "observed" : "imputed"})
          << '\n';
    }
  }
}

std::vector<TractPredictions> read_predictions(std::istream& in, const std::string& source) {
  csv::Reader reader(in, source);
  reader.expect_header(kPredictionColumns);
  std::vector<TractPredictions> models;
  std::map<std::string, std::size_t> position;
  std::set<std::pair<std::string, std::string>> seen;
  std::vector<std::string> f;
  while (reader.next(f)) {
    TractPrediction r;
    r.tract_id = f[0];
    if (r.tract_id.empty()) reader.fail_at("tract_id", "empty tract_id");
    if (f[1].empty()) reader.fail_at("model_name", "empty model_name");
    if (!seen.emplace(f[1], f[0]).second) {
      reader.fail_at("tract_id", "duplicate row for tract '" + f[0] + "' in model '" + f[1] + "'");
    }
    if (!f[2].empty()) {
      r.observed = csv::parse_int(f[2]);
      if (!r.observed || *r.observed < 0) reader.fail_at("observed", "expected a non-negative integer");
    }
    if (!f[3].empty()) {
      r.imputed = csv::parse_double(f[3]);
      if (!r.imputed || !std::isfinite(*r.imputed) || *r.imputed < 0) {
        reader.fail_at("imputed", "expected a non-negative number");
      }
    }
    auto final_count = csv::parse_double(f[4]);
    if (!final_count || !std::isfinite(*final_count)) reader.fail_at("final", "expected a number");
    r.final_count = *final_count;
    if (f[5] == "observed") {
      r.source = CountSource::observed;
    } else if (f[5] == "imputed") {
      r.source = CountSource::imputed;
    } else {
      reader.fail_at("source", "expected 'observed' or 'imputed'");
    }
    if ((r.source == CountSource::observed) != r.observed.has_value()) {
      reader.fail_at("source", "source disagrees with the observed column");
    }
    auto [it, inserted] = position.emplace(f[1], models.size());
    if (inserted) models.push_back({f[1], {}});
    models[it->second].rows.push_back(std::move(r));
  }
  return models;
}

TractPredictions align_predictions(const TractTable& tracts, const TractPredictions& predictions) {
  std::map<std::string_view, const TractPrediction*> by_id;
  for (const auto& row : predictions.rows) by_id[row.tract_id] = &row;
  TractPredictions out{predictions.model_name, {}};
  out.rows.reserve(tracts.size());
  for (const auto& t : tracts) {
    auto it = by_id.find(t.tract_id);
    if (it == by_id.end()) {
      fail(ErrorKind::missing_prediction, predictions.model_name + ": no row for tract '" + t.tract_id + "'");
    }
    out.rows.push_back(*it->second);
  }
  return out;
}

ModelConfig read_model_config(std::istream& in, std::uint64_t default_seed) {
  using nlohmann::json;
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::exception& e) {
    fail(ErrorKind::schema, std::string("model config: ") + e.what());
  }
  try {
    ModelConfig cfg;
    cfg.seed = doc.value("seed", default_seed);
    const bool train_on_certainty = doc.value("train_on_certainty", true);
    std::set<std::string> names;
    std::size_t position = 0;
    for (const auto& m : doc.at("models")) {
      ++position;
      ModelSpec s;
      s.name = m.at("name").get<std::string>();
      if (s.name.empty() || !names.insert(s.name).second) {
        fail(ErrorKind::schema, "model config: empty or duplicate model name '" + s.name + "'");
      }
      const auto kind = m.at("kind").get<std::string>();
      if (kind == "spa_mean") {
        s.kind = ModelKind::spa_mean;
      } else if (kind == "matched") {
        s.kind = ModelKind::matched;
      } else if (kind == "forest") {
        s.kind = ModelKind::forest;
      } else {
        fail(ErrorKind::schema, "model config: unknown kind '" + kind + "'");
      }
      s.predictors = m.value("predictors", std::vector<std::string>{});
      s.k = m.value("k", std::size_t{5});
      const auto pool = m.value("pool", std::string("observed"));
      if (pool == "observed") {
        s.pool = MatchPool::observed;
      } else if (pool == "stratum_sampled") {
        s.pool = MatchPool::stratum_sampled;
      } else {
        fail(ErrorKind::schema, "model config: unknown pool '" + pool + "'");
      }
      s.train_on_certainty = m.value("train_on_certainty", train_on_certainty);
      s.forest.n_trees = m.value("n_trees", s.forest.n_trees);
      s.forest.mtry = m.value("mtry", s.forest.mtry);
      s.forest.min_node_size = m.value("min_node_size", s.forest.min_node_size);
      s.forest.seed = m.contains("seed") ? m.at("seed").get<std::uint64_t>() : derive_seed(cfg.seed, position - 1);
      if (s.kind != ModelKind::spa_mean && s.pool == MatchPool::observed) {
        if (s.predictors.empty()) fail(ErrorKind::schema, "model config: '" + s.name + "' lists no predictors");
        for (const auto& p : s.predictors) {
          if (!is_predictor_name(p)) fail(ErrorKind::schema, "model config: unknown predictor '" + p + "'");
        }
      }
      cfg.models.push_back(std::move(s));
    }
    if (cfg.models.empty()) fail(ErrorKind::schema, "model config: no models");
    return cfg;
  } catch (const json::exception& e) {
    fail(ErrorKind::schema, std::string("model config: ") + e.what());
  }
}

}  // namespace smallarea
