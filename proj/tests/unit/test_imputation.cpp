#include <doctest.h>

#include <algorithm>
#include <sstream>

#include "helpers.hpp"
#include "smallarea/error.hpp"
#include "smallarea/imputation.hpp"
#include "smallarea/random.hpp"
#include "smallarea/synthcounty.hpp"

using namespace smallarea;
using testing::tract;
using S = TractStatus;

namespace {

Tract at_vacancy(std::string id, std::string stratum, S status, std::optional<std::int64_t> c, double v) {
  auto t = tract(std::move(id), std::move(stratum), status, c);
  t.covariates.pct_vacant = v;
  return t;
}

ModelSpec matched(std::size_t k, std::vector<std::string> predictors = {"pct_vacant"}) {
  ModelSpec s;
  s.name = "Matched";
  s.kind = ModelKind::matched;
  s.k = k;
  s.predictors = std::move(predictors);
  return s;
}

ModelSpec forest_on(std::vector<std::string> predictors, std::uint64_t seed, std::size_t trees = 200) {
  ModelSpec s;
  s.name = "Forest";
  s.kind = ModelKind::forest;
  s.predictors = std::move(predictors);
  s.forest.n_trees = trees;
  s.forest.seed = seed;
  return s;
}

TractTable small_county() {
  return TractTable({tract("a", "A", S::sampled, 10), tract("b", "A", S::sampled, 20), tract("c", "A", S::sampled, 30),
                     tract("d", "A", S::unsampled), tract("e", "A", S::certainty, 200), tract("f", "B", S::sampled, 7),
                     tract("g", "B", S::unsampled), tract("h", "B", S::out_of_frame)});
}

}  // namespace

TEST_CASE("stratum mean imputation") {
  auto t = small_county();
  auto p = impute_spa_mean(t);
  CHECK(p.model_name == "Model 0");
  CHECK(p.rows[3].final_count == 20.0);
  CHECK(p.rows[3].source == CountSource::imputed);
  CHECK(p.rows[6].final_count == 7.0);
  CHECK(p.rows[7].final_count == 7.0);
  CHECK(p.rows[4].final_count == 200.0);
  CHECK(p.rows[4].imputed == 20.0);
  CHECK(p.rows[0].source == CountSource::observed);

  TractTable orphan({tract("x", "A", S::unsampled), tract("y", "B", S::sampled, 1)});
  CHECK_THROWS_AS(impute_spa_mean(orphan), Error);
}

TEST_CASE("a stratum of small samples imputes small values") {
  std::vector<Tract> v;
  const std::int64_t counts[6] = {2, 31, 0, 14, 25, 12};
  for (int i = 0; i < 6; ++i) v.push_back(tract("s" + std::to_string(i), "SPA4", S::sampled, counts[i]));
  for (int i = 0; i < 20; ++i) v.push_back(tract("u" + std::to_string(i), "SPA4", S::unsampled));
  auto p = impute_spa_mean(TractTable(std::move(v)));
  for (const auto& r : p.rows) {
    if (r.source == CountSource::imputed) CHECK(r.final_count < 20.0);
  }
}

TEST_CASE("matched imputation") {
  std::vector<Tract> v;
  const std::int64_t counts[5] = {3, 8, 1, 20, 6};
  for (int i = 0; i < 5; ++i) v.push_back(at_vacancy("o" + std::to_string(i), "A", S::sampled, counts[i], 0.1 * (i + 1)));
  v.push_back(at_vacancy("mid", "A", S::unsampled, std::nullopt, 0.25));
  v.push_back(at_vacancy("twin", "A", S::unsampled, std::nullopt, 0.4));
  TractTable t(std::move(v));

  auto two = impute_matched(t, matched(2));
  CHECK(two.rows[5].final_count == doctest::Approx((8.0 + 1.0) / 2));

  auto one = impute_matched(t, matched(1));
  CHECK(one.rows[6].final_count == 20.0);

  auto all = impute_matched(t, matched(5));
  CHECK(all.rows[5].final_count == doctest::Approx(38.0 / 5));
  CHECK(all.rows[6].final_count == doctest::Approx(38.0 / 5));

  CHECK_THROWS_AS(impute_matched(t, matched(6)), Error);
  CHECK_THROWS_AS(impute_matched(t, matched(1, {"nonsense"})), Error);
}

TEST_CASE("matched values for observed tracts leave the tract out") {
  std::vector<Tract> v;
  for (int i = 0; i < 4; ++i) v.push_back(at_vacancy("o" + std::to_string(i), "A", S::sampled, i * 10, 0.1 * i));
  auto p = impute_matched(TractTable(std::move(v)), matched(1));
  CHECK(p.rows[0].imputed == 10.0);
  CHECK(p.rows[0].final_count == 0.0);
}

TEST_CASE("stratum-pool matching reproduces stratum means") {
  SynthConfig cfg;
  cfg.n_tracts = 300;
  cfg.total_sample = 60;
  cfg.seed = 4;
  auto county = generate_county(cfg);
  auto spec = matched(0);
  spec.pool = MatchPool::stratum_sampled;
  auto a = impute_matched(county.tracts, spec);
  auto b = impute_spa_mean(county.tracts, "Matched");
  CHECK(a == b);
}

TEST_CASE("imputations stay within the observed range and never overwrite counts") {
  SynthConfig cfg;
  cfg.n_tracts = 400;
  cfg.total_sample = 80;
  cfg.seed = 12;
  auto county = generate_county(cfg);
  std::int64_t lo = INT64_MAX, hi = 0;
  for (const auto& t : county.tracts) {
    if (auto c = t.observed_count()) {
      lo = std::min(lo, *c);
      hi = std::max(hi, *c);
    }
  }
  std::vector<ModelSpec> specs = default_model_specs(3);
  specs.push_back(matched(5, {"median_income", "pct_vacant"}));
  for (auto& s : specs) {
    s.forest.n_trees = 50;
    auto p = impute(county.tracts, s, 2);
    REQUIRE(p.rows.size() == county.tracts.size());
    for (std::size_t i = 0; i < p.rows.size(); ++i) {
      const auto& r = p.rows[i];
      if (auto c = county.tracts[i].observed_count()) {
        CHECK(r.final_count == static_cast<double>(*c));
        CHECK(r.source == CountSource::observed);
      } else {
        CHECK(r.final_count >= static_cast<double>(lo));
        CHECK(r.final_count <= static_cast<double>(hi));
      }
    }
  }
}

TEST_CASE("forest imputation") {
  std::vector<Tract> v;
  for (int i = 0; i < 30; ++i) {
    v.push_back(at_vacancy("o" + std::to_string(i), "A", S::sampled, 9, 0.01 * i));
    v.push_back(at_vacancy("u" + std::to_string(i), "A", S::unsampled, std::nullopt, 0.015 * i));
  }
  TractTable t(std::move(v));
  auto p = impute_forest_model(t, forest_on({"pct_vacant", "median_income"}, 1, 30));
  for (const auto& r : p.rows) CHECK(r.final_count == 9.0);

  auto spec = forest_on({"pct_vacant"}, 5, 40);
  CHECK(impute(t, spec, 1) == impute(t, spec, 3));
}

TEST_CASE("forest recovers a step in the mean") {
  Rng rng(31);
  std::vector<Tract> v;
  for (int i = 0; i < 600; ++i) {
    const double vac = rng.uniform01() * 0.4;
    const double mean = vac > 0.2 ? 40.0 : 5.0;
    const bool obs = i % 3 == 0;
    v.push_back(at_vacancy("t" + std::to_string(i), "A", obs ? S::sampled : S::unsampled,
                           obs ? std::optional<std::int64_t>(rng.poisson(mean)) : std::nullopt, vac));
  }
  TractTable t(std::move(v));
  auto p = impute_forest_model(t, forest_on({"pct_vacant"}, 2, 300));
  double lo_sum = 0, hi_sum = 0;
  int lo_n = 0, hi_n = 0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    if (p.rows[i].source != CountSource::imputed) continue;
    const double vac = t[i].covariates.pct_vacant;
    if (vac < 0.18) {
      lo_sum += p.rows[i].final_count;
      ++lo_n;
    } else if (vac > 0.22) {
      hi_sum += p.rows[i].final_count;
      ++hi_n;
    }
  }
  CHECK(std::abs(lo_sum / lo_n - 5.0) <= 0.15 * 5.0);
  CHECK(std::abs(hi_sum / hi_n - 40.0) <= 0.15 * 40.0);
}

TEST_CASE("forest imputation rejects a missing covariate") {
  auto bad = at_vacancy("u", "A", S::unsampled, std::nullopt, 0.2);
  bad.covariates.median_income = std::nan("");
  TractTable t({at_vacancy("a", "A", S::sampled, 1, 0.1), at_vacancy("b", "A", S::sampled, 2, 0.3), bad});
  CHECK_THROWS_AS(impute_forest_model(t, forest_on({"median_income"}, 1, 5)), Error);
}

TEST_CASE("training without certainty tracts") {
  auto t = small_county();
  auto spec = forest_on({"pct_vacant"}, 3, 20);
  spec.train_on_certainty = false;
  auto p = impute_forest_model(t, spec);
  for (const auto& r : p.rows) CHECK(r.imputed.value() <= 30.0);
}

TEST_CASE("assemble_full_counts") {
  TractTable observed({tract("a", "A", S::sampled, 3), tract("b", "A", S::certainty, 9)});
  auto full = assemble_full_counts(observed, impute_spa_mean(observed));
  CHECK(full.counts == std::vector<double>{3, 9});

  auto t = small_county();
  auto p = impute_spa_mean(t);
  auto mixed = assemble_full_counts(t, p);
  CHECK(mixed.counts.size() == t.size());
  CHECK(mixed.source[3] == CountSource::imputed);
  CHECK(mixed.source[0] == CountSource::observed);

  TractTable none({tract("x", "A", S::unsampled), tract("y", "A", S::unsampled)});
  TractPredictions given{"M", {{"x", std::nullopt, 1.5, 1.5, CountSource::imputed},
                               {"y", std::nullopt, 2.5, 2.5, CountSource::imputed}}};
  CHECK(assemble_full_counts(none, given).counts == std::vector<double>{1.5, 2.5});
  given.rows.pop_back();
  CHECK_THROWS_AS(assemble_full_counts(none, given), Error);
}

TEST_CASE("predictions round-trip") {
  auto t = small_county();
  std::vector<TractPredictions> models{impute_spa_mean(t), impute_matched(t, matched(2))};
  std::stringstream s;
  write_predictions(s, models);
  auto back = read_predictions(s);
  REQUIRE(back.size() == 2);
  CHECK(back[0] == models[0]);
  CHECK(back[1] == models[1]);
  CHECK(align_predictions(t, back[1]) == models[1]);
}

TEST_CASE("model config") {
  std::istringstream in(R"({"seed": 7, "train_on_certainty": false,
    "models": [{"name": "M0", "kind": "spa_mean"},
               {"name": "F", "kind": "forest", "predictors": ["pct_vacant"], "n_trees": 12},
               {"name": "K", "kind": "matched", "predictors": ["latitude", "longitude"], "k": 3}]})");
  auto cfg = read_model_config(in, 0);
  REQUIRE(cfg.models.size() == 3);
  CHECK(cfg.models[1].forest.n_trees == 12);
  CHECK(cfg.models[1].forest.seed == derive_seed(7, 1));
  CHECK_FALSE(cfg.models[1].train_on_certainty);
  CHECK(cfg.models[2].k == 3);

  std::istringstream bad(R"({"models": [{"name": "F", "kind": "forest", "predictors": ["shoe_size"]}]})");
  CHECK_THROWS_AS(read_model_config(bad, 0), Error);
}
