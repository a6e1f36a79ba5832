#include <doctest.h>

#include <cmath>
#include <sstream>

#include "helpers.hpp"
#include "smallarea/aggregation.hpp"
#include "smallarea/error.hpp"
#include "smallarea/estimator.hpp"
#include "smallarea/imputation.hpp"
#include "smallarea/random.hpp"
#include "smallarea/synthcounty.hpp"

using namespace smallarea;
using testing::tract;
using S = TractStatus;

namespace {

TractTable two_strata() {
  return TractTable({tract("a1", "A", S::sampled, 2), tract("a2", "A", S::sampled, 6), tract("a3", "A", S::sampled, 10),
                     tract("a4", "A", S::unsampled), tract("a5", "A", S::unsampled), tract("b1", "B", S::sampled, 1),
                     tract("b2", "B", S::sampled, 3), tract("b3", "B", S::unsampled), tract("b4", "B", S::certainty, 40)});
}

}  // namespace

TEST_CASE("region sums") {
  TractTable t({tract("x", "A", S::sampled, 100), tract("y", "A", S::sampled, 50)});
  std::vector<double> counts{100, 50};
  CHECK(aggregate_region(t, counts, {"r", {{"x", 0.4}}}) == 40.0);
  CHECK(aggregate_region(t, counts, {"r", {{"x", 0.6}, {"y", 1.0}}}) == 110.0);
  CHECK(aggregate_region(t, counts, county_region(t)) == 150.0);
  CHECK_THROWS_AS(aggregate_region(t, counts, {"r", {{"nope", 1.0}}}), Error);
}

TEST_CASE("model0 region se") {
  auto t = two_strata();
  auto strata = estimate_strata(t, {});
  CHECK(model0_region_se(t, {"obs", {{"a1", 1.0}, {"b4", 1.0}}}, strata) == 0.0);

  const auto& A = strata[0];
  const double se_mean = std::sqrt(*A.var_tau) / static_cast<double>(A.frame_size);
  CHECK(model0_region_se(t, {"two", {{"a4", 1.0}, {"a5", 1.0}}}, strata) == doctest::Approx(2 * se_mean));

  const auto& B = strata[1];
  const double wa = 1.0 + 0.5, wb = 0.3;
  const double expected = std::sqrt(wa * wa * *A.var_tau / double(A.frame_size * A.frame_size) +
                                    wb * wb * *B.var_tau / double(B.frame_size * B.frame_size));
  const double got = model0_region_se(t, {"mix", {{"a4", 1.0}, {"a5", 0.5}, {"b3", 0.3}, {"a1", 1.0}}}, strata);
  CHECK(std::abs(got - expected) <= 1e-12 * expected);

  TractTable thin({tract("s", "A", S::sampled, 3), tract("u", "A", S::unsampled)});
  CHECK_THROWS_AS(model0_region_se(thin, {"r", {{"u", 1.0}}}, estimate_strata(thin, {})), Error);
}

TEST_CASE("comparison table") {
  auto t = two_strata();
  auto strata = estimate_strata(t, {});
  auto m0 = impute_spa_mean(t);
  auto one = comparison_table(t, {county_region(t)}, {m0}, strata);
  REQUIRE(one.size() == 1);
  CHECK(one[0].totals.size() == 1);

  auto copy = m0;
  copy.model_name = "Copy";
  auto regions = standard_regions(t, {});
  auto rows = comparison_table(t, regions, {m0, copy}, strata);
  REQUIRE(rows.size() == 3);
  CHECK(rows[0].region_id == "A");
  CHECK(rows[2].region_id == "Total");
  for (const auto& r : rows) CHECK(r.totals[0] == r.totals[1]);

  std::ostringstream out;
  write_regions(out, {"Model 0", "Copy"}, rows);
  CHECK(out.str().rfind("region_id,Model 0,Copy,model0_se\n", 0) == 0);
}

TEST_CASE("all-observed tables agree across models") {
  TractTable t({tract("a", "A", S::sampled, 3), tract("b", "A", S::sampled, 4), tract("c", "B", S::certainty, 5),
                tract("d", "B", S::sampled, 1), tract("e", "B", S::sampled, 8)});
  ModelSpec k;
  k.name = "K";
  k.kind = ModelKind::matched;
  k.k = 2;
  k.predictors = {"latitude"};
  auto rows = comparison_table(t, standard_regions(t, {}), {impute_spa_mean(t), impute_matched(t, k)},
                               estimate_strata(t, {}));
  for (const auto& r : rows) CHECK(r.totals[0] == r.totals[1]);
}

TEST_CASE("partitions add up and aggregation is linear") {
  SynthConfig cfg;
  cfg.n_tracts = 500;
  cfg.total_sample = 90;
  cfg.seed = 21;
  auto county = generate_county(cfg);
  const auto& t = county.tracts;
  auto counts = assemble_full_counts(t, impute_spa_mean(t)).counts;
  const double total = aggregate_region(t, counts, county_region(t));

  Rng rng(2);
  std::vector<RegionDefinition> parts(5);
  for (std::size_t i = 0; i < t.size(); ++i) {
    double left = 1.0;
    for (int k = 0; k < 2; ++k) {
      const double s = left * (0.2 + 0.6 * rng.uniform01());
      parts[rng.uniform_index(5)].members.push_back({t[i].tract_id, s});
      left -= s;
    }
    parts[rng.uniform_index(5)].members.push_back({t[i].tract_id, left});
  }
  double sum = 0.0;
  for (const auto& p : parts) sum += aggregate_region(t, counts, p);
  CHECK(std::abs(sum - total) <= 1e-9 * total);

  std::vector<double> other(counts.size()), both(counts.size());
  for (std::size_t i = 0; i < counts.size(); ++i) {
    other[i] = rng.uniform01() * 10;
    both[i] = counts[i] + other[i];
  }
  for (const auto& p : parts) {
    const double lhs = aggregate_region(t, both, p);
    const double rhs = aggregate_region(t, counts, p) + aggregate_region(t, other, p);
    CHECK(std::abs(lhs - rhs) <= 1e-9 * std::abs(lhs));
  }
}

TEST_CASE("city regions") {
  auto r = city_regions({{"t1", "B", 0.5}, {"t2", "A", 1.0}, {"t1", "A", 0.5}});
  REQUIRE(r.size() == 2);
  CHECK(r[0].region_id == "A");
  CHECK(r[0].members.size() == 2);
}
