#include "smallarea/validation.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <ostream>

#include "smallarea/csv.hpp"
#include "smallarea/error.hpp"
#include "smallarea/random.hpp"

namespace smallarea {

ValidationMatrix build_matrix(const TractTable& tracts, const std::vector<TractPredictions>& models,
                              const ValidationExclusions& exclusions) {
  ValidationMatrix m;
  std::vector<std::map<std::string_view, const TractPrediction*>> lookup(models.size());
  for (std::size_t k = 0; k < models.size(); ++k) {
    m.model_names.push_back(models[k].model_name);
    for (const auto& row : models[k].rows) lookup[k][row.tract_id] = &row;
  }
  m.predictions.resize(models.size());
  for (const auto& t : tracts) {
    if (t.status != TractStatus::sampled || exclusions.strata.count(t.stratum_id)) continue;
    const auto count = t.observed_count();
    if (!count) continue;
    m.tract_ids.push_back(t.tract_id);
    m.truth.push_back(static_cast<double>(*count));
    for (std::size_t k = 0; k < models.size(); ++k) {
      auto it = lookup[k].find(t.tract_id);
      if (it == lookup[k].end() || !it->second->imputed) {
        fail(ErrorKind::missing_prediction,
             models[k].model_name + ": no prediction for sampled tract '" + t.tract_id + "'");
      }
      m.predictions[k].push_back(*it->second->imputed);
    }
  }
  return m;
}

std::vector<GeoPoint> matrix_locations(const ValidationMatrix& matrix, const TractTable& tracts) {
  std::vector<GeoPoint> out;
  out.reserve(matrix.rows());
  for (const auto& id : matrix.tract_ids) {
    auto i = tracts.index_of(id);
    if (!i) fail(ErrorKind::invalid_argument, "matrix tract '" + id + "' not in table");
    out.push_back({tracts[*i].latitude, tracts[*i].longitude});
  }
  return out;
}

namespace {

AggregationDraw make_draw(const ValidationMatrix& matrix, std::vector<std::size_t> rows) {
  std::sort(rows.begin(), rows.end());
  AggregationDraw d;
  d.predicted_totals.assign(matrix.model_names.size(), 0.0);
  for (auto r : rows) {
    d.truth_total += matrix.truth[r];
    for (std::size_t k = 0; k < matrix.model_names.size(); ++k) d.predicted_totals[k] += matrix.predictions[k][r];
  }
  d.rows = std::move(rows);
  return d;
}

}  // namespace

std::vector<AggregationDraw> draw_random_aggregates(const ValidationMatrix& matrix, std::size_t size,
                                                    std::size_t draws, std::uint64_t seed) {
  if (size > matrix.rows()) {
    fail(ErrorKind::infeasible, "aggregate size " + std::to_string(size) + " exceeds the " +
                                    std::to_string(matrix.rows()) + " matrix rows");
  }
  Rng rng(seed);
  std::vector<AggregationDraw> out;
  out.reserve(draws);
  for (std::size_t r = 0; r < draws; ++r) {
    out.push_back(make_draw(matrix, sample_without_replacement(rng, matrix.rows(), size)));
  }
  return out;
}

std::vector<std::size_t> geographic_pool(const ValidationMatrix& matrix, const std::vector<GeoPoint>& locations,
                                         std::size_t seed_row, std::size_t size, const GeographicOptions& options) {
  const std::size_t n = matrix.rows();
  if (locations.size() != n) fail(ErrorKind::invalid_argument, "geographic_pool: locations do not match matrix rows");
  if (seed_row >= n) fail(ErrorKind::invalid_argument, "geographic_pool: seed row out of range");
  const std::size_t pool_size = size + options.pool_margin;
  const std::size_t available = options.include_seed ? n : n - 1;
  if (pool_size > available) {
    fail(ErrorKind::infeasible, "geographic pool of " + std::to_string(pool_size) + " needs more than the " +
                                    std::to_string(available) + " available tracts");
  }
  double mean_lat = 0.0;
  for (const auto& p : locations) mean_lat += p.latitude;
  mean_lat /= static_cast<double>(n);
  const double lon_scale = std::cos(mean_lat * M_PI / 180.0);

  const auto& origin = locations[seed_row];
  std::vector<std::pair<double, std::size_t>> ranked;
  ranked.reserve(n);
  for (std::size_t r = 0; r < n; ++r) {
    if (r == seed_row && !options.include_seed) continue;
    const double dlat = locations[r].latitude - origin.latitude;
    const double dlon = (locations[r].longitude - origin.longitude) * lon_scale;
    ranked.emplace_back(dlat * dlat + dlon * dlon, r);
  }
  std::sort(ranked.begin(), ranked.end(), [&](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first < b.first;
    return matrix.tract_ids[a.second] < matrix.tract_ids[b.second];
  });
  std::vector<std::size_t> pool;
  pool.reserve(pool_size);
  for (std::size_t i = 0; i < pool_size; ++i) pool.push_back(ranked[i].second);
  return pool;
}

std::vector<AggregationDraw> draw_geographic_aggregates(const ValidationMatrix& matrix,
                                                        const std::vector<GeoPoint>& locations, std::size_t size,
                                                        std::size_t draws, std::uint64_t seed,
                                                        const GeographicOptions& options) {
  if (matrix.rows() == 0) fail(ErrorKind::infeasible, "geographic draws need a non-empty matrix");
  Rng rng(seed);
  std::vector<AggregationDraw> out;
  out.reserve(draws);
  for (std::size_t r = 0; r < draws; ++r) {
    const auto seed_row = static_cast<std::size_t>(rng.uniform_index(matrix.rows()));
    const auto pool = geographic_pool(matrix, locations, seed_row, size, options);
    std::vector<std::size_t> rows;
    for (auto i : sample_without_replacement(rng, pool.size(), size)) rows.push_back(pool[i]);
    out.push_back(make_draw(matrix, std::move(rows)));
  }
  return out;
}

std::string_view to_string(Selection selection) {
  return selection == Selection::random ? "random" : "geographic";
}

namespace {

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

double percent(std::size_t part, std::size_t whole) {
  return whole == 0 ? 0.0 : 100.0 * static_cast<double>(part) / static_cast<double>(whole);
}

}  // namespace

ScoreRow score_draws(const std::vector<AggregationDraw>& draws, std::size_t model, UsOlDenominator denominator) {
  if (draws.size() < 2) fail(ErrorKind::invalid_argument, "score_draws: need at least 2 draws");
  std::vector<double> truths;
  truths.reserve(draws.size());
  for (const auto& d : draws) {
    if (model >= d.predicted_totals.size()) fail(ErrorKind::invalid_argument, "score_draws: model index out of range");
    truths.push_back(d.truth_total);
  }
  const double median = median_of(truths);

  ScoreRow s;
  s.size = draws.front().rows.size();
  std::vector<double> ape;
  std::size_t small_under = 0, small_over = 0, large_over = 0, large_under = 0;
  for (const auto& d : draws) {
    const double truth = d.truth_total;
    const double pred = d.predicted_totals[model];
    if (truth == 0.0) {
      ++s.zero_truth_excluded;
    } else {
      ape.push_back(100.0 * std::abs(pred - truth) / truth);
    }
    if (truth < median) {
      ++s.small_draws;
      small_under += pred < truth;
      small_over += pred > truth;
    } else if (truth > median) {
      ++s.large_draws;
      large_over += pred > truth;
      large_under += pred < truth;
    }
  }
  if (ape.empty()) fail(ErrorKind::invalid_argument, "score_draws: every draw has zero truth");
  s.mape = median_of(std::move(ape));
  const std::size_t small_den = denominator == UsOlDenominator::subgroup ? s.small_draws : draws.size();
  const std::size_t large_den = denominator == UsOlDenominator::subgroup ? s.large_draws : draws.size();
  s.us = percent(small_under, small_den);
  s.ol = percent(large_over, large_den);
  s.small_overshoot = percent(small_over, s.small_draws);
  s.large_undershoot = percent(large_under, s.large_draws);
  return s;
}

std::vector<ScoreRow> table5_report(const ValidationMatrix& matrix, const std::vector<GeoPoint>& locations,
                                    const Table5Options& options) {
  std::vector<ScoreRow> out;
  for (std::size_t si = 0; si < options.sizes.size(); ++si) {
    const std::size_t size = options.sizes[si];
    for (auto selection : {Selection::random, Selection::geographic}) {
      const auto cell_seed = derive_seed(options.seed, 2 * si + (selection == Selection::geographic ? 1 : 0));
      const auto draws = selection == Selection::random
                             ? draw_random_aggregates(matrix, size, options.draws, cell_seed)
                             : draw_geographic_aggregates(matrix, locations, size, options.draws, cell_seed,
                                                          options.geographic);
      for (std::size_t k = 0; k < matrix.model_names.size(); ++k) {
        auto row = score_draws(draws, k, options.denominator);
        row.size = size;
        row.selection = selection;
        row.model = matrix.model_names[k];
        out.push_back(std::move(row));
      }
    }
  }
  return out;
}

void write_table5(std::ostream& out, const std::vector<ScoreRow>& rows) {
  out << csv::join_record(kTable5Columns) << '\n';
  for (const auto& r : rows) {
    out << csv::join_record({std::to_string(r.size), std::string(to_string(r.selection)), r.model,
                             std::to_string(std::llround(r.mape)), std::to_string(std::llround(r.us)),
                             std::to_string(std::llround(r.ol)), std::to_string(r.zero_truth_excluded)})
        << '\n';
  }
}

}  // namespace smallarea
