// Acceptance checks. One line per criterion; exit status is the number of
// failed criteria.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <map>
#include <numeric>
#include <sstream>
#include <string>
#include <thread>
#include <unordered_map>
#include <vector>

#include "../golden/golden_fixture.hpp"
#include "../oracles/cart_oracle.hpp"
#include "../oracles/srs_oracle.hpp"
#include "smallarea/aggregation.hpp"
#include "smallarea/estimator.hpp"
#include "smallarea/forest.hpp"
#include "smallarea/imputation.hpp"
#include "smallarea/random.hpp"
#include "smallarea/sampling_design.hpp"
#include "smallarea/synthcounty.hpp"
#include "smallarea/validation.hpp"

using namespace smallarea;

namespace {

// Pinned tolerances.
constexpr double kEnumRelTol = 1e-9;
constexpr double kBiasRelTol = 0.01;
constexpr double kSeRelTol = 0.05;
constexpr double kRatioLo = 0.5;
constexpr double kRatioHi = 0.95;
constexpr double kSmoothingPct = 50.0;
constexpr double kAdditivityRelTol = 1e-9;

struct Outcome {
  bool pass = true;
  std::string detail;
};

int failures = 0;

void report(const char* id, const char* title, const std::function<Outcome()>& check) {
  const auto t0 = std::chrono::steady_clock::now();
  Outcome o;
  try {
    o = check();
  } catch (const std::exception& e) {
    o = {false, std::string("exception: ") + e.what()};
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("[%s] %s %s: %s (%.2fs)\n", o.pass ? "PASS" : "FAIL", id, title, o.detail.c_str(), secs);
  std::fflush(stdout);
  failures += !o.pass;
}

void info(const char* id, const std::string& text) {
  std::printf("[INFO] %s %s\n", id, text.c_str());
}

std::string fmt(const char* f, double a) {
  char b[128];
  std::snprintf(b, sizeof b, f, a);
  return b;
}

template <class... T>
std::string fmtn(const char* f, T... args) {
  char b[512];
  std::snprintf(b, sizeof b, f, args...);
  return b;
}

std::vector<std::size_t> iota(std::size_t n) {
  std::vector<std::size_t> v(n);
  std::iota(v.begin(), v.end(), 0);
  return v;
}

// ---- 1 -------------------------------------------------------------------

Outcome worked_example() {
  std::vector<std::int64_t> counts(20, 3);
  counts.insert(counts.end(), 5, 28);
  const double tau = expansion_total(counts, 100);
  const double se = std::sqrt(total_variance(100.0, 100, 25));
  const auto s = stratum_report("S", counts, 100, 300, 100);
  const std::string text = format_margin(s.total, *s.se());
  Outcome o;
  o.pass = tau == 800.0 && std::llround(se) == 174 && text == "1200 ± 348";
  o.detail = fmtn("tau=%.0f se=%.2f report=\"%s\"", tau, se, text.c_str());
  return o;
}

// ---- 2 -------------------------------------------------------------------

Outcome enumeration() {
  const std::vector<std::int64_t> pop{0, 3, 1, 12, 5, 7};
  const auto m = oracle::enumerate_expansion(pop, 2);
  double truth = 0.0;
  for (auto v : pop) truth += static_cast<double>(v);
  const double exact = total_variance(count_variance(pop), 6, 2);
  const double rel = std::abs(m.variance - exact) / exact;
  Outcome o;
  o.pass = m.samples == 15 && m.mean == truth && rel <= kEnumRelTol;
  o.detail = fmtn("samples=%zu mean=%.6f truth=%.0f var=%.6f eq=%.6f rel=%.1e", m.samples, m.mean, truth, m.variance,
                  exact, rel);
  return o;
}

// ---- 3 -------------------------------------------------------------------

Outcome monte_carlo() {
  SynthConfig cfg;
  cfg.seed = 15;
  const auto county = generate_county(cfg);
  const auto& t = county.tracts;

  std::unordered_map<std::string, std::int64_t> truth_of;
  double truth = 0.0;
  std::map<std::string, std::int64_t> fixed;  // certainty + shelter per stratum
  for (std::size_t i = 0; i < t.size(); ++i) {
    truth_of[t[i].tract_id] = county.true_counts[i];
    if (t[i].status == TractStatus::out_of_frame) continue;
    truth += static_cast<double>(county.true_counts[i]);
    if (t[i].status == TractStatus::certainty) fixed[t[i].stratum_id] += county.true_counts[i];
  }
  std::map<std::string, std::int64_t> shelter;
  for (const auto& s : county.shelters) {
    shelter[s.stratum_id] = s.count;
    truth += static_cast<double>(s.count);
  }

  auto plan = make_plan(t, cfg.total_sample, 0);
  const int R = 10000;
  std::vector<double> totals(R), ses(R);
  const unsigned workers = std::max(1u, std::min(8u, std::thread::hardware_concurrency()));
  std::vector<std::thread> pool;
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      auto p = plan;
      for (int r = static_cast<int>(w); r < R; r += static_cast<int>(workers)) {
        p.seed = derive_seed(2024, static_cast<std::uint64_t>(r));
        const auto draw = draw_stratified(p);
        std::vector<StratumEstimate> strata;
        for (const auto& s : p.strata) {
          std::vector<std::int64_t> c;
          for (const auto& id : draw.at(s.stratum_id)) c.push_back(truth_of.at(id));
          strata.push_back(stratum_report(s.stratum_id, c, s.frame_size(), fixed[s.stratum_id], shelter[s.stratum_id]));
        }
        const auto est = county_report(std::move(strata));
        totals[r] = est.total;
        ses[r] = est.se.value_or(NAN);
      }
    });
  }
  for (auto& th : pool) th.join();

  double mean = 0.0, mean_se = 0.0;
  for (int r = 0; r < R; ++r) {
    mean += totals[r] / R;
    mean_se += ses[r] / R;
  }
  double var = 0.0;
  for (double v : totals) var += (v - mean) * (v - mean) / (R - 1);
  const double sd = std::sqrt(var);
  const double bias = std::abs(mean - truth) / truth;
  const double se_gap = std::abs(sd - mean_se) / mean_se;
  Outcome o;
  o.pass = bias < kBiasRelTol && se_gap <= kSeRelTol;
  o.detail = fmtn("R=%d truth=%.0f mean=%.1f bias=%.3f%% sd=%.1f mean_se=%.1f gap=%.2f%%", R, truth, mean, 100 * bias,
                  sd, mean_se, 100 * se_gap);
  return o;
}

// ---- 4 -------------------------------------------------------------------

bool same_tree(const RegressionTree& t, std::size_t i, const oracle::CartNode& o) {
  const auto& nd = t.nodes()[i];
  if (nd.mean != o.mean || nd.count != o.count || nd.is_leaf() != (o.feature < 0)) return false;
  if (nd.is_leaf()) return true;
  return nd.feature == o.feature && nd.threshold == o.threshold && same_tree(t, nd.left, *o.left) &&
         same_tree(t, nd.right, *o.right);
}

Outcome cart_oracle() {
  Rng gen(4);
  int matched = 0, leaves = 0;
  const int datasets = 200;
  for (int d = 0; d < datasets; ++d) {
    const std::size_t n = 1 + gen.uniform_index(30);
    const std::size_t p = 1 + gen.uniform_index(4);
    std::vector<double> xv(n * p), y(n);
    const bool ties = d % 2 == 0;
    for (auto& v : xv) v = ties ? static_cast<double>(gen.uniform_index(6)) : gen.normal();
    for (auto& v : y) v = d % 3 == 0 ? static_cast<double>(gen.uniform_index(10)) : gen.gamma(0.7, 20.0);
    FeatureMatrix x(n, p, xv);
    Rng rng(static_cast<std::uint64_t>(d));
    const auto tree = grow_tree(x, y, iota(n), p, 1, rng);
    const auto ref = oracle::cart(xv, p, y, iota(n));
    if (same_tree(tree, 0, *ref)) ++matched;
    for (const auto& nd : tree.nodes()) leaves += nd.is_leaf();
  }
  Outcome o;
  o.pass = matched == datasets;
  o.detail = fmtn("%d/%d trees identical (%d leaves total)", matched, datasets, leaves);
  return o;
}

// ---- 5 -------------------------------------------------------------------

Outcome forest_contracts() {
  Rng gen(5);
  const std::size_t n = 120, p = 4;
  std::vector<double> xv(n * p), y(n);
  for (auto& v : xv) v = gen.uniform01();
  for (std::size_t i = 0; i < n; ++i) y[i] = 30.0 * (xv[i * p] > 0.6) + 10.0 * xv[i * p + 1] + gen.gamma(1.0, 3.0);
  FeatureMatrix x(n, p, xv);
  const auto [lo, hi] = std::minmax_element(y.begin(), y.end());

  ForestParams params;
  params.n_trees = 300;
  params.seed = 55;
  const auto f1 = fit_forest(x, y, params, 1);
  const auto f2 = fit_forest(x, y, params, 2);
  const auto f8 = fit_forest(x, y, params, 8);

  std::vector<std::vector<double>> queries;
  for (int q = 0; q < 200; ++q) {
    std::vector<double> pt(p);
    for (auto& v : pt) v = gen.uniform01() * 1.4 - 0.2;
    queries.push_back(pt);
  }
  bool in_range = true, identical = f1 == f2 && f1 == f8;
  const auto o1 = oob_fitted(f1, x);
  const auto o8 = oob_fitted(f8, x);
  for (std::size_t i = 0; i < n; ++i) {
    in_range &= o1.fitted[i] >= *lo && o1.fitted[i] <= *hi;
    identical &= o1.fitted[i] == o8.fitted[i];
  }
  for (const auto& q : queries) {
    const double a = f1.predict(q);
    in_range &= a >= *lo && a <= *hi;
    identical &= a == f2.predict(q) && a == f8.predict(q);
  }

  params.n_trees = 1;
  const auto single = fit_forest(x, y, params);
  bool one_tree = true;
  for (const auto& q : queries) one_tree &= single.predict(q) == single.trees()[0].predict(q);

  Outcome o;
  o.pass = in_range && identical && one_tree;
  o.detail = fmtn("range=%s threads(1,2,8)=%s single-tree=%s", in_range ? "ok" : "VIOLATED",
                  identical ? "bitwise-identical" : "DIFFER", one_tree ? "equal" : "DIFFER");
  return o;
}

// ---- 6 and 7 ---------------------------------------------------------------

struct Study {
  std::size_t matrix_rows = 0;
  std::vector<std::string> models;
  std::vector<ScoreRow> rows;
  SynthCounty county;
  std::vector<TractPredictions> predictions;
};

const Study& study() {
  static const Study s = [] {
    Study st;
    SynthConfig cfg;
    cfg.seed = 15;
    st.county = generate_county(cfg);
    const unsigned threads = std::max(1u, std::thread::hardware_concurrency());
    for (auto spec : default_model_specs(7)) {
      spec.forest.n_trees = 500;
      spec.train_on_certainty = false;
      st.models.push_back(spec.name);
      st.predictions.push_back(impute(st.county.tracts, spec, threads));
    }
    ValidationExclusions ex;
    ex.strata.insert("SPA4");
    const auto matrix = build_matrix(st.county.tracts, st.predictions, ex);
    st.matrix_rows = matrix.rows();
    Table5Options t5;
    t5.seed = 11;
    t5.draws = 500;
    st.rows = table5_report(matrix, matrix_locations(matrix, st.county.tracts), t5);
    return st;
  }();
  return s;
}

const ScoreRow& cell(const Study& s, std::size_t size, Selection sel, const std::string& model) {
  for (const auto& r : s.rows) {
    if (r.size == size && r.selection == sel && r.model == model) return r;
  }
  throw std::runtime_error("missing table5 cell");
}

std::vector<std::size_t> sizes_of(const Study& s) {
  std::vector<std::size_t> v;
  for (const auto& r : s.rows) {
    if (std::find(v.begin(), v.end(), r.size) == v.end()) v.push_back(r.size);
  }
  return v;
}

Outcome trends() {
  const auto& s = study();
  const auto sizes = sizes_of(s);
  bool monotone = true, ratios_ok = true, beats = true;
  double rmin = 1e9, rmax = 0.0;
  std::string geo_beat;
  for (auto sel : {Selection::random, Selection::geographic}) {
    for (const auto& m : s.models) {
      double ratio_sum = 0.0;
      for (std::size_t i = 1; i < sizes.size(); ++i) {
        const double a = cell(s, sizes[i - 1], sel, m).mape;
        const double b = cell(s, sizes[i], sel, m).mape;
        monotone &= b <= a;
        ratio_sum += b / a;
      }
      const double mean_ratio = ratio_sum / static_cast<double>(sizes.size() - 1);
      rmin = std::min(rmin, mean_ratio);
      rmax = std::max(rmax, mean_ratio);
      ratios_ok &= mean_ratio >= kRatioLo && mean_ratio <= kRatioHi;
    }
  }
  for (const auto& m : s.models) {
    if (m == "Model 0") continue;
    for (auto size : sizes) {
      if (size < 16) continue;
      const double fr = cell(s, size, Selection::random, m).mape;
      const double f0 = cell(s, size, Selection::random, "Model 0").mape;
      beats &= fr <= f0;
      const double gr = cell(s, size, Selection::geographic, m).mape;
      const double g0 = cell(s, size, Selection::geographic, "Model 0").mape;
      geo_beat += fmtn(" %s@%zu %.1f/%.1f", m.c_str(), size, gr, g0);
    }
  }
  info("6", "geographic forest/Model 0 MAPE at sizes >= 16:" + geo_beat);
  for (const auto& m : s.models) {
    std::string line = m + " random MAPE:";
    for (auto size : sizes) line += fmt(" %.1f", cell(s, size, Selection::random, m).mape);
    line += " | geographic:";
    for (auto size : sizes) line += fmt(" %.1f", cell(s, size, Selection::geographic, m).mape);
    info("6", line);
  }
  Outcome o;
  o.pass = s.matrix_rows == 259 && monotone && ratios_ok && beats;
  o.detail = fmtn("rows=%zu monotone=%s mean doubling ratio in [%.2f, %.2f] forests<=Model0 (random, s>=16)=%s",
                  s.matrix_rows, monotone ? "yes" : "NO", rmin, rmax, beats ? "yes" : "NO");
  return o;
}

Outcome smoothing() {
  const auto& s = study();
  const auto sizes = sizes_of(s);
  bool ok = true;
  std::string detail;
  for (auto sel : {Selection::random, Selection::geographic}) {
    std::string geo;
    for (const auto& m : s.models) {
      double so = 0, ns = 0, lu = 0, nl = 0;
      for (auto size : sizes) {
        const auto& r = cell(s, size, sel, m);
        so += r.small_overshoot * static_cast<double>(r.small_draws);
        ns += static_cast<double>(r.small_draws);
        lu += r.large_undershoot * static_cast<double>(r.large_draws);
        nl += static_cast<double>(r.large_draws);
      }
      const auto text = fmtn(" %s %.1f/%.1f", m.c_str(), so / ns, lu / nl);
      if (sel == Selection::random) {
        ok &= so / ns > kSmoothingPct && lu / nl > kSmoothingPct;
        detail += text;
      } else {
        geo += text;
      }
    }
    if (sel == Selection::geographic) info("7", "geographic small-overshoot/large-undershoot %:" + geo);
  }
  return {ok, "random small-overshoot/large-undershoot %:" + detail};
}

// ---- 8 -------------------------------------------------------------------

Outcome additivity() {
  const auto& s = study();
  const auto& t = s.county.tracts;
  double worst = 0.0;
  Rng rng(8);
  for (const auto& model : s.predictions) {
    const auto counts = assemble_full_counts(t, model).counts;
    const double county = aggregate_region(t, counts, county_region(t));

    double by_stratum = 0.0;
    for (const auto& id : t.strata()) by_stratum += aggregate_region(t, counts, stratum_region(t, id));
    worst = std::max(worst, std::abs(by_stratum - county) / county);

    std::vector<RegionDefinition> parts(7);
    for (std::size_t i = 0; i < t.size(); ++i) {
      const double a = 0.1 + 0.8 * rng.uniform01();
      parts[rng.uniform_index(7)].members.push_back({t[i].tract_id, a});
      parts[rng.uniform_index(7)].members.push_back({t[i].tract_id, 1.0 - a});
    }
    double split = 0.0;
    for (const auto& p : parts) split += aggregate_region(t, counts, p);
    worst = std::max(worst, std::abs(split - county) / county);
  }
  return {worst <= kAdditivityRelTol, fmt("worst relative gap %.2e over strata and random share partitions", worst)};
}

// ---- 9 -------------------------------------------------------------------

Outcome golden_schemas() {
  const auto& g = golden::outputs();
  int matched = 0;
  std::string bad;
  for (const auto& [name, text] : std::vector<std::pair<std::string, const std::string*>>{
           {"table1.csv", &g.table1}, {"regions.csv", &g.regions}, {"table5.csv", &g.table5}}) {
    std::ifstream in(std::filesystem::path(GOLDEN_DIR) / name, std::ios::binary);
    std::stringstream ss;
    ss << in.rdbuf();
    if (in.good() || in.eof()) {
      if (ss.str() == *text) {
        ++matched;
        continue;
      }
    }
    bad += " " + name;
  }
  return {matched == 3, fmtn("%d/3 golden tables bit-exact%s", matched, bad.empty() ? "" : (" (differs:" + bad + ")").c_str())};
}

}  // namespace

int main() {
  report("1", "worked example", worked_example);
  report("2", "exhaustive design oracle", enumeration);
  report("3", "Monte Carlo unbiasedness", monte_carlo);
  report("4", "CART oracle equivalence", cart_oracle);
  report("5", "forest contracts", forest_contracts);
  report("6", "aggregation-study trends", trends);
  report("7", "smoothing bias", smoothing);
  report("8", "aggregation additivity", additivity);
  report("9", "table schemas vs golden fixtures", golden_schemas);
  std::printf("%d criteria failed\n", failures);
  return failures;
}
