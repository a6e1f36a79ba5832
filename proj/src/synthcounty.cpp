#include "smallarea/synthcounty.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <istream>
#include <map>
#include <ostream>

#include <json.hpp>

#include "smallarea/csv.hpp"
#include "smallarea/error.hpp"
#include "smallarea/random.hpp"
#include "smallarea/sampling_design.hpp"

namespace smallarea {

namespace {

struct StratumProfile {
  double latitude;
  double longitude;
  double income;
  double vacancy;
  double industrial;
  double minority;
};

// Eight-stratum county loosely shaped like a large metropolitan county:
// a poor, vacant, industrial core and wealthier periphery.
const StratumProfile kBuiltinProfiles[8] = {
    {34.60, -118.15, 55000, 0.07, 0.05, 0.50}, {34.22, -118.45, 60000, 0.05, 0.08, 0.50},
    {34.10, -118.00, 58000, 0.05, 0.07, 0.60}, {34.06, -118.27, 36000, 0.11, 0.12, 0.70},
    {34.02, -118.45, 80000, 0.06, 0.03, 0.30}, {33.95, -118.27, 33000, 0.09, 0.10, 0.90},
    {33.95, -118.08, 50000, 0.05, 0.12, 0.80}, {33.82, -118.25, 52000, 0.07, 0.10, 0.60}};

// Relative stratum sizes.
const std::int64_t kBuiltinWeights[8] = {11, 60, 51, 38, 21, 29, 39, 48};

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }
double logit(double p) { return std::log(p / (1.0 - p)); }

std::string stratum_name(std::size_t h) { return "SPA" + std::to_string(h + 1); }

std::string tract_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "06037-%05zu", i + 1);
  return buf;
}

std::string city_name(std::size_t c) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "City%02zu", c + 1);
  return buf;
}

std::vector<StratumProfile> profiles_for(const SynthConfig& config, Rng& rng) {
  std::vector<StratumProfile> out;
  if (config.n_strata == 8) return {std::begin(kBuiltinProfiles), std::end(kBuiltinProfiles)};
  for (std::size_t h = 0; h < config.n_strata; ++h) {
    const double angle = 2.0 * M_PI * static_cast<double>(h) / static_cast<double>(config.n_strata);
    out.push_back({34.05 + 0.3 * std::sin(angle), -118.25 + 0.35 * std::cos(angle),
                   30000.0 + 50000.0 * rng.uniform01(), 0.04 + 0.08 * rng.uniform01(),
                   0.03 + 0.10 * rng.uniform01(), 0.3 + 0.6 * rng.uniform01()});
  }
  return out;
}

}  // namespace

void SynthConfig::validate() const {
  const auto bad = [](const std::string& what) { fail(ErrorKind::invalid_argument, "synth config: " + what); };
  if (n_strata == 0) bad("n_strata must be positive");
  if (n_tracts < n_strata) bad("n_tracts must be at least n_strata");
  if (!stratum_weights.empty()) {
    if (stratum_weights.size() != n_strata) bad("stratum_weights must have n_strata entries");
    for (auto w : stratum_weights) {
      if (w <= 0) bad("stratum_weights must be positive");
    }
  }
  if (!(certainty_fraction >= 0.0 && certainty_fraction <= 1.0)) bad("certainty_fraction outside [0,1]");
  if (!(certainty_noise >= 0.0)) bad("certainty_noise must be non-negative");
  if (!(vacancy_threshold >= 0.0 && vacancy_threshold <= 1.0)) bad("vacancy_threshold outside [0,1]");
  for (double rate : {base_rate, industrial_slope, vacancy_amplitude, income_amplitude, income_threshold}) {
    if (!(rate >= 0.0) || !std::isfinite(rate)) bad("rates and amplitudes must be finite and non-negative");
  }
  if (!(overdispersion >= 0.0)) bad("overdispersion must be non-negative");
  if (!(cluster_spread_deg > 0.0)) bad("cluster_spread_deg must be positive");
  if (!(spatial_gradient >= 0.0 && spatial_gradient < 1.0)) bad("spatial_gradient outside [0,1)");
  if (!(city_radius_deg > 0.0)) bad("city_radius_deg must be positive");
  if (n_cities > n_tracts) bad("more cities than tracts");
  if (n_out_of_frame_cities > n_cities) bad("n_out_of_frame_cities exceeds n_cities");
  if (total_sample < 0) bad("total_sample must be non-negative");
  if (!(shelter_fraction >= 0.0)) bad("shelter_fraction must be non-negative");
}

double expected_count(const Covariates& c, const SynthConfig& config) {
  double mu = config.base_rate + config.industrial_slope * c.pct_industrial;
  if (c.pct_vacant > config.vacancy_threshold) mu += config.vacancy_amplitude;
  if (c.median_income < config.income_threshold) mu += config.income_amplitude;
  return mu;
}

SynthCounty generate_county(const SynthConfig& config) {
  config.validate();
  Rng profile_rng(derive_seed(config.seed, 0));
  const auto profiles = profiles_for(config, profile_rng);

  std::map<std::string, std::int64_t> weights;
  for (std::size_t h = 0; h < config.n_strata; ++h) {
    std::int64_t w = 1;
    if (!config.stratum_weights.empty()) {
      w = config.stratum_weights[h];
    } else if (config.n_strata == 8) {
      w = kBuiltinWeights[h];
    }
    weights[stratum_name(h)] = w * static_cast<std::int64_t>(config.n_tracts);
  }
  const auto sizes = allocate_proportional(weights, static_cast<std::int64_t>(config.n_tracts));

  // Tracts and covariates, stratum by stratum.
  std::vector<Tract> tracts;
  tracts.reserve(config.n_tracts);
  for (std::size_t h = 0; h < config.n_strata; ++h) {
    const auto& p = profiles[h];
    Rng rng(derive_seed(config.seed, 100 + h));
    const std::int64_t count = sizes.at(stratum_name(h));
    for (std::int64_t i = 0; i < count; ++i) {
      Tract t;
      t.tract_id = tract_name(tracts.size());
      t.stratum_id = stratum_name(h);
      const double u = rng.normal();
      const double v = rng.normal();
      t.latitude = p.latitude + config.cluster_spread_deg * u;
      t.longitude = p.longitude + config.cluster_spread_deg * v;
      t.area_km2 = std::exp(std::log(2.0) + 0.5 * rng.normal());
      // Radial distance is Rayleigh; standardise it so cores run poorer.
      const double core = (1.2533 - std::hypot(u, v)) / 0.6551;
      const double g = config.spatial_gradient;
      const double z_income = -g * core + std::sqrt(1.0 - g * g) * rng.normal();
      auto& c = t.covariates;
      c.median_income = std::exp(std::log(p.income) + 0.35 * z_income);
      c.pct_vacant = logistic(logit(p.vacancy) - 0.4 * z_income + 0.5 * rng.normal());
      c.pct_industrial = logistic(logit(p.industrial) + 0.9 * rng.normal());
      const double commercial = 0.05 + 0.25 * rng.uniform01();
      c.pct_residential = std::clamp(1.0 - c.pct_industrial - commercial, 0.0, 1.0);
      c.pct_owner_occupied = logistic(0.2 + 0.9 * z_income + 0.5 * rng.normal());
      c.pct_minority = logistic(logit(p.minority) - 0.3 * z_income + 0.8 * rng.normal());
      tracts.push_back(std::move(t));
    }
  }
  const std::size_t n = tracts.size();

  // True counts.
  std::vector<std::int64_t> truth(n);
  {
    Rng rng(derive_seed(config.seed, 300));
    for (std::size_t i = 0; i < n; ++i) {
      const double mu = expected_count(tracts[i].covariates, config);
      truth[i] = config.overdispersion == 0.0 ? std::llround(mu)
                                               : rng.negative_binomial(mu, 1.0 / config.overdispersion);
    }
  }

  // Cities: full membership inside 60% of the radius, a linearly fading
  // share out to the radius, renormalised where cities overlap.
  std::vector<CityShare> shares;
  std::vector<std::string> primary_city(n);
  {
    Rng rng(derive_seed(config.seed, 200));
    auto centres = sample_without_replacement(rng, n, config.n_cities);
    std::vector<std::string> home = config.out_of_frame_strata;
    if (home.empty() && config.n_strata == 8) home = {"SPA2", "SPA3", "SPA8"};
    for (std::size_t c = 0; c < config.n_out_of_frame_cities && !home.empty(); ++c) {
      const auto& stratum = home[c % home.size()];
      std::vector<std::size_t> members;
      for (std::size_t i = 0; i < n; ++i) {
        if (tracts[i].stratum_id == stratum) members.push_back(i);
      }
      if (members.empty()) fail(ErrorKind::invalid_argument, "synth config: unknown stratum '" + stratum + "'");
      centres[c] = members[rng.uniform_index(members.size())];
    }
    const double r = config.city_radius_deg;
    const double core = 0.6 * r;
    for (std::size_t i = 0; i < n; ++i) {
      std::vector<std::pair<std::size_t, double>> member;
      double sum = 0.0;
      for (std::size_t c = 0; c < centres.size(); ++c) {
        const auto& o = tracts[centres[c]];
        const double d = std::hypot(tracts[i].latitude - o.latitude,
                                    (tracts[i].longitude - o.longitude) * std::cos(o.latitude * M_PI / 180.0));
        if (d >= r) continue;
        const double s = d <= core ? 1.0 : (r - d) / (r - core);
        if (s <= 0.0) continue;
        member.emplace_back(c, s);
        sum += s;
      }
      double best = 0.0;
      for (auto& [c, s] : member) {
        if (sum > 1.0) s /= sum;
        shares.push_back({tracts[i].tract_id, city_name(c), s});
        if (s > best) {
          best = s;
          if (s >= 0.5) primary_city[i] = city_name(c);
        }
      }
    }
  }
  std::sort(shares.begin(), shares.end(), [](const CityShare& a, const CityShare& b) {
    return a.city_id != b.city_id ? a.city_id < b.city_id : a.tract_id < b.tract_id;
  });

  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t c = 0; c < config.n_out_of_frame_cities; ++c) {
      if (primary_city[i] == city_name(c)) tracts[i].status = TractStatus::out_of_frame;
    }
  }

  // Certainty selection among in-frame tracts of each stratum.
  {
    Rng rng(derive_seed(config.seed, 400));
    std::map<std::string, std::vector<std::pair<double, std::size_t>>> ranked;
    for (std::size_t i = 0; i < n; ++i) {
      double key = static_cast<double>(truth[i]);
      if (config.certainty_mode == CertaintyMode::noisy) {
        key = (key + 1.0) * std::exp(config.certainty_noise * rng.normal());
      }
      if (tracts[i].status != TractStatus::out_of_frame) ranked[tracts[i].stratum_id].emplace_back(key, i);
    }
    for (auto& [id, list] : ranked) {
      std::sort(list.begin(), list.end(), [&](const auto& a, const auto& b) {
        if (a.first != b.first) return a.first > b.first;
        return tracts[a.second].tract_id < tracts[b.second].tract_id;
      });
      const auto k = static_cast<std::size_t>(std::llround(config.certainty_fraction * static_cast<double>(list.size())));
      for (std::size_t j = 0; j < k && j < list.size(); ++j) {
        auto& t = tracts[list[j].second];
        t.status = TractStatus::certainty;
        t.count = {truth[list[j].second], Resolution::observed};
      }
    }
  }

  // Stratified sample of the remaining frame.
  {
    TractTable frame(tracts);
    const auto plan = make_plan(frame, config.total_sample, derive_seed(config.seed, 500));
    const auto selection = draw_stratified(plan);
    bool ambiguous_planted = config.ambiguous_stratum.empty();
    for (const auto& [stratum, ids] : selection) {
      for (const auto& id : ids) {
        const auto i = *frame.index_of(id);
        auto& t = tracts[i];
        t.status = TractStatus::sampled;
        t.count = {truth[i], Resolution::observed};
        if (!ambiguous_planted && stratum == config.ambiguous_stratum) {
          t.count = {std::nullopt, Resolution::ambiguous_dropped};
          ambiguous_planted = true;
        }
      }
    }
  }

  std::vector<ShelterCount> shelters;
  {
    std::map<std::string, std::int64_t> totals;
    for (std::size_t i = 0; i < n; ++i) totals[tracts[i].stratum_id] += truth[i];
    for (const auto& [id, total] : totals) {
      shelters.push_back({id, std::llround(config.shelter_fraction * static_cast<double>(total))});
    }
  }

  return {TractTable(std::move(tracts)), std::move(truth), std::move(shelters), std::move(shares)};
}

void write_truth(std::ostream& out, const TractTable& tracts, const std::vector<std::int64_t>& true_counts) {
  if (true_counts.size() != tracts.size()) fail(ErrorKind::invalid_argument, "write_truth: length mismatch");
  out << "tract_id,true_count\n";
  for (std::size_t i = 0; i < tracts.size(); ++i) {
    out << csv::join_record({tracts[i].tract_id, std::to_string(true_counts[i])}) << '\n';
  }
}

std::vector<std::pair<std::string, std::int64_t>> read_truth(std::istream& in, const std::string& source) {
  csv::Reader reader(in, source);
  reader.expect_header({"tract_id", "true_count"});
  std::vector<std::pair<std::string, std::int64_t>> out;
  std::vector<std::string> f;
  while (reader.next(f)) {
    auto v = csv::parse_int(f[1]);
    if (!v || *v < 0) reader.fail_at("true_count", "expected a non-negative integer");
    out.emplace_back(f[0], *v);
  }
  return out;
}

SynthConfig read_synth_config(std::istream& in, SynthConfig base) {
  using nlohmann::json;
  try {
    const json doc = json::parse(in);
    if (!doc.is_object()) fail(ErrorKind::schema, "synth config: expected a JSON object");
    static const std::vector<std::string> known = {
        "n_tracts",         "n_strata",          "stratum_weights",   "certainty_fraction", "certainty_mode",
        "certainty_noise",  "base_rate",         "industrial_slope",  "vacancy_threshold",  "vacancy_amplitude",
        "income_threshold", "income_amplitude",  "overdispersion",    "cluster_spread_deg", "spatial_gradient", "n_cities",
        "n_out_of_frame_cities", "out_of_frame_strata", "city_radius_deg", "total_sample",   "ambiguous_stratum",  "shelter_fraction",
        "seed"};
    for (const auto& [key, value] : doc.items()) {
      if (std::find(known.begin(), known.end(), key) == known.end()) {
        fail(ErrorKind::schema, "synth config: unknown key '" + key + "'");
      }
    }
    auto& c = base;
    c.n_tracts = doc.value("n_tracts", c.n_tracts);
    c.n_strata = doc.value("n_strata", c.n_strata);
    c.stratum_weights = doc.value("stratum_weights", c.stratum_weights);
    c.certainty_fraction = doc.value("certainty_fraction", c.certainty_fraction);
    if (doc.contains("certainty_mode")) {
      const auto mode = doc.at("certainty_mode").get<std::string>();
      if (mode == "exact") {
        c.certainty_mode = CertaintyMode::exact;
      } else if (mode == "noisy") {
        c.certainty_mode = CertaintyMode::noisy;
      } else {
        fail(ErrorKind::schema, "synth config: certainty_mode must be 'exact' or 'noisy'");
      }
    }
    c.certainty_noise = doc.value("certainty_noise", c.certainty_noise);
    c.base_rate = doc.value("base_rate", c.base_rate);
    c.industrial_slope = doc.value("industrial_slope", c.industrial_slope);
    c.vacancy_threshold = doc.value("vacancy_threshold", c.vacancy_threshold);
    c.vacancy_amplitude = doc.value("vacancy_amplitude", c.vacancy_amplitude);
    c.income_threshold = doc.value("income_threshold", c.income_threshold);
    c.income_amplitude = doc.value("income_amplitude", c.income_amplitude);
    c.overdispersion = doc.value("overdispersion", c.overdispersion);
    c.cluster_spread_deg = doc.value("cluster_spread_deg", c.cluster_spread_deg);
    c.spatial_gradient = doc.value("spatial_gradient", c.spatial_gradient);
    c.n_cities = doc.value("n_cities", c.n_cities);
    c.n_out_of_frame_cities = doc.value("n_out_of_frame_cities", c.n_out_of_frame_cities);
    c.out_of_frame_strata = doc.value("out_of_frame_strata", c.out_of_frame_strata);
    c.city_radius_deg = doc.value("city_radius_deg", c.city_radius_deg);
    c.total_sample = doc.value("total_sample", c.total_sample);
    c.ambiguous_stratum = doc.value("ambiguous_stratum", c.ambiguous_stratum);
    c.shelter_fraction = doc.value("shelter_fraction", c.shelter_fraction);
    c.seed = doc.value("seed", c.seed);
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::schema, std::string("synth config: ") + e.what());
  }
}

}  // namespace smallarea
