#include "smallarea/aggregation.hpp"

#include <cmath>
#include <map>
#include <ostream>

#include "smallarea/csv.hpp"
#include "smallarea/error.hpp"

namespace smallarea {

RegionDefinition stratum_region(const TractTable& tracts, const std::string& stratum_id) {
  RegionDefinition r{stratum_id, {}};
  for (const auto& t : tracts) {
    if (t.stratum_id == stratum_id) r.members.push_back({t.tract_id, 1.0});
  }
  return r;
}

RegionDefinition county_region(const TractTable& tracts, std::string region_id) {
  RegionDefinition r{std::move(region_id), {}};
  r.members.reserve(tracts.size());
  for (const auto& t : tracts) r.members.push_back({t.tract_id, 1.0});
  return r;
}

std::vector<RegionDefinition> city_regions(const std::vector<CityShare>& shares) {
  std::map<std::string, RegionDefinition> by_city;
  for (const auto& s : shares) {
    auto& r = by_city[s.city_id];
    r.region_id = s.city_id;
    r.members.push_back({s.tract_id, s.share});
  }
  std::vector<RegionDefinition> out;
  for (auto& [id, r] : by_city) out.push_back(std::move(r));
  return out;
}

namespace {

std::size_t member_index(const TractTable& tracts, const RegionDefinition& region, const RegionMember& m) {
  auto i = tracts.index_of(m.tract_id);
  if (!i) fail(ErrorKind::invalid_argument, "region '" + region.region_id + "': unknown tract '" + m.tract_id + "'");
  if (!(m.share > 0.0 && m.share <= 1.0)) {
    fail(ErrorKind::invalid_argument, "region '" + region.region_id + "': share outside (0,1] for '" + m.tract_id + "'");
  }
  return *i;
}

}  // namespace

double aggregate_region(const TractTable& tracts, std::span<const double> final_counts,
                        const RegionDefinition& region) {
  if (final_counts.size() != tracts.size()) {
    fail(ErrorKind::invalid_argument, "aggregate_region: count vector does not match the tract table");
  }
  double total = 0.0;
  for (const auto& m : region.members) total += m.share * final_counts[member_index(tracts, region, m)];
  return total;
}

double model0_region_se(const TractTable& tracts, const RegionDefinition& region,
                        const std::vector<StratumEstimate>& strata) {
  std::map<std::string, const StratumEstimate*> by_id;
  for (const auto& s : strata) by_id[s.stratum_id] = &s;
  std::map<std::string, double> weight;
  for (const auto& m : region.members) {
    const auto& t = tracts[member_index(tracts, region, m)];
    if (t.observed_count()) continue;
    weight[t.stratum_id] += m.share;
  }
  double var = 0.0;
  for (const auto& [id, w] : weight) {
    auto it = by_id.find(id);
    if (it == by_id.end()) fail(ErrorKind::invalid_argument, "model0_region_se: no estimate for stratum '" + id + "'");
    const auto& s = *it->second;
    if (!s.var_tau || s.sample_size < 2) {
      fail(ErrorKind::infeasible, "model0_region_se: stratum '" + id + "' has fewer than 2 sampled counts");
    }
    const double big_n = static_cast<double>(s.frame_size);
    var += w * w * *s.var_tau / (big_n * big_n);
  }
  return std::sqrt(var);
}

std::vector<RegionEstimate> comparison_table(const TractTable& tracts, const std::vector<RegionDefinition>& regions,
                                             const std::vector<TractPredictions>& models,
                                             const std::vector<StratumEstimate>& strata) {
  std::vector<FullCounts> counts;
  counts.reserve(models.size());
  for (const auto& m : models) counts.push_back(assemble_full_counts(tracts, m));

  std::vector<RegionEstimate> out;
  for (const auto& region : regions) {
    RegionEstimate row{region.region_id, {}, std::nullopt};
    for (const auto& c : counts) row.totals.push_back(aggregate_region(tracts, c.counts, region));
    try {
      row.model0_se = model0_region_se(tracts, region, strata);
    } catch (const Error& e) {
      if (e.kind() != ErrorKind::infeasible) throw;
    }
    out.push_back(std::move(row));
  }
  return out;
}

std::vector<RegionDefinition> standard_regions(const TractTable& tracts, const std::vector<CityShare>& shares) {
  std::vector<RegionDefinition> out;
  for (const auto& id : tracts.strata()) out.push_back(stratum_region(tracts, id));
  out.push_back(county_region(tracts));
  for (auto& city : city_regions(shares)) out.push_back(std::move(city));
  return out;
}

void write_regions(std::ostream& out, const std::vector<std::string>& model_names,
                   const std::vector<RegionEstimate>& rows) {
  std::vector<std::string> header{"region_id"};
  header.insert(header.end(), model_names.begin(), model_names.end());
  header.push_back("model0_se");
  out << csv::join_record(header) << '\n';
  for (const auto& r : rows) {
    if (r.totals.size() != model_names.size()) {
      fail(ErrorKind::invalid_argument, "write_regions: column count mismatch for '" + r.region_id + "'");
    }
    std::vector<std::string> fields{r.region_id};
    for (double v : r.totals) fields.push_back(std::to_string(std::llround(v)));
    fields.push_back(r.model0_se ? std::to_string(std::llround(*r.model0_se)) : std::string());
    out << csv::join_record(fields) << '\n';
  }
}

}  // namespace smallarea
