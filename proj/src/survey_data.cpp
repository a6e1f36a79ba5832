#include "smallarea/survey_data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <ostream>
#include <set>

#include "smallarea/csv.hpp"
#include "smallarea/error.hpp"

namespace smallarea {

std::string_view to_string(TractStatus status) {
  switch (status) {
    case TractStatus::certainty: return "certainty";
    case TractStatus::sampled: return "sampled";
    case TractStatus::unsampled: return "unsampled";
    case TractStatus::out_of_frame: return "out_of_frame";
  }
  return "unknown";
}

std::optional<TractStatus> parse_tract_status(std::string_view text) {
  if (text == "certainty") return TractStatus::certainty;
  if (text == "sampled") return TractStatus::sampled;
  if (text == "unsampled") return TractStatus::unsampled;
  if (text == "out_of_frame") return TractStatus::out_of_frame;
  return std::nullopt;
}

CountStatus resolve_count_status(std::optional<std::int64_t> raw, AmbiguityPolicy policy) {
  if (raw && *raw < 0) {
    fail(ErrorKind::invalid_argument, "street count must be non-negative, got " + std::to_string(*raw));
  }
  if (raw) return {raw, Resolution::observed};
  if (policy == AmbiguityPolicy::drop_ambiguous) return {std::nullopt, Resolution::ambiguous_dropped};
  return {std::nullopt, Resolution::observed};
}

const std::vector<std::string>& predictor_names() {
  static const std::vector<std::string> names = {
      "median_income",      "pct_vacant",   "pct_residential", "pct_industrial",
      "pct_owner_occupied", "pct_minority", "latitude",        "longitude"};
  return names;
}

bool is_predictor_name(std::string_view name) {
  const auto& names = predictor_names();
  return std::find(names.begin(), names.end(), name) != names.end();
}

double covariate_value(const Tract& tract, std::string_view name) {
  const auto& c = tract.covariates;
  if (name == "median_income") return c.median_income;
  if (name == "pct_vacant") return c.pct_vacant;
  if (name == "pct_residential") return c.pct_residential;
  if (name == "pct_industrial") return c.pct_industrial;
  if (name == "pct_owner_occupied") return c.pct_owner_occupied;
  if (name == "pct_minority") return c.pct_minority;
  if (name == "latitude") return tract.latitude;
  if (name == "longitude") return tract.longitude;
  fail(ErrorKind::invalid_argument, "unknown predictor '" + std::string(name) + "'");
}

namespace {

void check_tract(const Tract& t, std::size_t position) {
  const auto where = [&] { return "tract '" + t.tract_id + "' (entry " + std::to_string(position + 1) + ")"; };
  if (t.tract_id.empty()) fail(ErrorKind::schema, where() + ": empty tract_id");
  if (t.stratum_id.empty()) fail(ErrorKind::schema, where() + ": empty stratum_id");
  if (!(t.area_km2 > 0.0) || !std::isfinite(t.area_km2)) fail(ErrorKind::schema, where() + ": area_km2 must be > 0");
  const std::pair<const char*, double> fractions[] = {
      {"pct_vacant", t.covariates.pct_vacant},
      {"pct_residential", t.covariates.pct_residential},
      {"pct_industrial", t.covariates.pct_industrial},
      {"pct_owner_occupied", t.covariates.pct_owner_occupied},
      {"pct_minority", t.covariates.pct_minority}};
  for (const auto& [name, v] : fractions) {
    if (!(v >= 0.0 && v <= 1.0)) fail(ErrorKind::schema, where() + ": " + name + " outside [0,1]");
  }
  const bool counted = t.status == TractStatus::certainty || t.status == TractStatus::sampled;
  if (t.count.raw_value && !counted) {
    fail(ErrorKind::schema, where() + ": street_count present on " + std::string(to_string(t.status)) + " tract");
  }
  if (t.count.raw_value && *t.count.raw_value < 0) fail(ErrorKind::schema, where() + ": negative street_count");
}

}  // namespace

TractTable::TractTable(std::vector<Tract> tracts) : tracts_(std::move(tracts)) {
  index_.reserve(tracts_.size());
  for (std::size_t i = 0; i < tracts_.size(); ++i) {
    check_tract(tracts_[i], i);
    if (!index_.emplace(tracts_[i].tract_id, i).second) {
      fail(ErrorKind::schema, "duplicate tract_id '" + tracts_[i].tract_id + "'");
    }
  }
}

std::optional<std::size_t> TractTable::index_of(std::string_view tract_id) const {
  auto it = index_.find(std::string(tract_id));
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

std::vector<std::string> TractTable::strata() const {
  std::set<std::string> ids;
  for (const auto& t : tracts_) ids.insert(t.stratum_id);
  return {ids.begin(), ids.end()};
}

namespace {

std::ifstream open_input(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) fail(ErrorKind::io, "cannot open '" + path.string() + "'");
  return in;
}

double require_double(const csv::Reader& reader, std::string_view column, const std::string& text) {
  auto v = csv::parse_double(text);
  if (!v || !std::isfinite(*v)) reader.fail_at(column, "expected a number, got '" + text + "'");
  return *v;
}

double require_fraction(const csv::Reader& reader, std::string_view column, const std::string& text) {
  const double v = require_double(reader, column, text);
  if (v < 0.0 || v > 1.0) reader.fail_at(column, "fraction " + text + " outside [0,1]");
  return v;
}

}  // namespace

TractTable read_tracts(std::istream& in, AmbiguityPolicy policy, const std::string& source) {
  csv::Reader reader(in, source);
  reader.expect_header(kTractColumns);
  std::vector<Tract> tracts;
  std::map<std::string, std::size_t> first_line;
  std::vector<std::string> f;
  while (reader.next(f)) {
    Tract t;
    t.tract_id = f[0];
    if (t.tract_id.empty()) reader.fail_at("tract_id", "empty tract_id");
    if (auto [it, inserted] = first_line.emplace(t.tract_id, reader.line()); !inserted) {
      reader.fail_at("tract_id", "duplicate tract_id '" + t.tract_id + "' (first seen on line " +
                                     std::to_string(it->second) + ")");
    }
    t.stratum_id = f[1];
    if (t.stratum_id.empty()) reader.fail_at("stratum_id", "empty stratum_id");
    t.latitude = require_double(reader, "latitude", f[2]);
    t.longitude = require_double(reader, "longitude", f[3]);
    t.area_km2 = require_double(reader, "area_km2", f[4]);
    if (t.area_km2 <= 0.0) reader.fail_at("area_km2", "area must be > 0");
    auto status = parse_tract_status(f[5]);
    if (!status) reader.fail_at("status", "unknown status '" + f[5] + "'");
    t.status = *status;

    std::optional<std::int64_t> raw;
    if (!f[6].empty()) {
      raw = csv::parse_int(f[6]);
      if (!raw) reader.fail_at("street_count", "expected an integer, got '" + f[6] + "'");
      if (*raw < 0) reader.fail_at("street_count", "negative count " + f[6]);
    }
    const bool counted = t.status == TractStatus::certainty || t.status == TractStatus::sampled;
    if (raw && !counted) {
      reader.fail_at("street_count", "count present on " + std::string(to_string(t.status)) + " tract");
    }
    t.count = counted ? resolve_count_status(raw, policy) : CountStatus{std::nullopt, Resolution::observed};

    t.covariates.median_income = require_double(reader, "median_income", f[7]);
    t.covariates.pct_vacant = require_fraction(reader, "pct_vacant", f[8]);
    t.covariates.pct_residential = require_fraction(reader, "pct_residential", f[9]);
    t.covariates.pct_industrial = require_fraction(reader, "pct_industrial", f[10]);
    t.covariates.pct_owner_occupied = require_fraction(reader, "pct_owner_occupied", f[11]);
    t.covariates.pct_minority = require_fraction(reader, "pct_minority", f[12]);
    tracts.push_back(std::move(t));
  }
  return TractTable(std::move(tracts));
}

TractTable load_tracts(const std::filesystem::path& path, AmbiguityPolicy policy) {
  auto in = open_input(path);
  return read_tracts(in, policy, path.string());
}

void write_tracts(std::ostream& out, const TractTable& table) {
  out << csv::join_record(kTractColumns) << '\n';
  for (const auto& t : table) {
    const auto& c = t.covariates;
    out << csv::join_record({t.tract_id, t.stratum_id, csv::format_double(t.latitude),
                             csv::format_double(t.longitude), csv::format_double(t.area_km2),
                             std::string(to_string(t.status)),
                             t.count.raw_value ? std::to_string(*t.count.raw_value) : std::string(),
                             csv::format_double(c.median_income), csv::format_double(c.pct_vacant),
                             csv::format_double(c.pct_residential), csv::format_double(c.pct_industrial),
                             csv::format_double(c.pct_owner_occupied), csv::format_double(c.pct_minority)})
        << '\n';
  }
}

std::vector<ShelterCount> read_shelters(std::istream& in, const std::string& source) {
  csv::Reader reader(in, source);
  reader.expect_header(kShelterColumns);
  std::vector<ShelterCount> out;
  std::set<std::string> seen;
  std::vector<std::string> f;
  while (reader.next(f)) {
    if (f[0].empty()) reader.fail_at("stratum_id", "empty stratum_id");
    if (!seen.insert(f[0]).second) reader.fail_at("stratum_id", "duplicate stratum '" + f[0] + "'");
    auto count = csv::parse_int(f[1]);
    if (!count) reader.fail_at("count", "expected an integer, got '" + f[1] + "'");
    if (*count < 0) reader.fail_at("count", "negative shelter count " + f[1]);
    out.push_back({f[0], *count});
  }
  return out;
}

std::vector<ShelterCount> load_shelters(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_shelters(in, path.string());
}

void write_shelters(std::ostream& out, const std::vector<ShelterCount>& shelters) {
  out << csv::join_record(kShelterColumns) << '\n';
  for (const auto& s : shelters) out << csv::join_record({s.stratum_id, std::to_string(s.count)}) << '\n';
}

std::vector<CityShare> read_city_shares(std::istream& in, const std::string& source) {
  csv::Reader reader(in, source);
  reader.expect_header(kCityShareColumns);
  std::vector<CityShare> out;
  std::map<std::string, double> sums;
  std::set<std::pair<std::string, std::string>> pairs;
  std::vector<std::string> f;
  while (reader.next(f)) {
    if (f[0].empty()) reader.fail_at("tract_id", "empty tract_id");
    if (f[1].empty()) reader.fail_at("city_id", "empty city_id");
    if (!pairs.emplace(f[0], f[1]).second) {
      reader.fail_at("city_id", "duplicate share for tract '" + f[0] + "' in city '" + f[1] + "'");
    }
    const double share = require_double(reader, "share", f[2]);
    if (!(share > 0.0 && share <= 1.0)) reader.fail_at("share", "share " + f[2] + " outside (0,1]");
    double& sum = sums[f[0]];
    sum += share;
    if (sum > 1.0 + kShareTolerance) {
      reader.fail_at("share", "shares for tract '" + f[0] + "' sum to " + csv::format_double(sum) + " > 1");
    }
    out.push_back({f[0], f[1], share});
  }
  return out;
}

std::vector<CityShare> load_city_shares(const std::filesystem::path& path) {
  auto in = open_input(path);
  return read_city_shares(in, path.string());
}

void write_city_shares(std::ostream& out, const std::vector<CityShare>& shares) {
  out << csv::join_record(kCityShareColumns) << '\n';
  for (const auto& s : shares) out << csv::join_record({s.tract_id, s.city_id, csv::format_double(s.share)}) << '\n';
}

}  // namespace smallarea
