#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

namespace smallarea {

enum class TractStatus { certainty, sampled, unsampled, out_of_frame };

std::string_view to_string(TractStatus status);
std::optional<TractStatus> parse_tract_status(std::string_view text);

/// How a sampled tract with no recorded street count is treated.
enum class AmbiguityPolicy { drop_ambiguous, treat_as_zero };

enum class Resolution { observed, ambiguous_dropped };

struct CountStatus {
  std::optional<std::int64_t> raw_value;
  Resolution resolution = Resolution::observed;

  /// The usable count; empty when the tract was dropped.
  std::optional<std::int64_t> value() const {
    if (resolution == Resolution::ambiguous_dropped) return std::nullopt;
    return raw_value.value_or(0);
  }

  bool operator==(const CountStatus&) const = default;
};

/// Absent + drop -> ambiguous_dropped; absent + zero -> observed(0);
/// present -> observed(raw). Negative raw values are rejected.
CountStatus resolve_count_status(std::optional<std::int64_t> raw, AmbiguityPolicy policy);

struct Covariates {
  double median_income = 0.0;
  double pct_vacant = 0.0;
  double pct_residential = 0.0;
  double pct_industrial = 0.0;
  double pct_owner_occupied = 0.0;
  double pct_minority = 0.0;

  bool operator==(const Covariates&) const = default;
};

struct Tract {
  std::string tract_id;
  std::string stratum_id;
  double latitude = 0.0;
  double longitude = 0.0;
  double area_km2 = 1.0;
  Covariates covariates;
  TractStatus status = TractStatus::unsampled;
  CountStatus count{std::nullopt, Resolution::observed};

  /// Street count usable by sample-based computations.
  std::optional<std::int64_t> observed_count() const {
    if (status != TractStatus::certainty && status != TractStatus::sampled) return std::nullopt;
    return count.value();
  }

  bool operator==(const Tract&) const = default;
};

/// Names accepted by covariate_value: the six covariate columns plus
/// "latitude" and "longitude".
const std::vector<std::string>& predictor_names();
bool is_predictor_name(std::string_view name);
double covariate_value(const Tract& tract, std::string_view name);

/// Validated, immutable tract collection with id lookup.
class TractTable {
 public:
  TractTable() = default;
  /// Throws Error(schema) if any Tract invariant is violated.
  explicit TractTable(std::vector<Tract> tracts);

  std::size_t size() const noexcept { return tracts_.size(); }
  bool empty() const noexcept { return tracts_.empty(); }
  const Tract& operator[](std::size_t i) const { return tracts_[i]; }
  auto begin() const { return tracts_.begin(); }
  auto end() const { return tracts_.end(); }
  const std::vector<Tract>& tracts() const noexcept { return tracts_; }

  std::optional<std::size_t> index_of(std::string_view tract_id) const;

  /// Distinct stratum ids in lexicographic order.
  std::vector<std::string> strata() const;

  bool operator==(const TractTable& other) const { return tracts_ == other.tracts_; }

 private:
  std::vector<Tract> tracts_;
  std::unordered_map<std::string, std::size_t> index_;
};

struct ShelterCount {
  std::string stratum_id;
  std::int64_t count = 0;
  bool operator==(const ShelterCount&) const = default;
};

struct CityShare {
  std::string tract_id;
  std::string city_id;
  double share = 1.0;
  bool operator==(const CityShare&) const = default;
};

inline const std::vector<std::string> kTractColumns = {
    "tract_id",        "stratum_id",     "latitude",           "longitude",    "area_km2",
    "status",          "street_count",   "median_income",      "pct_vacant",   "pct_residential",
    "pct_industrial",  "pct_owner_occupied", "pct_minority"};
inline const std::vector<std::string> kShelterColumns = {"stratum_id", "count"};
inline const std::vector<std::string> kCityShareColumns = {"tract_id", "city_id", "share"};

TractTable read_tracts(std::istream& in, AmbiguityPolicy policy = AmbiguityPolicy::drop_ambiguous,
                       const std::string& source = "tracts.csv");
TractTable load_tracts(const std::filesystem::path& path,
                       AmbiguityPolicy policy = AmbiguityPolicy::drop_ambiguous);
void write_tracts(std::ostream& out, const TractTable& table);

std::vector<ShelterCount> read_shelters(std::istream& in, const std::string& source = "shelters.csv");
std::vector<ShelterCount> load_shelters(const std::filesystem::path& path);
void write_shelters(std::ostream& out, const std::vector<ShelterCount>& shelters);

std::vector<CityShare> read_city_shares(std::istream& in, const std::string& source = "city_shares.csv");
std::vector<CityShare> load_city_shares(const std::filesystem::path& path);
void write_city_shares(std::ostream& out, const std::vector<CityShare>& shares);

/// Tolerance applied to per-tract share sums.
inline constexpr double kShareTolerance = 1e-9;

}  // namespace smallarea
