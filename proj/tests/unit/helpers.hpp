#pragma once

#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "smallarea/survey_data.hpp"

namespace testing {

inline smallarea::Tract tract(std::string id, std::string stratum, smallarea::TractStatus status,
                              std::optional<std::int64_t> count = std::nullopt, double lat = 34.0, double lon = -118.0) {
  smallarea::Tract t;
  t.tract_id = std::move(id);
  t.stratum_id = std::move(stratum);
  t.status = status;
  t.latitude = lat;
  t.longitude = lon;
  t.covariates = {40000.0, 0.1, 0.5, 0.1, 0.5, 0.5};
  t.count = smallarea::resolve_count_status(count, smallarea::AmbiguityPolicy::drop_ambiguous);
  if (status != smallarea::TractStatus::certainty && status != smallarea::TractStatus::sampled) {
    t.count = {std::nullopt, smallarea::Resolution::observed};
  }
  return t;
}

inline const char* kTractHeader =
    "tract_id,stratum_id,latitude,longitude,area_km2,status,street_count,median_income,pct_vacant,"
    "pct_residential,pct_industrial,pct_owner_occupied,pct_minority\n";

inline smallarea::TractTable parse_tracts(const std::string& body,
                                          smallarea::AmbiguityPolicy policy = smallarea::AmbiguityPolicy::drop_ambiguous) {
  std::istringstream in(kTractHeader + body);
  return smallarea::read_tracts(in, policy);
}

template <class F>
std::string error_of(F&& f) {
  try {
    f();
  } catch (const std::exception& e) {
    return e.what();
  }
  return {};
}

}  // namespace testing
