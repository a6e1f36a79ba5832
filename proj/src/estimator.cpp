#include "smallarea/estimator.hpp"

#include <cmath>
#include <map>
#include <ostream>

#include "smallarea/csv.hpp"
#include "smallarea/error.hpp"

namespace smallarea {

double expansion_total(std::span<const std::int64_t> counts, std::int64_t frame_size) {
  const auto n = static_cast<std::int64_t>(counts.size());
  if (n == 0) fail(ErrorKind::invalid_argument, "expansion_total: no sampled counts");
  if (frame_size < n) {
    fail(ErrorKind::invalid_argument, "expansion_total: frame size " + std::to_string(frame_size) +
                                          " smaller than sample size " + std::to_string(n));
  }
  double sum = 0.0;
  for (auto c : counts) sum += static_cast<double>(c);
  return static_cast<double>(frame_size) / static_cast<double>(n) * sum;
}

double count_variance(std::span<const std::int64_t> counts) {
  if (counts.size() < 2) fail(ErrorKind::invalid_argument, "count_variance: need at least 2 counts");
  const double n = static_cast<double>(counts.size());
  double mean = 0.0;
  for (auto c : counts) mean += static_cast<double>(c);
  mean /= n;
  double ss = 0.0;
  for (auto c : counts) {
    const double d = static_cast<double>(c) - mean;
    ss += d * d;
  }
  return ss / n;
}

double total_variance(double count_var, std::int64_t frame_size, std::int64_t sample_size) {
  if (sample_size < 2) fail(ErrorKind::invalid_argument, "total_variance: sample size must be >= 2");
  if (sample_size > frame_size) fail(ErrorKind::invalid_argument, "total_variance: sample size exceeds frame size");
  if (!(count_var >= 0.0)) fail(ErrorKind::invalid_argument, "total_variance: negative count variance");
  const double big_n = static_cast<double>(frame_size);
  const double n = static_cast<double>(sample_size);
  const double expansion = big_n / n;
  const double fpc = (big_n - n) / (big_n - 1.0);
  return expansion * expansion * n * count_var * fpc;
}

std::optional<double> StratumEstimate::se() const {
  if (!var_tau) return std::nullopt;
  return std::sqrt(*var_tau);
}

std::optional<double> StratumEstimate::margin() const {
  auto s = se();
  if (!s) return std::nullopt;
  return 2.0 * *s;
}

StratumEstimate stratum_report(std::string stratum_id, std::span<const std::int64_t> sampled_counts,
                               std::int64_t frame_size, std::int64_t certainty_total, std::int64_t shelter_total) {
  if (certainty_total < 0 || shelter_total < 0) {
    fail(ErrorKind::invalid_argument, "stratum '" + stratum_id + "': negative certainty or shelter total");
  }
  StratumEstimate e;
  e.stratum_id = std::move(stratum_id);
  e.frame_size = frame_size;
  e.sample_size = static_cast<std::int64_t>(sampled_counts.size());
  e.certainty_total = certainty_total;
  e.shelter_total = shelter_total;
  for (auto c : sampled_counts) e.sampled_count += c;

  if (e.sample_size == 0) {
    e.tau_hat = 0.0;
    e.frame_estimated = frame_size == 0;
    if (frame_size == 0) e.var_tau = 0.0;
  } else {
    e.tau_hat = expansion_total(sampled_counts, frame_size);
    if (e.sample_size == frame_size) {
      e.var_tau = 0.0;
    } else if (e.sample_size >= 2) {
      e.var_tau = total_variance(count_variance(sampled_counts), frame_size, e.sample_size);
    }
  }
  e.total = static_cast<double>(certainty_total + shelter_total) + e.tau_hat;
  return e;
}

std::optional<double> CountyEstimate::margin() const {
  if (!se) return std::nullopt;
  return 2.0 * *se;
}

CountyEstimate county_report(std::vector<StratumEstimate> per_stratum) {
  if (per_stratum.empty()) fail(ErrorKind::invalid_argument, "county_report: no strata");
  CountyEstimate c;
  double var = 0.0;
  bool complete = true;
  for (const auto& s : per_stratum) {
    c.total += s.total;
    if (s.var_tau) {
      var += *s.var_tau;
    } else {
      complete = false;
    }
  }
  if (complete) c.se = std::sqrt(var);
  c.per_stratum = std::move(per_stratum);
  return c;
}

std::vector<StratumEstimate> estimate_strata(const TractTable& tracts, const std::vector<ShelterCount>& shelters) {
  struct Accum {
    std::int64_t frame = 0;
    std::vector<std::int64_t> sampled;
    std::int64_t certainty_total = 0;
    std::int64_t certainty_tracts = 0;
  };
  std::map<std::string, Accum> acc;
  for (const auto& id : tracts.strata()) acc[id];
  for (const auto& t : tracts) {
    auto& a = acc[t.stratum_id];
    switch (t.status) {
      case TractStatus::sampled:
        ++a.frame;
        if (auto c = t.observed_count()) a.sampled.push_back(*c);
        break;
      case TractStatus::unsampled: ++a.frame; break;
      case TractStatus::certainty:
        if (auto c = t.observed_count()) {
          a.certainty_total += *c;
          ++a.certainty_tracts;
        }
        break;
      case TractStatus::out_of_frame: break;
    }
  }
  std::map<std::string, std::int64_t> shelter_by_stratum;
  for (const auto& s : shelters) {
    if (!acc.count(s.stratum_id)) {
      fail(ErrorKind::schema, "shelter count for unknown stratum '" + s.stratum_id + "'");
    }
    shelter_by_stratum[s.stratum_id] = s.count;
  }
  std::vector<StratumEstimate> out;
  for (auto& [id, a] : acc) {
    auto e = stratum_report(id, a.sampled, a.frame, a.certainty_total, shelter_by_stratum[id]);
    e.certainty_tracts = a.certainty_tracts;
    out.push_back(std::move(e));
  }
  return out;
}

namespace {

std::string rounded(double v) { return std::to_string(std::llround(v)); }

std::string rounded(const std::optional<double>& v) { return v ? rounded(*v) : std::string("NA"); }

}  // namespace

std::string format_margin(double total, double se) { return rounded(total) + " ± " + rounded(2.0 * se); }

void write_table1(std::ostream& out, const CountyEstimate& county) {
  out << csv::join_record(kTable1Columns) << '\n';
  std::int64_t sel = 0, n_sel = 0, samp = 0, n_samp = 0, shelter = 0;
  for (const auto& s : county.per_stratum) {
    out << csv::join_record({s.stratum_id, std::to_string(s.certainty_total), std::to_string(s.certainty_tracts),
                             std::to_string(s.sampled_count), std::to_string(s.sample_size),
                             std::to_string(s.shelter_total), rounded(s.total), rounded(s.se())})
        << '\n';
    sel += s.certainty_total;
    n_sel += s.certainty_tracts;
    samp += s.sampled_count;
    n_samp += s.sample_size;
    shelter += s.shelter_total;
  }
  out << csv::join_record({"Total", std::to_string(sel), std::to_string(n_sel), std::to_string(samp),
                           std::to_string(n_samp), std::to_string(shelter), rounded(county.total),
                           rounded(county.se)})
      << '\n';
}

}  // namespace smallarea
