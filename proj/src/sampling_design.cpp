#include "smallarea/sampling_design.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>

#include "smallarea/csv.hpp"
#include "smallarea/error.hpp"
#include "smallarea/random.hpp"

namespace smallarea {

FramePartition classify_frame(const TractTable& tracts) {
  FramePartition p;
  for (const auto& id : tracts.strata()) p.eligible[id];
  for (const auto& t : tracts) {
    switch (t.status) {
      case TractStatus::certainty: p.certainty.push_back(t.tract_id); break;
      case TractStatus::out_of_frame: p.out_of_frame.push_back(t.tract_id); break;
      case TractStatus::sampled:
      case TractStatus::unsampled: p.eligible[t.stratum_id].push_back(t.tract_id); break;
    }
  }
  std::sort(p.certainty.begin(), p.certainty.end());
  std::sort(p.out_of_frame.begin(), p.out_of_frame.end());
  for (auto& [id, ids] : p.eligible) std::sort(ids.begin(), ids.end());
  return p;
}

std::map<std::string, std::int64_t> allocate_proportional(const std::map<std::string, std::int64_t>& frame_sizes,
                                                          std::int64_t total_sample) {
  if (total_sample < 0) fail(ErrorKind::invalid_argument, "total sample must be non-negative");
  __int128 frame_total = 0;
  for (const auto& [id, size] : frame_sizes) {
    if (size < 0) fail(ErrorKind::invalid_argument, "negative frame size for stratum '" + id + "'");
    frame_total += size;
  }
  if (total_sample > frame_total) {
    fail(ErrorKind::infeasible, "total sample " + std::to_string(total_sample) + " exceeds frame size " +
                                    std::to_string(static_cast<std::int64_t>(frame_total)));
  }

  std::map<std::string, std::int64_t> alloc;
  if (frame_total == 0) {
    for (const auto& [id, size] : frame_sizes) alloc[id] = 0;
    return alloc;
  }

  // Quota q_h = total * N_h / sum(N); remainders kept as exact numerators.
  struct Entry {
    std::string id;
    std::int64_t capacity;
    __int128 remainder;
  };
  std::vector<Entry> entries;
  std::int64_t assigned = 0;
  for (const auto& [id, size] : frame_sizes) {
    const __int128 numerator = static_cast<__int128>(total_sample) * size;
    const auto floor_quota = static_cast<std::int64_t>(numerator / frame_total);
    alloc[id] = std::min(floor_quota, size);
    assigned += alloc[id];
    entries.push_back({id, size, numerator % frame_total});
  }
  // map iteration is lexicographic, so stable_sort keeps id order among ties.
  std::stable_sort(entries.begin(), entries.end(),
                   [](const Entry& a, const Entry& b) { return a.remainder > b.remainder; });
  std::int64_t left = total_sample - assigned;
  while (left > 0) {
    bool progressed = false;
    for (const auto& e : entries) {
      if (left == 0) break;
      if (alloc[e.id] < e.capacity) {
        ++alloc[e.id];
        --left;
        progressed = true;
      }
    }
    if (!progressed) fail(ErrorKind::infeasible, "allocation could not place the full sample");
  }
  return alloc;
}

DesignPlan make_plan(const TractTable& tracts, std::int64_t total_sample, std::uint64_t seed) {
  auto partition = classify_frame(tracts);
  std::map<std::string, std::int64_t> sizes;
  for (const auto& [id, ids] : partition.eligible) sizes[id] = static_cast<std::int64_t>(ids.size());
  const auto alloc = allocate_proportional(sizes, total_sample);

  DesignPlan plan;
  plan.total_sample = total_sample;
  plan.seed = seed;
  for (auto& [id, ids] : partition.eligible) {
    plan.strata.push_back({id, std::move(ids), alloc.at(id)});
  }
  return plan;
}

std::map<std::string, std::vector<std::string>> draw_stratified(const DesignPlan& plan) {
  std::map<std::string, std::vector<std::string>> out;
  for (std::size_t h = 0; h < plan.strata.size(); ++h) {
    const auto& s = plan.strata[h];
    if (s.sample_size < 0 || s.sample_size > s.frame_size()) {
      fail(ErrorKind::infeasible, "stratum '" + s.stratum_id + "': sample size " + std::to_string(s.sample_size) +
                                      " exceeds frame size " + std::to_string(s.frame_size()));
    }
    Rng rng(derive_seed(plan.seed, h));
    auto picks = sample_without_replacement(rng, s.eligible_tract_ids.size(), static_cast<std::size_t>(s.sample_size));
    std::sort(picks.begin(), picks.end());
    auto& ids = out[s.stratum_id];
    ids.reserve(picks.size());
    for (auto i : picks) ids.push_back(s.eligible_tract_ids[i]);
  }
  return out;
}

void write_plan(std::ostream& out, const DesignPlan& plan,
                const std::map<std::string, std::vector<std::string>>& selection) {
  out << "stratum_id,N,n,tract_id\n";
  for (const auto& s : plan.strata) {
    const auto prefix = s.stratum_id + "," + std::to_string(s.frame_size()) + "," + std::to_string(s.sample_size) + ",";
    auto it = selection.find(s.stratum_id);
    if (it == selection.end() || it->second.empty()) {
      out << prefix << '\n';
      continue;
    }
    for (const auto& id : it->second) out << prefix << id << '\n';
  }
}

}  // namespace smallarea
