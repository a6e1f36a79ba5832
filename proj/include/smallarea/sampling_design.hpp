#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "smallarea/survey_data.hpp"

namespace smallarea {

/// Partition of a tract table into the certainty set, the per-stratum
/// sampling frames, and tracts outside the sampling universe. Tracts with
/// status sampled or unsampled are frame members. Ids within each set are
/// sorted lexicographically so draws do not depend on file row order.
struct FramePartition {
  std::vector<std::string> certainty;
  std::map<std::string, std::vector<std::string>> eligible;
  std::vector<std::string> out_of_frame;
};

FramePartition classify_frame(const TractTable& tracts);

/// Largest-remainder (Hamilton) apportionment of `total_sample` over strata
/// in proportion to frame size. Remainder ties go to the lexicographically
/// smaller stratum id; no stratum receives more than its frame size.
/// Throws Error(infeasible) when total_sample exceeds the combined frame.
std::map<std::string, std::int64_t> allocate_proportional(const std::map<std::string, std::int64_t>& frame_sizes,
                                                          std::int64_t total_sample);

struct Stratum {
  std::string stratum_id;
  std::vector<std::string> eligible_tract_ids;
  std::int64_t sample_size = 0;

  std::int64_t frame_size() const { return static_cast<std::int64_t>(eligible_tract_ids.size()); }
};

struct DesignPlan {
  std::vector<Stratum> strata;  // ordered by stratum_id
  std::int64_t total_sample = 0;
  std::uint64_t seed = 0;
};

/// Builds a proportional plan over every stratum present in the table,
/// including strata whose frame is empty.
DesignPlan make_plan(const TractTable& tracts, std::int64_t total_sample, std::uint64_t seed);

/// Per-stratum SRS without replacement. Each stratum uses its own stream
/// derived from (seed, stratum position), so a draw is a pure function of the
/// plan. Selected ids come back in frame order.
std::map<std::string, std::vector<std::string>> draw_stratified(const DesignPlan& plan);

/// stratum_id,N,n,tract_id with one row per sampled tract; strata with n = 0
/// get a single row with an empty tract_id.
void write_plan(std::ostream& out, const DesignPlan& plan,
                const std::map<std::string, std::vector<std::string>>& selection);

}  // namespace smallarea
