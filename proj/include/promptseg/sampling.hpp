#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "promptseg/mask.hpp"
#include "promptseg/prompt_codec.hpp"
#include "promptseg/rng.hpp"
#include "promptseg/segmenter.hpp"

namespace promptseg {

struct SamplingConfig {
  int groups_sampled = 64;    ///< K: candidate groups drawn per target
  int groups_kept = 16;       ///< top groups by segmenter IoU kept as the pool
  int groups_emitted = 1;     ///< k: groups placed in the training answer
  int positives = 2;          ///< n1
  int negatives = 1;          ///< n2
  int pqpp_train_points = 10;
  int grid_rows = 5;
  int grid_cols = 5;
  double confidence_threshold = 0.9;
  std::uint64_t seed = 0;

  /// Throws UsageError unless 1 <= k <= keep <= K, n1 >= 1, n2 >= 0,
  /// grid >= 1x1, threshold in [0, 1], pqpp points >= 1.
  void validate() const;

  /// Point cardinality of one emitted answer: k groups of (n1, n2).
  PointCardinality cardinality() const noexcept {
    return {positives * groups_emitted, negatives * groups_emitted};
  }
};

/// n1 positive and n2 negative points.
struct PointGroup {
  std::vector<Point> positives;
  std::vector<Point> negatives;

  /// Positives first, then negatives.
  std::vector<LabeledPoint> labeled() const;
  friend bool operator==(const PointGroup&, const PointGroup&) = default;
};

/// Draws cfg.groups_sampled groups. Positives come from on-pixels inside the
/// box, negatives from off-pixels inside the box; when the mask fills the box,
/// negatives come from the box grown by 10% per side, then the whole image.
/// Candidates are restricted to pixels that survive the text encoding when
/// any exist. Points within one group are distinct when enough candidates
/// exist. Groups are drawn one after another from `rng`, so the first K groups
/// do not depend on how many are requested.
/// Throws UsageError if the box holds no on-pixel, NoNegativeCandidates if the
/// whole image is on.
std::vector<PointGroup> sample_point_groups(const BinaryMask& mask, const BBox& box,
                                            const SamplingConfig& cfg, RngStream& rng);

/// Same, with an explicit group count overriding cfg.groups_sampled.
std::vector<PointGroup> sample_point_groups(const BinaryMask& mask, const BBox& box,
                                            const SamplingConfig& cfg, int count, RngStream& rng);

struct RankedGroup {
  PointGroup group;
  double iou = 0.0;
  std::size_t index = 0;  ///< position in the sampled list
  bool failed = false;    ///< segmenter call errored; scored 0
  std::string failure;
};

/// Segments SamPrompt(box, group) for every group and sorts by IoU against
/// `gt`, descending and stable, failed calls last. Up to `max_in_flight` calls
/// run concurrently.
/// A failing call scores 0; if every call fails, throws PipelineError.
std::vector<RankedGroup> rank_groups(std::span<const PointGroup> groups, const BBox& box,
                                     const BinaryMask& gt, Segmenter& segmenter,
                                     const ImageRef& image, const std::string& tag = {},
                                     int max_in_flight = 1);

/// k distinct groups drawn uniformly from the top `groups_kept` (or all, if
/// fewer), returned in rank order.
std::vector<PointGroup> select_training_groups(std::span<const RankedGroup> ranked,
                                               const SamplingConfig& cfg, RngStream& rng);

/// cfg.pqpp_train_points points uniform over the box, labeled by membership.
std::vector<LabeledPoint> sample_pqpp_training_points(const BinaryMask& mask, const BBox& box,
                                                      const SamplingConfig& cfg, RngStream& rng);

/// rows x cols lattice over the box with inclusive corners, row-major;
/// duplicates (degenerate boxes) removed keeping the first occurrence.
std::vector<Point> grid_points(const BBox& box, int rows, int cols);

/// n distinct points uniform over the box (fewer if the box is smaller than n).
std::vector<Point> random_points(const BBox& box, int n, RngStream& rng);

/// Answers with confidence strictly above `threshold`, yes -> positive,
/// no -> negative, order preserved.
std::vector<LabeledPoint> filter_by_confidence(std::span<const PointAnswer> answers,
                                               double threshold);

}  // namespace promptseg
