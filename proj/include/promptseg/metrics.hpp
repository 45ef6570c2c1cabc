#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include <json.hpp>

#include "promptseg/mask.hpp"

namespace promptseg {

/// Per-sample score. A no-target side is represented by nullopt masks when
/// accumulating.
struct SampleScore {
  std::string id;
  double iou = 0.0;
  bool gt_no_target = false;
  bool pred_no_target = false;
  std::string failure;  ///< empty unless the prediction failed
  std::uint64_t intersection = 0;
  std::uint64_t union_ = 0;
};

/// RES/GRES scoring over a split.
///
/// Conventions for no-target samples (GRES):
///  - gt and prediction both no-target: IoU 1, nothing added to the cIoU sums;
///  - gt no-target, prediction a mask: IoU 0, prediction area added to the union;
///  - gt a mask, prediction no-target: IoU 0, gt area added to the union.
/// Failed predictions are scored as an empty mask, never dropped.
///
/// Reports are mergeable: scoring shards and merging equals scoring the
/// concatenation. A single report must not be mutated concurrently.
class EvalReport {
 public:
  /// Throws UsageError when both masks are present with different dims.
  const SampleScore& accumulate(std::string id, const std::optional<BinaryMask>& gt,
                                const std::optional<BinaryMask>& pred, std::string failure = {});

  void merge(const EvalReport& other);

  /// intersection-sum / union-sum; 1.0 when the union-sum is 0.
  double ciou() const noexcept;
  /// Mean per-sample IoU. Throws UsageError on an empty report.
  double giou() const;
  /// Fraction of gt-no-target samples predicted no-target; nullopt when the
  /// split has none.
  std::optional<double> n_acc() const noexcept;

  std::size_t size() const noexcept { return samples_.size(); }
  const std::vector<SampleScore>& samples() const noexcept { return samples_; }
  std::uint64_t intersection_sum() const noexcept { return intersection_sum_; }
  std::uint64_t union_sum() const noexcept { return union_sum_; }
  std::size_t n_failures() const noexcept;
  std::map<std::string, std::size_t> failures_by_code() const;

  /// {ciou, giou, n_acc, n_samples, n_failures, by_failure_code}
  nlohmann::json summary() const;
  /// Header "id,iou,gt_no_target,pred_no_target,failure" then one row per sample.
  void write_csv(std::ostream& out) const;

 private:
  std::vector<SampleScore> samples_;
  std::uint64_t intersection_sum_ = 0;
  std::uint64_t union_sum_ = 0;
  std::size_t no_target_gts_ = 0;
  std::size_t no_target_hits_ = 0;
};

}  // namespace promptseg
