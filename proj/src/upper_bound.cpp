#include "promptseg/upper_bound.hpp"

namespace promptseg {

UpperBound upper_bound_iou(const BinaryMask& gt, const BBox& box, Segmenter& segmenter,
                           const ImageRef& image, const SamplingConfig& cfg, RngStream& rng,
                           const std::string& tag) {
  const auto groups = sample_point_groups(gt, box, cfg, rng);
  UpperBound best;
  for (const auto& group : groups) {
    const auto result = segmenter.segment({image, SamPrompt{box, group.labeled()}, tag});
    const double v = iou(result.mask, gt);
    if (!best.best || v > best.iou) {
      best.iou = v;
      best.best = group;
    }
  }
  return best;
}

}  // namespace promptseg
