#pragma once

#include <optional>

#include "promptseg/sampling.hpp"
#include "promptseg/segmenter.hpp"

namespace promptseg {

struct UpperBound {
  double iou = 0.0;
  std::optional<PointGroup> best;  ///< argmax group; earliest on ties
};

/// Best IoU against `gt` reachable by any of cfg.groups_sampled groups drawn
/// from the ground truth. Groups come off `rng` in sequence, so the draws for
/// K groups are a prefix of the draws for any K' > K and the bound never
/// decreases with K.
UpperBound upper_bound_iou(const BinaryMask& gt, const BBox& box, Segmenter& segmenter,
                           const ImageRef& image, const SamplingConfig& cfg, RngStream& rng,
                           const std::string& tag = {});

}  // namespace promptseg
