#pragma once

#include <map>
#include <memory>
#include <optional>
#include <shared_mutex>
#include <string>
#include <vector>

#include "promptseg/mask.hpp"
#include "promptseg/prompt_codec.hpp"

namespace promptseg {

/// Which image a request is about. Backends that need pixels get them either
/// from a pre-registered id or from an inline PNG payload.
struct ImageRef {
  std::string image_id;
  int width = 0;
  int height = 0;
  std::string inline_png;  ///< raw PNG bytes; empty when referenced by id
};

struct SegmentRequest {
  ImageRef image;
  SamPrompt prompt;
  /// Caller context (the sample id). Only test doubles look at it.
  std::string tag;
};

struct SegmentResult {
  BinaryMask mask;
  double score = 0.0;
};

/// A promptable segmenter. Implementations are safe for concurrent calls and
/// deterministic for identical requests. Failures surface as SegmenterError.
class Segmenter {
 public:
  virtual ~Segmenter() = default;
  virtual SegmentResult segment(const SegmentRequest& request) = 0;
};

/// Test double returning a registered ground-truth mask regardless of the
/// prompt. Lookup is by request tag first, then by image id.
class IdentitySegmenter final : public Segmenter {
 public:
  void register_mask(std::string key, BinaryMask mask);
  SegmentResult segment(const SegmentRequest& request) override;

 private:
  mutable std::shared_mutex mutex_;
  std::map<std::string, BinaryMask, std::less<>> masks_;
};

/// Region label map partitioning an image; the synthetic segmenter's scene.
class LabelMap {
 public:
  LabelMap(int width, int height, std::vector<int> labels);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }
  int at(int x, int y) const noexcept {
    return labels_[static_cast<std::size_t>(y) * width_ + x];
  }
  const std::vector<int>& labels() const noexcept { return labels_; }

  /// Mask of every pixel carrying `label`.
  BinaryMask region(int label) const;

 private:
  int width_;
  int height_;
  std::vector<int> labels_;
};

/// Deterministic stand-in for a promptable segmenter over a label map:
///  - keep = regions holding a positive point, minus regions holding a
///    negative point; result = keep pixels inside the box (or the image);
///  - score = fraction of positive points that land on the result;
///  - with no positive points but a box, the region with the most pixels in
///    the box (ties to the smaller label) that holds no negative point, clipped
///    to the box, scored 1;
///  - with neither positives nor a box, an empty mask scored 0.
SegmentResult synthetic_segment(const LabelMap& scene, const SamPrompt& prompt);

/// Serves synthetic_segment() for scenes registered by image id.
class SyntheticSegmenter final : public Segmenter {
 public:
  void register_scene(std::string image_id, LabelMap scene);
  SegmentResult segment(const SegmentRequest& request) override;

 private:
  mutable std::shared_mutex mutex_;
  std::map<std::string, std::shared_ptr<const LabelMap>, std::less<>> scenes_;
};

}  // namespace promptseg
