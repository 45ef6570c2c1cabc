#include "promptseg/segmenter.hpp"

#include <algorithm>
#include <mutex>
#include <set>
#include <unordered_map>

#include "promptseg/errors.hpp"

namespace promptseg {

void IdentitySegmenter::register_mask(std::string key, BinaryMask mask) {
  std::unique_lock lock(mutex_);
  masks_.insert_or_assign(std::move(key), std::move(mask));
}

SegmentResult IdentitySegmenter::segment(const SegmentRequest& request) {
  std::shared_lock lock(mutex_);
  auto it = request.tag.empty() ? masks_.end() : masks_.find(request.tag);
  if (it == masks_.end()) it = masks_.find(request.image.image_id);
  if (it == masks_.end()) {
    throw SegmenterError("unknown_image",
                         "identity segmenter has no mask for image \"" + request.image.image_id +
                             "\"",
                         false);
  }
  return {it->second, 1.0};
}

LabelMap::LabelMap(int width, int height, std::vector<int> labels)
    : width_(width), height_(height), labels_(std::move(labels)) {
  if (width < 1 || height < 1 ||
      labels_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw UsageError("label map size does not match its dimensions");
  }
}

BinaryMask LabelMap::region(int label) const {
  BinaryMask m(width_, height_);
  for (int y = 0; y < height_; ++y) {
    for (int x = 0; x < width_; ++x) {
      if (at(x, y) == label) m.set(x, y);
    }
  }
  return m;
}

SegmentResult synthetic_segment(const LabelMap& scene, const SamPrompt& prompt) {
  prompt.validate(scene.width(), scene.height());
  const BBox clip = prompt.box.value_or(BBox{0, 0, scene.width() - 1, scene.height() - 1});

  std::set<int> positive_regions;
  std::set<int> negative_regions;
  std::size_t positives = 0;
  for (const auto& p : prompt.points) {
    const int label = scene.at(p.x, p.y);
    if (p.positive()) {
      ++positives;
      positive_regions.insert(label);
    } else {
      negative_regions.insert(label);
    }
  }

  BinaryMask result(scene.width(), scene.height());
  if (positives == 0) {
    if (!prompt.box) return {std::move(result), 0.0};
    std::unordered_map<int, std::size_t> in_box;
    for (int y = clip.y1; y <= clip.y2; ++y) {
      for (int x = clip.x1; x <= clip.x2; ++x) ++in_box[scene.at(x, y)];
    }
    std::optional<int> best;
    for (const auto& [label, count] : in_box) {
      if (negative_regions.contains(label)) continue;
      if (!best || count > in_box[*best] || (count == in_box[*best] && label < *best)) {
        best = label;
      }
    }
    if (!best) return {std::move(result), 0.0};
    for (int y = clip.y1; y <= clip.y2; ++y) {
      for (int x = clip.x1; x <= clip.x2; ++x) {
        if (scene.at(x, y) == *best) result.set(x, y);
      }
    }
    return {std::move(result), 1.0};
  }

  std::set<int> keep;
  std::set_difference(positive_regions.begin(), positive_regions.end(), negative_regions.begin(),
                      negative_regions.end(), std::inserter(keep, keep.end()));
  for (int y = clip.y1; y <= clip.y2; ++y) {
    for (int x = clip.x1; x <= clip.x2; ++x) {
      if (keep.contains(scene.at(x, y))) result.set(x, y);
    }
  }
  std::size_t excluded = 0;
  for (const auto& p : prompt.points) {
    if (p.positive() && !result.at(p.x, p.y)) ++excluded;
  }
  const double score = 1.0 - static_cast<double>(excluded) / static_cast<double>(positives);
  return {std::move(result), score};
}

void SyntheticSegmenter::register_scene(std::string image_id, LabelMap scene) {
  std::unique_lock lock(mutex_);
  scenes_.insert_or_assign(std::move(image_id),
                           std::make_shared<const LabelMap>(std::move(scene)));
}

SegmentResult SyntheticSegmenter::segment(const SegmentRequest& request) {
  std::shared_ptr<const LabelMap> scene;
  {
    std::shared_lock lock(mutex_);
    const auto it = scenes_.find(request.image.image_id);
    if (it == scenes_.end()) {
      throw SegmenterError("unknown_image",
                           "no synthetic scene for image \"" + request.image.image_id + "\"",
                           false);
    }
    scene = it->second;
  }
  try {
    return synthetic_segment(*scene, request.prompt);
  } catch (const UsageError& e) {
    throw SegmenterError("bad_request", e.what(), false);
  }
}

}  // namespace promptseg
