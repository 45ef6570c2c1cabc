#include "promptseg/sampling.hpp"

#include <algorithm>

#include "promptseg/errors.hpp"
#include "promptseg/parallel.hpp"

namespace promptseg {

void SamplingConfig::validate() const {
  auto fail = [](const std::string& what) { throw UsageError("sampling config: " + what); };
  if (groups_emitted < 1 || groups_emitted > groups_kept || groups_kept > groups_sampled) {
    fail("need 1 <= groups_emitted <= groups_kept <= groups_sampled");
  }
  if (positives < 1) fail("positives must be >= 1");
  if (negatives < 0) fail("negatives must be >= 0");
  if (grid_rows < 1 || grid_cols < 1) fail("grid dimensions must be >= 1");
  if (!(confidence_threshold >= 0.0 && confidence_threshold <= 1.0)) {
    fail("confidence_threshold must lie in [0, 1]");
  }
  if (pqpp_train_points < 1) fail("pqpp_train_points must be >= 1");
}

std::vector<LabeledPoint> PointGroup::labeled() const {
  std::vector<LabeledPoint> out;
  out.reserve(positives.size() + negatives.size());
  for (const auto& p : positives) out.push_back({p.x, p.y, PointLabel::positive});
  for (const auto& p : negatives) out.push_back({p.x, p.y, PointLabel::negative});
  return out;
}

namespace {

/// Pixels of `region` whose mask bit equals `on`. Codec-representable pixels
/// are preferred; the full set is used only when none are representable.
std::vector<Point> candidates(const BinaryMask& mask, const BBox& region, bool on) {
  std::vector<Point> exact;
  std::vector<Point> any;
  for (int y = region.y1; y <= region.y2; ++y) {
    const bool ry = representable_coord(y, mask.height());
    for (int x = region.x1; x <= region.x2; ++x) {
      if (mask.at(x, y) != on) continue;
      any.push_back({x, y});
      if (ry && representable_coord(x, mask.width())) exact.push_back({x, y});
    }
  }
  return exact.empty() ? any : exact;
}

/// n draws from pool; distinct when the pool is large enough.
std::vector<Point> draw(const std::vector<Point>& pool, int n, RngStream& rng) {
  std::vector<Point> out;
  out.reserve(static_cast<std::size_t>(n));
  const bool distinct = pool.size() >= static_cast<std::size_t>(n);
  while (out.size() < static_cast<std::size_t>(n)) {
    const Point p = pool[rng.below(pool.size())];
    if (distinct && std::find(out.begin(), out.end(), p) != out.end()) continue;
    out.push_back(p);
  }
  return out;
}

BBox dilate(const BBox& box, int width, int height) {
  const int dx = (box.width() + 9) / 10;
  const int dy = (box.height() + 9) / 10;
  return {std::max(0, box.x1 - dx), std::max(0, box.y1 - dy), std::min(width - 1, box.x2 + dx),
          std::min(height - 1, box.y2 + dy)};
}

void require_box(const BBox& box, const BinaryMask& mask) {
  if (!box.fits(mask.width(), mask.height())) {
    throw UsageError("sampling box outside the mask");
  }
}

}  // namespace

std::vector<PointGroup> sample_point_groups(const BinaryMask& mask, const BBox& box,
                                            const SamplingConfig& cfg, RngStream& rng) {
  return sample_point_groups(mask, box, cfg, cfg.groups_sampled, rng);
}

std::vector<PointGroup> sample_point_groups(const BinaryMask& mask, const BBox& box,
                                            const SamplingConfig& cfg, int count, RngStream& rng) {
  require_box(box, mask);
  const auto on = candidates(mask, box, true);
  if (on.empty()) throw UsageError("no on-pixel inside the sampling box");

  std::vector<Point> off;
  if (cfg.negatives > 0) {
    off = candidates(mask, box, false);
    if (off.empty()) off = candidates(mask, dilate(box, mask.width(), mask.height()), false);
    if (off.empty()) {
      off = candidates(mask, {0, 0, mask.width() - 1, mask.height() - 1}, false);
    }
    if (off.empty()) throw NoNegativeCandidates("mask covers the whole image");
  }

  std::vector<PointGroup> groups;
  groups.reserve(static_cast<std::size_t>(std::max(0, count)));
  for (int g = 0; g < count; ++g) {
    PointGroup group;
    group.positives = draw(on, cfg.positives, rng);
    if (cfg.negatives > 0) group.negatives = draw(off, cfg.negatives, rng);
    groups.push_back(std::move(group));
  }
  return groups;
}

std::vector<RankedGroup> rank_groups(std::span<const PointGroup> groups, const BBox& box,
                                     const BinaryMask& gt, Segmenter& segmenter,
                                     const ImageRef& image, const std::string& tag,
                                     int max_in_flight) {
  std::vector<RankedGroup> ranked(groups.size());
  parallel_for(groups.size(), max_in_flight, [&](std::size_t i) {
    RankedGroup& r = ranked[i];
    r.group = groups[i];
    r.index = i;
    try {
      const auto result = segmenter.segment({image, SamPrompt{box, groups[i].labeled()}, tag});
      r.iou = iou(result.mask, gt);
    } catch (const SegmenterError& e) {
      r.failed = true;
      r.failure = e.code();
    } catch (const UsageError& e) {
      r.failed = true;
      r.failure = "bad_mask";
    }
  });
  if (!ranked.empty() &&
      std::all_of(ranked.begin(), ranked.end(), [](const RankedGroup& r) { return r.failed; })) {
    throw PipelineError("segmenter failed on every group (" + ranked.front().failure + ")");
  }
  // Failed groups go after every scored one, even those at IoU 0.
  std::stable_sort(ranked.begin(), ranked.end(), [](const RankedGroup& a, const RankedGroup& b) {
    if (a.failed != b.failed) return b.failed;
    return a.iou > b.iou;
  });
  return ranked;
}

std::vector<PointGroup> select_training_groups(std::span<const RankedGroup> ranked,
                                               const SamplingConfig& cfg, RngStream& rng) {
  if (ranked.empty()) throw UsageError("no ranked groups to select from");
  const std::size_t pool = std::min(ranked.size(), static_cast<std::size_t>(cfg.groups_kept));
  const std::size_t k = std::min(pool, static_cast<std::size_t>(cfg.groups_emitted));
  // Partial Fisher-Yates over pool positions.
  std::vector<std::size_t> order(pool);
  for (std::size_t i = 0; i < pool; ++i) order[i] = i;
  for (std::size_t i = 0; i < k; ++i) {
    const std::size_t j = i + rng.below(pool - i);
    std::swap(order[i], order[j]);
  }
  std::vector<std::size_t> picked(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(k));
  std::sort(picked.begin(), picked.end());
  std::vector<PointGroup> out;
  out.reserve(k);
  for (const std::size_t i : picked) out.push_back(ranked[i].group);
  return out;
}

std::vector<LabeledPoint> sample_pqpp_training_points(const BinaryMask& mask, const BBox& box,
                                                      const SamplingConfig& cfg, RngStream& rng) {
  require_box(box, mask);
  std::vector<int> xs;
  std::vector<int> ys;
  for (int x = box.x1; x <= box.x2; ++x) {
    if (representable_coord(x, mask.width())) xs.push_back(x);
  }
  for (int y = box.y1; y <= box.y2; ++y) {
    if (representable_coord(y, mask.height())) ys.push_back(y);
  }
  if (xs.empty()) xs.push_back(box.x1);
  if (ys.empty()) ys.push_back(box.y1);

  std::vector<LabeledPoint> out;
  out.reserve(static_cast<std::size_t>(cfg.pqpp_train_points));
  for (int i = 0; i < cfg.pqpp_train_points; ++i) {
    const int x = xs[rng.below(xs.size())];
    const int y = ys[rng.below(ys.size())];
    out.push_back({x, y, mask.at(x, y) ? PointLabel::positive : PointLabel::negative});
  }
  return out;
}

namespace {

/// lo + round(j * (hi - lo) / (n - 1)), halves rounded up; centre when n == 1.
int lattice(int lo, int hi, int j, int n) {
  if (n == 1) return lo + (hi - lo + 1) / 2;
  const long long span = hi - lo;
  return lo + static_cast<int>((2LL * j * span + (n - 1)) / (2LL * (n - 1)));
}

}  // namespace

std::vector<Point> grid_points(const BBox& box, int rows, int cols) {
  if (rows < 1 || cols < 1) throw UsageError("grid dimensions must be >= 1");
  std::vector<Point> out;
  out.reserve(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols));
  for (int i = 0; i < rows; ++i) {
    const int y = lattice(box.y1, box.y2, i, rows);
    for (int j = 0; j < cols; ++j) {
      const Point p{lattice(box.x1, box.x2, j, cols), y};
      if (std::find(out.begin(), out.end(), p) == out.end()) out.push_back(p);
    }
  }
  return out;
}

std::vector<Point> random_points(const BBox& box, int n, RngStream& rng) {
  const std::size_t target = std::min<std::size_t>(static_cast<std::size_t>(std::max(0, n)), box.area());
  std::vector<Point> out;
  out.reserve(target);
  while (out.size() < target) {
    const Point p{box.x1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(box.width()))),
                  box.y1 + static_cast<int>(rng.below(static_cast<std::uint64_t>(box.height())))};
    if (std::find(out.begin(), out.end(), p) == out.end()) out.push_back(p);
  }
  return out;
}

std::vector<LabeledPoint> filter_by_confidence(std::span<const PointAnswer> answers,
                                               double threshold) {
  std::vector<LabeledPoint> out;
  for (const auto& a : answers) {
    if (a.confidence > threshold) {
      out.push_back({a.point.x, a.point.y,
                     a.verdict == Verdict::yes ? PointLabel::positive : PointLabel::negative});
    }
  }
  return out;
}

}  // namespace promptseg
