#include <doctest.h>

#include <cmath>
#include <set>

#include "promptseg/errors.hpp"
#include "promptseg/rng.hpp"
#include "promptseg/sampling.hpp"
#include "support/world.hpp"

using namespace promptseg;
using namespace promptseg::testing;

namespace {

BinaryMask filled(int w, int h, const BBox& box) {
  BinaryMask m(w, h);
  for (int y = box.y1; y <= box.y2; ++y) {
    for (int x = box.x1; x <= box.x2; ++x) m.set(x, y);
  }
  return m;
}

/// Fails every call; optionally only for prompts whose first positive is at x.
class FlakySegmenter final : public Segmenter {
 public:
  explicit FlakySegmenter(std::optional<int> fail_x) : fail_x_(fail_x) {}
  SegmentResult segment(const SegmentRequest& r) override {
    if (!fail_x_ || r.prompt.points.front().x == *fail_x_) {
      throw SegmenterError("backend_error", "boom", true);
    }
    return {BinaryMask(r.image.width, r.image.height), 0.0};
  }

 private:
  std::optional<int> fail_x_;
};

int round_half_up(double v) { return static_cast<int>(std::floor(v + 0.5)); }

}  // namespace

TEST_CASE("derive_seed separates streams") {
  const auto a = derive_seed(1, "s1", "ppg-groups", 0);
  CHECK(a == derive_seed(1, "s1", "ppg-groups", 0));
  CHECK(a != derive_seed(2, "s1", "ppg-groups", 0));
  CHECK(a != derive_seed(1, "s2", "ppg-groups", 0));
  CHECK(a != derive_seed(1, "s1", "ppg-select", 0));
  CHECK(a != derive_seed(1, "s1", "ppg-groups", 1));
  CHECK(derive_seed(0, "ab", "c") != derive_seed(0, "a", "bc"));
}

TEST_CASE("rng bounded draws") {
  RngStream r(42);
  std::vector<int> hist(7);
  for (int i = 0; i < 70000; ++i) {
    const auto v = r.below(7);
    REQUIRE(v < 7);
    ++hist[v];
  }
  for (int h : hist) CHECK(std::abs(h - 10000) < 500);
  for (int i = 0; i < 1000; ++i) {
    const int v = r.between(-3, 3);
    CHECK(v >= -3);
    CHECK(v <= 3);
    const double u = r.unit();
    CHECK(u >= 0.0);
    CHECK(u < 1.0);
  }
  RngStream a(9), b(9);
  for (int i = 0; i < 100; ++i) CHECK(a.below(1000) == b.below(1000));
}

TEST_CASE("sampling config validation") {
  SamplingConfig c;
  CHECK_NOTHROW(c.validate());
  CHECK(c.groups_sampled == 64);
  CHECK(c.groups_kept == 16);
  CHECK(c.groups_emitted == 1);
  CHECK(c.positives == 2);
  CHECK(c.negatives == 1);
  CHECK(c.pqpp_train_points == 10);
  CHECK(c.grid_rows == 5);
  CHECK(c.grid_cols == 5);
  CHECK(c.confidence_threshold == 0.9);
  auto bad = [](auto edit) {
    SamplingConfig c;
    edit(c);
    CHECK_THROWS_AS(c.validate(), UsageError);
  };
  bad([](auto& c) { c.groups_emitted = 0; });
  bad([](auto& c) { c.groups_emitted = 17; });
  bad([](auto& c) { c.groups_kept = 65; });
  bad([](auto& c) { c.positives = 0; });
  bad([](auto& c) { c.negatives = -1; });
  bad([](auto& c) { c.grid_cols = 0; });
  bad([](auto& c) { c.confidence_threshold = 1.5; });
  bad([](auto& c) { c.pqpp_train_points = 0; });
}

TEST_CASE("groups partition a left-half mask") {
  const BBox box{10, 10, 49, 29};
  const auto mask = filled(60, 40, {10, 10, 29, 29});
  SamplingConfig cfg;
  RngStream rng(1);
  const auto groups = sample_point_groups(mask, box, cfg, rng);
  REQUIRE(groups.size() == 64);
  std::size_t points = 0;
  for (const auto& g : groups) {
    REQUIRE(g.positives.size() == 2);
    REQUIRE(g.negatives.size() == 1);
    points += g.labeled().size();
    for (const auto& p : g.positives) {
      CHECK(p.x <= 29);
      CHECK(box.contains(p.x, p.y));
    }
    for (const auto& p : g.negatives) {
      CHECK(p.x >= 30);
      CHECK(box.contains(p.x, p.y));
    }
    CHECK_FALSE(g.positives[0] == g.positives[1]);
  }
  CHECK(points == 192);
}

TEST_CASE("group sampling is deterministic and prefix-stable") {
  Gen g(4);
  const auto mask = blobby_mask(g, 50, 50);
  const auto box = tight_bbox(mask);
  REQUIRE(box);
  SamplingConfig cfg;
  RngStream a(77), b(77), c(77);
  const auto x = sample_point_groups(mask, *box, cfg, a);
  const auto y = sample_point_groups(mask, *box, cfg, b);
  CHECK(x == y);
  const auto z = sample_point_groups(mask, *box, cfg, 8, c);
  REQUIRE(z.size() == 8);
  for (int i = 0; i < 8; ++i) CHECK(z[i] == x[i]);
}

TEST_CASE("label soundness on random masks") {
  Gen g(12);
  SamplingConfig cfg;
  cfg.positives = 3;
  cfg.negatives = 2;
  for (int i = 0; i < 100; ++i) {
    const int w = uniform_int(g, 2, 80), h = uniform_int(g, 2, 80);
    const auto mask = random_mask(g, w, h, 0.3 + 0.4 * uniform_real(g));
    const auto box = tight_bbox(mask);
    if (!box || mask.area() == static_cast<std::size_t>(w * h)) continue;
    RngStream rng(static_cast<std::uint64_t>(i));
    for (const auto& grp : sample_point_groups(mask, *box, cfg, rng)) {
      for (const auto& p : grp.positives) CHECK(mask.at(p.x, p.y));
      for (const auto& p : grp.negatives) CHECK_FALSE(mask.at(p.x, p.y));
    }
  }
}

TEST_CASE("negative fallback chain") {
  SamplingConfig cfg;
  SUBCASE("dilated box") {
    // Mask fills its 20x20 box; dilation adds 2 px per side.
    const auto mask = filled(100, 100, {40, 40, 59, 59});
    RngStream rng(3);
    for (const auto& g : sample_point_groups(mask, {40, 40, 59, 59}, cfg, rng)) {
      for (const auto& p : g.negatives) {
        CHECK_FALSE(mask.at(p.x, p.y));
        CHECK(p.x >= 38);
        CHECK(p.x <= 61);
        CHECK(p.y >= 38);
        CHECK(p.y <= 61);
      }
    }
  }
  SUBCASE("whole image") {
    // Dilated box is the full image apart from one far pixel.
    auto mask = filled(30, 30, {0, 0, 29, 29});
    mask.set(29, 29, false);
    RngStream rng(3);
    for (const auto& g : sample_point_groups(mask, {0, 0, 9, 9}, cfg, rng)) {
      REQUIRE(g.negatives.size() == 1);
      CHECK(g.negatives[0] == Point{29, 29});
    }
  }
  SUBCASE("nothing off") {
    const auto mask = filled(10, 10, {0, 0, 9, 9});
    RngStream rng(3);
    CHECK_THROWS_AS(sample_point_groups(mask, {0, 0, 9, 9}, cfg, rng), NoNegativeCandidates);
  }
  SUBCASE("no positive in box") {
    const auto mask = filled(10, 10, {0, 0, 2, 2});
    RngStream rng(3);
    CHECK_THROWS_AS(sample_point_groups(mask, {5, 5, 9, 9}, cfg, rng), UsageError);
  }
}

TEST_CASE("rank_groups with the identity segmenter keeps input order") {
  const auto gt = filled(40, 40, {5, 5, 20, 20});
  IdentitySegmenter seg;
  seg.register_mask("img", gt);
  SamplingConfig cfg;
  RngStream rng(5);
  const BBox box{5, 5, 20, 20};
  const auto groups = sample_point_groups(gt, box, cfg, rng);
  const auto ranked = rank_groups(groups, box, gt, seg, {"img", 40, 40, {}}, {}, 4);
  REQUIRE(ranked.size() == groups.size());
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    CHECK(ranked[i].iou == 1.0);
    CHECK(ranked[i].index == i);
    CHECK(ranked[i].group == groups[i]);
  }
}

TEST_CASE("rank_groups against a brute-force sort") {
  // Label 1 is a big block, label 2 a small one; gt is their union.
  std::vector<int> labels(40 * 40, 0);
  for (int y = 2; y < 30; ++y) {
    for (int x = 2; x < 20; ++x) labels[y * 40 + x] = 1;
  }
  for (int y = 30; y < 36; ++y) {
    for (int x = 25; x < 31; ++x) labels[y * 40 + x] = 2;
  }
  const LabelMap scene(40, 40, labels);
  BinaryMask gt = scene.region(1);
  gt |= scene.region(2);
  SyntheticSegmenter seg;
  seg.register_scene("img", scene);
  const BBox box = *tight_bbox(gt);
  SamplingConfig cfg;
  RngStream rng(6);
  const auto groups = sample_point_groups(gt, box, cfg, rng);
  const auto ranked = rank_groups(groups, box, gt, seg, {"img", 40, 40, {}}, {}, 3);

  std::vector<std::pair<double, std::size_t>> expect;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    const auto m = oracle_synthetic(scene, SamPrompt{box, groups[i].labeled()});
    expect.emplace_back(oracle_iou(m, gt), i);
  }
  std::stable_sort(expect.begin(), expect.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  for (std::size_t i = 0; i < ranked.size(); ++i) {
    CHECK(ranked[i].iou == expect[i].first);
    CHECK(ranked[i].index == expect[i].second);
  }
  // Groups with a positive on the large block outrank those hitting only the small one.
  const auto hits_big = [&](const PointGroup& g) {
    return std::any_of(g.positives.begin(), g.positives.end(),
                       [&](const Point& p) { return scene.at(p.x, p.y) == 1; });
  };
  bool seen_small_only = false;
  for (const auto& r : ranked) {
    if (!hits_big(r.group)) seen_small_only = true;
    else CHECK_FALSE(seen_small_only);
  }
}

TEST_CASE("rank_groups failure contract") {
  const auto gt = filled(20, 20, {2, 2, 10, 10});
  SamplingConfig cfg;
  cfg.groups_sampled = 20;
  RngStream rng(8);
  const BBox box{2, 2, 10, 10};
  const auto groups = sample_point_groups(gt, box, cfg, rng);
  const int bad_x = groups[3].positives[0].x;
  FlakySegmenter some(bad_x);
  const auto ranked = rank_groups(groups, box, gt, some, {"img", 20, 20, {}});
  CHECK(ranked.back().failed);
  CHECK(ranked.back().iou == 0.0);
  CHECK(ranked.back().failure == "backend_error");
  FlakySegmenter all(std::nullopt);
  CHECK_THROWS_AS(rank_groups(groups, box, gt, all, {"img", 20, 20, {}}), PipelineError);
}

TEST_CASE("select_training_groups") {
  std::vector<RankedGroup> ranked;
  for (int i = 0; i < 64; ++i) {
    ranked.push_back({PointGroup{{{i, 0}}, {}}, 1.0 - i / 100.0, static_cast<std::size_t>(i)});
  }
  SamplingConfig cfg;
  for (std::uint64_t seed = 0; seed < 200; ++seed) {
    RngStream rng(seed);
    const auto pick = select_training_groups(ranked, cfg, rng);
    REQUIRE(pick.size() == 1);
    const int rank = pick[0].positives[0].x;
    CHECK(rank < 16);
    CHECK(ranked[rank].iou >= ranked[16].iou);
  }

  std::vector<RankedGroup> five(ranked.begin(), ranked.begin() + 5);
  std::set<int> seen;
  for (std::uint64_t seed = 0; seed < 100; ++seed) {
    RngStream rng(seed);
    seen.insert(select_training_groups(five, cfg, rng)[0].positives[0].x);
  }
  CHECK(seen == std::set<int>{0, 1, 2, 3, 4});

  SamplingConfig all = cfg;
  all.groups_emitted = 16;
  RngStream rng(1);
  const auto top = select_training_groups(ranked, all, rng);
  REQUIRE(top.size() == 16);
  for (int i = 0; i < 16; ++i) CHECK(top[i].positives[0].x == i);
}

TEST_CASE("pqpp training points") {
  SamplingConfig cfg;
  RngStream rng(2);
  const auto on = filled(50, 50, {10, 10, 30, 30});
  const auto pos = sample_pqpp_training_points(on, {12, 12, 28, 28}, cfg, rng);
  REQUIRE(pos.size() == 10);
  for (const auto& p : pos) CHECK(p.positive());
  const auto neg = sample_pqpp_training_points(on, {35, 35, 49, 49}, cfg, rng);
  REQUIRE(neg.size() == 10);
  for (const auto& p : neg) CHECK_FALSE(p.positive());

  Gen g(30);
  const auto mask = random_mask(g, 200, 100, 0.5);
  const BBox box{0, 0, 199, 99};
  const double area = static_cast<double>(mask.area()) / box.area();
  cfg.pqpp_train_points = 10000;
  const auto pts = sample_pqpp_training_points(mask, box, cfg, rng);
  REQUIRE(pts.size() == 10000);
  double positives = 0;
  for (const auto& p : pts) {
    CHECK(p.positive() == mask.at(p.x, p.y));
    positives += p.positive();
  }
  const double sigma = std::sqrt(area * (1 - area) / 10000.0);
  CHECK(std::abs(positives / 10000.0 - area) < 3 * sigma);
}

TEST_CASE("grid_points examples") {
  const auto lattice = grid_points({0, 0, 4, 4}, 5, 5);
  REQUIRE(lattice.size() == 25);
  for (int y = 0; y < 5; ++y) {
    for (int x = 0; x < 5; ++x) CHECK(lattice[y * 5 + x] == Point{x, y});
  }
  const auto single = grid_points({10, 10, 10, 10}, 5, 5);
  REQUIRE(single.size() == 1);
  CHECK(single[0] == Point{10, 10});

  const auto wide = grid_points({0, 0, 8, 4}, 5, 5);
  REQUIRE(wide.size() == 25);
  std::set<int> xs, ys;
  for (const auto& p : wide) {
    xs.insert(p.x);
    ys.insert(p.y);
  }
  CHECK(xs == std::set<int>{0, 2, 4, 6, 8});
  CHECK(ys == std::set<int>{0, 1, 2, 3, 4});

  const auto centre = grid_points({0, 0, 9, 9}, 1, 1);
  REQUIRE(centre.size() == 1);
  CHECK(centre[0] == Point{5, 5});
}

TEST_CASE("grid_points follows the rounding formula") {
  Gen g(13);
  for (int i = 0; i < 3000; ++i) {
    const BBox b = random_box(g, 700, 700);
    const int rows = uniform_int(g, 1, 8), cols = uniform_int(g, 1, 8);
    const auto pts = grid_points(b, rows, cols);
    std::vector<Point> expect;
    for (int r = 0; r < rows; ++r) {
      for (int c = 0; c < cols; ++c) {
        const int x = cols == 1 ? round_half_up((b.x1 + b.x2) / 2.0)
                                : b.x1 + round_half_up(c * double(b.x2 - b.x1) / (cols - 1));
        const int y = rows == 1 ? round_half_up((b.y1 + b.y2) / 2.0)
                                : b.y1 + round_half_up(r * double(b.y2 - b.y1) / (rows - 1));
        const Point p{x, y};
        if (std::find(expect.begin(), expect.end(), p) == expect.end()) expect.push_back(p);
      }
    }
    CHECK(pts == expect);
    for (const auto& p : pts) CHECK(b.contains(p.x, p.y));
    if (rows >= 2 && cols >= 2) {
      for (const Point corner : {Point{b.x1, b.y1}, Point{b.x2, b.y1}, Point{b.x1, b.y2},
                                 Point{b.x2, b.y2}}) {
        CHECK(std::find(pts.begin(), pts.end(), corner) != pts.end());
      }
    }
  }
}

TEST_CASE("random_points") {
  RngStream rng(1);
  const BBox b{3, 4, 12, 9};
  const auto pts = random_points(b, 25, rng);
  REQUIRE(pts.size() == 25);
  for (const auto& p : pts) CHECK(b.contains(p.x, p.y));
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (std::size_t j = i + 1; j < pts.size(); ++j) CHECK_FALSE(pts[i] == pts[j]);
  }
  CHECK(random_points({0, 0, 1, 1}, 25, rng).size() == 4);
}

TEST_CASE("filter_by_confidence") {
  const std::vector<PointAnswer> a{{{1, 1}, Verdict::yes, 0.95},
                                   {{2, 2}, Verdict::yes, 0.50},
                                   {{3, 3}, Verdict::no, 0.91}};
  const auto kept = filter_by_confidence(a, 0.9);
  REQUIRE(kept.size() == 2);
  CHECK(kept[0] == LabeledPoint{1, 1, PointLabel::positive});
  CHECK(kept[1] == LabeledPoint{3, 3, PointLabel::negative});
  CHECK(filter_by_confidence(a, 1.0).empty());
  const std::vector<PointAnswer> edge{{{0, 0}, Verdict::yes, 0.9}};
  CHECK(filter_by_confidence(edge, 0.9).empty());
}

TEST_CASE("filter monotonicity") {
  Gen g(17);
  for (int i = 0; i < 500; ++i) {
    std::vector<PointAnswer> a;
    const int n = uniform_int(g, 0, 30);
    for (int k = 0; k < n; ++k) {
      a.push_back({{k, k}, uniform_int(g, 0, 1) ? Verdict::yes : Verdict::no,
                   uniform_int(g, 0, 20) / 20.0});
    }
    double t1 = uniform_real(g), t2 = uniform_real(g);
    if (t1 > t2) std::swap(t1, t2);
    const auto low = filter_by_confidence(a, t1);
    const auto high = filter_by_confidence(a, t2);
    CHECK(high.size() <= low.size());
    for (const auto& p : high) CHECK(std::find(low.begin(), low.end(), p) != low.end());
  }
}
