#include <doctest.h>

#include <sstream>

#include "promptseg/errors.hpp"
#include "promptseg/metrics.hpp"
#include "support/world.hpp"

using namespace promptseg;
using namespace promptseg::testing;

namespace {

BinaryMask row(const std::string& bits) {
  BinaryMask m(static_cast<int>(bits.size()), 1);
  for (std::size_t i = 0; i < bits.size(); ++i) m.set(static_cast<int>(i), 0, bits[i] == '#');
  return m;
}

struct Case {
  std::optional<BinaryMask> gt, pred;
  std::string failure;
};

/// Direct transcription of the scoring conventions, pixel by pixel.
struct Brute {
  double ciou, giou;
  std::optional<double> nacc;
};

Brute brute(const std::vector<Case>& cases) {
  long inter = 0, uni = 0;
  double sum = 0.0;
  int nt = 0, nt_hit = 0;
  for (const auto& c : cases) {
    if (!c.gt && !c.pred) {
      sum += 1.0;
      ++nt;
      ++nt_hit;
      continue;
    }
    if (!c.gt) ++nt;
    const BinaryMask& ref = c.gt ? *c.gt : *c.pred;
    long i = 0, u = 0;
    for (int y = 0; y < ref.height(); ++y) {
      for (int x = 0; x < ref.width(); ++x) {
        const bool a = c.gt && c.gt->at(x, y);
        const bool b = c.pred && c.pred->at(x, y);
        i += a && b;
        u += a || b;
      }
    }
    inter += i;
    uni += u;
    // One side no-target scores 0 whatever the mask holds.
    if (c.gt && c.pred) sum += u == 0 ? 1.0 : static_cast<double>(i) / static_cast<double>(u);
  }
  Brute out{uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni),
            sum / static_cast<double>(cases.size()), std::nullopt};
  if (nt > 0) out.nacc = static_cast<double>(nt_hit) / nt;
  return out;
}

std::vector<Case> random_cases(Gen& g, int n) {
  std::vector<Case> out;
  for (int i = 0; i < n; ++i) {
    const int w = uniform_int(g, 1, 12), h = uniform_int(g, 1, 12);
    Case c;
    const int kind = uniform_int(g, 0, 9);
    if (kind > 1) c.gt = random_mask(g, w, h, uniform_real(g));
    if (kind != 0 && kind != 2) c.pred = random_mask(g, w, h, uniform_real(g));
    if (kind == 9) c.failure = "parse_box";
    out.push_back(std::move(c));
  }
  return out;
}

EvalReport score(const std::vector<Case>& cases, std::size_t from = 0,
                 std::size_t to = std::string::npos) {
  EvalReport r;
  to = std::min(to, cases.size());
  for (std::size_t i = from; i < to; ++i) {
    r.accumulate("c" + std::to_string(i), cases[i].gt, cases[i].pred, cases[i].failure);
  }
  return r;
}

}  // namespace

TEST_CASE("metric examples") {
  EvalReport r;
  const auto& s = r.accumulate("a", row("###.."), row(".####"));
  CHECK(s.intersection == 2);
  CHECK(s.union_ == 5);
  CHECK(s.iou == doctest::Approx(0.4).epsilon(1e-15));
  r.accumulate("b", row("#...."), row("#...."));
  CHECK(r.ciou() == doctest::Approx(3.0 / 6.0).epsilon(1e-15));
  CHECK(r.giou() == doctest::Approx(0.7).epsilon(1e-15));
  CHECK_FALSE(r.n_acc().has_value());

  EvalReport empty;
  CHECK(empty.ciou() == 1.0);
  CHECK_THROWS_AS(empty.giou(), UsageError);
  CHECK_FALSE(empty.n_acc().has_value());

  CHECK_THROWS_AS(r.accumulate("bad", row("##"), row("###")), UsageError);
}

TEST_CASE("no-target conventions") {
  EvalReport r;
  r.accumulate("both", std::nullopt, std::nullopt);
  CHECK(r.samples().back().iou == 1.0);
  CHECK(r.union_sum() == 0);
  r.accumulate("missed", std::nullopt, row("##.."));
  CHECK(r.samples().back().iou == 0.0);
  CHECK(r.union_sum() == 2);
  r.accumulate("hallucinated", std::nullopt, std::nullopt);
  r.accumulate("abstained", row("###."), std::nullopt);
  CHECK(r.samples().back().iou == 0.0);
  CHECK(r.union_sum() == 5);
  CHECK(r.intersection_sum() == 0);
  REQUIRE(r.n_acc().has_value());
  CHECK(*r.n_acc() == doctest::Approx(2.0 / 3.0).epsilon(1e-15));
  CHECK(r.giou() == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("an empty predicted mask on a no-target sample is not a no-target answer") {
  EvalReport r;
  r.accumulate("e", std::nullopt, row("...."));
  CHECK(r.samples().back().iou == 0.0);
  CHECK(*r.n_acc() == 0.0);
}

TEST_CASE("metrics agree with brute force") {
  Gen g(21);
  for (int trial = 0; trial < 200; ++trial) {
    const auto cases = random_cases(g, uniform_int(g, 1, 40));
    const auto r = score(cases);
    const auto b = brute(cases);
    CHECK(std::abs(r.ciou() - b.ciou) <= 1e-12);
    CHECK(std::abs(r.giou() - b.giou) <= 1e-12);
    CHECK(r.n_acc().has_value() == b.nacc.has_value());
    if (b.nacc) CHECK(std::abs(*r.n_acc() - *b.nacc) <= 1e-12);
    CHECK(r.size() == cases.size());
  }
}

TEST_CASE("merge equals scoring the concatenation") {
  Gen g(22);
  for (int trial = 0; trial < 100; ++trial) {
    const auto cases = random_cases(g, uniform_int(g, 2, 30));
    const auto cut = static_cast<std::size_t>(uniform_int(g, 0, static_cast<int>(cases.size())));
    auto left = score(cases, 0, cut);
    left.merge(score(cases, cut));
    const auto whole = score(cases);
    CHECK(left.ciou() == whole.ciou());
    CHECK(left.intersection_sum() == whole.intersection_sum());
    CHECK(left.union_sum() == whole.union_sum());
    CHECK(std::abs(left.giou() - whole.giou()) <= 1e-12);
    CHECK(left.n_acc() == whole.n_acc());
    CHECK(left.n_failures() == whole.n_failures());
    CHECK(left.samples().size() == whole.samples().size());
  }
}

TEST_CASE("metrics do not depend on sample order") {
  Gen g(23);
  for (int trial = 0; trial < 50; ++trial) {
    auto cases = random_cases(g, 25);
    const auto a = score(cases);
    std::shuffle(cases.begin(), cases.end(), g);
    const auto b = score(cases);
    CHECK(a.ciou() == b.ciou());
    CHECK(std::abs(a.giou() - b.giou()) <= 1e-12);
    CHECK(a.n_acc() == b.n_acc());
  }
}

TEST_CASE("failure bookkeeping, summary and csv") {
  EvalReport r;
  r.accumulate("a", row("##"), row("#."));
  r.accumulate("b", row("##"), row(".."), "parse_box");
  r.accumulate("c", std::nullopt, row(".."), "parse_box");
  r.accumulate("d", std::nullopt, std::nullopt);
  CHECK(r.n_failures() == 2);
  CHECK(r.failures_by_code() == std::map<std::string, std::size_t>{{"parse_box", 2}});

  const auto j = r.summary();
  CHECK(j.at("n_samples") == 4);
  CHECK(j.at("n_failures") == 2);
  CHECK(j.at("ciou").get<double>() == doctest::Approx(0.25));
  CHECK(j.at("by_failure_code").at("parse_box") == 2);
  CHECK(j.at("n_acc").get<double>() == 0.5);

  EvalReport no_nt;
  no_nt.accumulate("a", row("#"), row("#"));
  CHECK(no_nt.summary().at("n_acc").is_null());

  std::ostringstream csv;
  r.write_csv(csv);
  std::istringstream in(csv.str());
  std::string line;
  std::getline(in, line);
  CHECK(line == "id,iou,gt_no_target,pred_no_target,failure");
  int rows = 0;
  while (std::getline(in, line)) ++rows;
  CHECK(rows == 4);
  CHECK(csv.str().find("\nb,0,") != std::string::npos);
}
