#include <doctest.h>

#include "promptseg/errors.hpp"
#include "promptseg/prompt_codec.hpp"
#include "support/world.hpp"

using namespace promptseg;
using namespace promptseg::testing;

namespace {

const PointCardinality k21{2, 1};

std::string random_prose(Gen& g, int max_len) {
  std::string s;
  const int n = uniform_int(g, 0, max_len);
  for (int i = 0; i < n; ++i) s += static_cast<char>(uniform_int(g, 32, 126));
  return s;
}

void check_structure(const DialogRecord& r) {
  CHECK_NOTHROW(r.validate());
  const std::size_t expect = r.task == TaskTag::pqpp ? 4 : 2;
  REQUIRE(r.turns.size() == expect);
  for (std::size_t i = 0; i < r.turns.size(); ++i) {
    CHECK(r.turns[i].role == (i % 2 == 0 ? Role::user : Role::assistant));
  }
}

std::size_t count(std::string_view hay, std::string_view needle) {
  std::size_t n = 0;
  for (auto p = hay.find(needle); p != std::string_view::npos; p = hay.find(needle, p + 1)) ++n;
  return n;
}

}  // namespace

TEST_CASE("serialize_box examples") {
  CHECK(serialize_box({0, 0, 999, 999}, 1000, 1000) == "<box>(0,0),(999,999)</box>");
  CHECK(serialize_box({0, 0, 0, 0}, 640, 480) == "<box>(0,0),(0,0)</box>");
  // 100*1000/640 = 156.25, 50*1000/480 = 104.2, 419*1000/640 = 654.7, 299*1000/480 = 622.9
  CHECK(serialize_box({100, 50, 419, 299}, 640, 480) == "<box>(156,104),(654,622)</box>");
}

TEST_CASE("serialize_points examples") {
  const std::vector<LabeledPoint> one{{500, 500, PointLabel::positive}};
  CHECK(serialize_points(one, 1000, 1000) == "<points>(500,500,1)</points>");
  const std::vector<LabeledPoint> triple{{1, 2, PointLabel::positive},
                                         {3, 4, PointLabel::positive},
                                         {5, 6, PointLabel::negative}};
  CHECK(serialize_points(triple, 1000, 1000) == "<points>(1,2,1),(3,4,1),(5,6,0)</points>");
  const std::vector<Point> q{{0, 0}, {999, 10}};
  CHECK(serialize_query_points(q, 1000, 1000) == "<points>(0,0),(999,10)</points>");
  const std::vector<Verdict> v{Verdict::yes, Verdict::no, Verdict::yes};
  CHECK(format_answers(v) == "Yes, No, Yes");
}

TEST_CASE("codec round-trip recovers normalized integers") {
  Gen g(21);
  for (int i = 0; i < 2000; ++i) {
    const int w = uniform_int(g, 1, 3000), h = uniform_int(g, 1, 3000);
    const BBox box = random_box(g, w, h);
    std::vector<LabeledPoint> pts;
    const int n = uniform_int(g, 1, 6);
    for (int k = 0; k < n; ++k) {
      pts.push_back({uniform_int(g, 0, w - 1), uniform_int(g, 0, h - 1),
                     k < 2 ? PointLabel::positive : PointLabel::negative});
    }
    PointCardinality card{std::min(n, 2), std::max(0, n - 2)};
    const auto text = serialize_box(box, w, h) + serialize_points(pts, w, h);
    const auto parsed = parse_ppg_response(text, w, h, card);
    CHECK(serialize_box(parsed.box, w, h) == serialize_box(box, w, h));
    CHECK(serialize_points(parsed.points, w, h) == serialize_points(pts, w, h));
    // Geometry within one bin per axis.
    const int bx = (w + 999) / 1000, by = (h + 999) / 1000;
    CHECK(std::abs(parsed.box.x1 - box.x1) <= bx);
    CHECK(std::abs(parsed.box.y2 - box.y2) <= by);
    for (std::size_t k = 0; k < pts.size(); ++k) {
      CHECK(std::abs(parsed.points[k].x - pts[k].x) <= bx);
      CHECK(std::abs(parsed.points[k].y - pts[k].y) <= by);
      CHECK(parsed.points[k].label == pts[k].label);
    }
  }
}

TEST_CASE("parse_ppg_response ignores prose") {
  const std::string canonical = "<box>(10,20),(300,400)</box><points>(50,60,1),(70,80,1),(5,5,0)</points>";
  const auto base = parse_ppg_response(canonical, 1000, 1000, k21);
  CHECK(base.box == BBox{10, 20, 300, 400});
  REQUIRE(base.points.size() == 3);
  CHECK(base.points[2] == LabeledPoint{5, 5, PointLabel::negative});

  const auto sure = parse_ppg_response(
      "Sure! <box>(10,20),(300,400)</box> and the points are <points>(50,60,1),(70,80,1),(5,5,0)</points>.",
      1000, 1000, k21);
  CHECK(sure.box == base.box);
  CHECK(sure.points == base.points);

  Gen g(3);
  for (int i = 0; i < 500; ++i) {
    const auto text = random_prose(g, 40) + "<box>(10,20),(300,400)</box>" + random_prose(g, 20) +
                      "<points>(50,60,1),(70,80,1),(5,5,0)</points>" + random_prose(g, 40);
    const auto p = parse_ppg_response(text, 1000, 1000, k21);
    CHECK(p.box == base.box);
    CHECK(p.points == base.points);
  }
}

TEST_CASE("parse_ppg_response errors") {
  auto kind_of = [](const std::string& text) {
    try {
      parse_ppg_response(text, 100, 100, k21);
    } catch (const ParseError& e) {
      CHECK(e.raw() == text);
      return e.kind();
    }
    FAIL("no ParseError");
    return ParseError::Kind::answer;
  };
  CHECK(kind_of("no tokens here") == ParseError::Kind::box);
  CHECK(kind_of("<points>(1,2,1),(3,4,1),(5,6,0)</points>") == ParseError::Kind::box);
  CHECK(kind_of("<box>(1,2),(3)</box><points>(1,2,1),(3,4,1),(5,6,0)</points>") ==
        ParseError::Kind::box);
  CHECK(kind_of("<box>(5,5),(1,1)</box><points>(1,2,1),(3,4,1),(5,6,0)</points>") ==
        ParseError::Kind::box);
  CHECK(kind_of("<box>(1,2),(30,40)</box>") == ParseError::Kind::points);
  CHECK(kind_of("<box>(1,2),(30,40)</box><points>(1,2,1),(3,4,0),(5,6,0)</points>") ==
        ParseError::Kind::points);
  CHECK(kind_of("<box>(1,2),(30,40)</box><points>(1,2,1),(3,4,1)</points>") ==
        ParseError::Kind::points);
  CHECK(kind_of("<box>(1,2),(30,40)</box><points>(1,2,1),(3,4,1),(5,6,2)</points>") ==
        ParseError::Kind::points);
  CHECK(kind_of("<box>(1,2),(1000,40)</box><points>(1,2,1),(3,4,1),(5,6,0)</points>") ==
        ParseError::Kind::box);
}

TEST_CASE("parse_ppg_instances pairs boxes with points") {
  const std::string text =
      "<box>(0,0),(10,10)</box><points>(1,1,1),(2,2,1),(3,3,0)</points> "
      "<box>(20,20),(30,30)</box><points>(21,21,1),(22,22,1),(23,23,0)</points>";
  const auto inst = parse_ppg_instances(text, 1000, 1000, k21);
  REQUIRE(inst.size() == 2);
  CHECK(inst[1].box == BBox{20, 20, 30, 30});
  CHECK(inst[1].points[0] == LabeledPoint{21, 21, PointLabel::positive});
  CHECK_THROWS_AS(parse_ppg_instances("<box>(0,0),(10,10)</box> <box>(20,20),(30,30)</box>"
                                      "<points>(21,21,1),(22,22,1),(23,23,0)</points>",
                                      1000, 1000, k21),
                  ParseError);
}

TEST_CASE("parse_boxes and parse_query_points") {
  const auto boxes = parse_boxes("a <box>(0,0),(499,499)</box> b <box>(500,500),(999,999)</box>", 2, 2);
  REQUIRE(boxes.size() == 2);
  // Code 499 is an empty bin on a 2-pixel axis and maps to the next pixel.
  CHECK(boxes[0] == BBox{0, 0, 1, 1});
  CHECK(boxes[1] == BBox{1, 1, 1, 1});
  CHECK_THROWS_AS(parse_boxes("nothing", 2, 2), ParseError);

  const auto q = parse_query_points("Is it? <points>(0,0),( 999 , 999 )</points>", 1000, 1000);
  REQUIRE(q.size() == 2);
  CHECK(q[1] == Point{999, 999});
  CHECK_THROWS_AS(parse_query_points("<points>(1,2,1)</points>", 10, 10), ParseError);
}

TEST_CASE("parse_answer") {
  CHECK(parse_answer("Yes.") == Verdict::yes);
  CHECK(parse_answer("no, it is outside") == Verdict::no);
  CHECK(parse_answer("  ...YES") == Verdict::yes);
  CHECK_THROWS_AS(parse_answer("maybe"), ParseError);
  CHECK_THROWS_AS(parse_answer("not sure"), ParseError);
  CHECK_THROWS_AS(parse_answer("yesterday"), ParseError);
  CHECK_THROWS_AS(parse_answer(""), ParseError);
}

TEST_CASE("parse_answers") {
  const auto v = parse_answers("Yes, No, yes.", 3);
  CHECK(v == std::vector<Verdict>{Verdict::yes, Verdict::no, Verdict::yes});
  CHECK_THROWS_AS(parse_answers("Yes, No", 3), ParseError);
  CHECK_THROWS_AS(parse_answers("Yes, No, Yes, No", 3), ParseError);
}

TEST_CASE("parse_no_target") {
  CHECK(parse_no_target("Object not in the image."));
  CHECK(parse_no_target("object NOT in the image"));
  CHECK(parse_no_target("Hmm. Object not in the image. Sorry."));
  CHECK_FALSE(parse_no_target("<box>(0,0),(9,9)</box>"));
  CHECK_FALSE(parse_no_target("the object is not visible in the image"));
}

TEST_CASE("templates") {
  CHECK(fill_template("find {expression} at {points}!", "the dog", "<points>(1,1)</points>") ==
        "find the dog at <points>(1,1)</points>!");
  CHECK(fill_template("{expression}{expression}", "a") == "aa");
}

TEST_CASE("build_ppg_record") {
  const std::vector<PromptInstance> inst{
      {{0, 0, 99, 99},
       {{10, 10, PointLabel::positive}, {20, 20, PointLabel::positive}, {90, 5, PointLabel::negative}}}};
  const auto r = build_ppg_record("s1", "the cat", inst, 100, 100);
  CHECK(r.task == TaskTag::ppg);
  check_structure(r);
  CHECK(r.turns[0].text.find("the cat") != std::string::npos);
  CHECK(count(r.turns[1].text, "<box>") == 1);
  CHECK(count(r.turns[1].text, "<points>") == 1);
  const auto back = parse_ppg_response(r.turns[1].text, 100, 100, k21);
  CHECK(back.points.size() == 3);
}

TEST_CASE("build_pqpp_record") {
  std::vector<LabeledPoint> pts;
  for (int i = 0; i < 10; ++i) {
    pts.push_back({i, i, i % 3 ? PointLabel::positive : PointLabel::negative});
  }
  const std::vector<BBox> boxes{{0, 0, 9, 9}};
  const auto r = build_pqpp_record("s2", "the cup", boxes, pts, 1000, 1000);
  CHECK(r.task == TaskTag::pqpp);
  check_structure(r);
  CHECK(r.turns[1].text == "<box>(0,0),(9,9)</box>");
  CHECK(parse_query_points(r.turns[2].text, 1000, 1000).size() == 10);
  const auto answers = parse_answers(r.turns[3].text, 10);
  for (int i = 0; i < 10; ++i) CHECK((answers[i] == Verdict::yes) == pts[i].positive());
}

TEST_CASE("build_no_target_record") {
  const auto r = build_no_target_record("s3", "the unicorn", "Where is {expression}?");
  CHECK(r.task == TaskTag::no_target);
  check_structure(r);
  CHECK(r.turns[0].text == "Where is the unicorn?");
  CHECK(r.turns[1].text == kNoTargetPhrase);
  CHECK(parse_no_target(r.turns[1].text));
}

TEST_CASE("dialog record json") {
  const auto r = build_no_target_record("s3", "x", "{expression}");
  const auto j = to_json(r);
  CHECK(j.dump() ==
        R"({"id":"s3","task":"no-target","turns":[{"role":"user","text":"x"},{"role":"assistant","text":"Object not in the image."}]})");
  CHECK(dialog_from_json(j) == r);
  auto bad = j;
  bad["turns"][0]["role"] = "assistant";
  CHECK_THROWS(dialog_from_json(bad));
}
