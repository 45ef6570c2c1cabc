#include "promptseg/prompt_codec.hpp"

#include <array>
#include <cctype>
#include <string>

#include "promptseg/errors.hpp"

namespace promptseg {

const char* to_string(ParseError::Kind kind) noexcept {
  switch (kind) {
    case ParseError::Kind::box: return "box";
    case ParseError::Kind::points: return "points";
    case ParseError::Kind::answer: return "answer";
  }
  return "unknown";
}

const char* to_string(Role role) noexcept { return role == Role::user ? "user" : "assistant"; }

const char* to_string(TaskTag task) noexcept {
  switch (task) {
    case TaskTag::ppg: return "ppg";
    case TaskTag::pqpp: return "pqpp";
    case TaskTag::no_target: return "no-target";
  }
  return "unknown";
}

Role role_from_string(std::string_view s) {
  if (s == "user") return Role::user;
  if (s == "assistant") return Role::assistant;
  throw FormatError("unknown dialog role \"" + std::string(s) + "\"");
}

TaskTag task_from_string(std::string_view s) {
  if (s == "ppg") return TaskTag::ppg;
  if (s == "pqpp") return TaskTag::pqpp;
  if (s == "no-target") return TaskTag::no_target;
  throw FormatError("unknown task tag \"" + std::string(s) + "\"");
}

void SamPrompt::validate(int width, int height) const {
  if (box && !box->fits(width, height)) {
    throw UsageError("prompt box outside " + std::to_string(width) + "x" + std::to_string(height) +
                     " image");
  }
  for (const auto& p : points) {
    if (p.x < 0 || p.y < 0 || p.x >= width || p.y >= height) {
      throw UsageError("prompt point (" + std::to_string(p.x) + "," + std::to_string(p.y) +
                       ") outside image");
    }
  }
}

void DialogRecord::validate() const {
  const std::size_t expected = task == TaskTag::pqpp ? 4 : 2;
  if (turns.size() != expected) {
    throw FormatError("record " + id + " (" + to_string(task) + ") has " +
                      std::to_string(turns.size()) + " turns, expected " +
                      std::to_string(expected));
  }
  for (std::size_t i = 0; i < turns.size(); ++i) {
    const Role want = i % 2 == 0 ? Role::user : Role::assistant;
    if (turns[i].role != want) {
      throw FormatError("record " + id + " turn " + std::to_string(i) + " should be " +
                        to_string(want));
    }
  }
}

nlohmann::json to_json(const DialogRecord& record) {
  nlohmann::json turns = nlohmann::json::array();
  for (const auto& t : record.turns) {
    turns.push_back({{"role", to_string(t.role)}, {"text", t.text}});
  }
  return {{"id", record.id}, {"task", to_string(record.task)}, {"turns", std::move(turns)}};
}

DialogRecord dialog_from_json(const nlohmann::json& j) {
  try {
    DialogRecord r;
    r.id = j.at("id").get<std::string>();
    r.task = task_from_string(j.at("task").get<std::string>());
    for (const auto& t : j.at("turns")) {
      r.turns.push_back({role_from_string(t.at("role").get<std::string>()),
                         t.at("text").get<std::string>()});
    }
    r.validate();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("malformed dialog record: ") + e.what());
  }
}

std::string fill_template(std::string_view tmpl, std::string_view expression,
                          std::string_view points) {
  std::string out;
  out.reserve(tmpl.size() + expression.size() + points.size());
  for (std::size_t i = 0; i < tmpl.size();) {
    if (tmpl.substr(i, 12) == "{expression}") {
      out += expression;
      i += 12;
    } else if (tmpl.substr(i, 8) == "{points}") {
      out += points;
      i += 8;
    } else {
      out += tmpl[i++];
    }
  }
  return out;
}

std::string serialize_box(const BBox& box, int width, int height) {
  std::string s = "<box>(";
  s += std::to_string(normalize_coord(box.x1, width)) + "," +
       std::to_string(normalize_coord(box.y1, height)) + "),(" +
       std::to_string(normalize_coord(box.x2, width)) + "," +
       std::to_string(normalize_coord(box.y2, height)) + ")</box>";
  return s;
}

std::string serialize_points(std::span<const LabeledPoint> points, int width, int height) {
  std::string s = "<points>";
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (i) s += ',';
    s += '(' + std::to_string(normalize_coord(points[i].x, width)) + ',' +
         std::to_string(normalize_coord(points[i].y, height)) + ',' +
         (points[i].positive() ? '1' : '0') + ')';
  }
  return s + "</points>";
}

std::string serialize_query_points(std::span<const Point> points, int width, int height) {
  std::string s = "<points>";
  for (std::size_t i = 0; i < points.size(); ++i) {
    if (i) s += ',';
    s += '(' + std::to_string(normalize_coord(points[i].x, width)) + ',' +
         std::to_string(normalize_coord(points[i].y, height)) + ')';
  }
  return s + "</points>";
}

std::string format_answers(std::span<const Verdict> verdicts) {
  std::string s;
  for (std::size_t i = 0; i < verdicts.size(); ++i) {
    if (i) s += ", ";
    s += verdicts[i] == Verdict::yes ? "Yes" : "No";
  }
  return s;
}

namespace {

constexpr std::string_view kBoxOpen = "<box>";
constexpr std::string_view kBoxClose = "</box>";
constexpr std::string_view kPointsOpen = "<points>";
constexpr std::string_view kPointsClose = "</points>";

/// Strict reader for the inside of one token. Whitespace is tolerated between
/// lexemes; anything else unexpected makes the token malformed.
class TokenReader {
 public:
  TokenReader(std::string_view text, std::size_t pos) : text_(text), pos_(pos) {}

  std::size_t pos() const { return pos_; }

  void skip_space() {
    while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_]))) ++pos_;
  }

  bool eat(std::string_view lit) {
    skip_space();
    if (text_.substr(pos_, lit.size()) != lit) return false;
    pos_ += lit.size();
    return true;
  }

  bool peek(char c) {
    skip_space();
    return pos_ < text_.size() && text_[pos_] == c;
  }

  std::optional<int> number(int max_value) {
    skip_space();
    const std::size_t start = pos_;
    long long v = 0;
    while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_]))) {
      v = v * 10 + (text_[pos_] - '0');
      if (v > max_value) return std::nullopt;
      ++pos_;
    }
    if (pos_ == start) return std::nullopt;
    return static_cast<int>(v);
  }

 private:
  std::string_view text_;
  std::size_t pos_;
};

/// "(a,b[,c])" with c restricted to 0/1 when arity is 3.
template <std::size_t Arity>
std::optional<std::array<int, Arity>> read_tuple(TokenReader& r) {
  std::array<int, Arity> out{};
  if (!r.eat("(")) return std::nullopt;
  for (std::size_t i = 0; i < Arity; ++i) {
    if (i && !r.eat(",")) return std::nullopt;
    const int max_value = (Arity == 3 && i == 2) ? 1 : kCoordBins - 1;
    const auto v = r.number(max_value);
    if (!v) return std::nullopt;
    out[i] = *v;
  }
  if (!r.eat(")")) return std::nullopt;
  return out;
}

struct BoxToken {
  std::array<int, 4> codes;
  std::size_t begin;
  std::size_t end;
};

template <std::size_t Arity>
struct PointsToken {
  std::vector<std::array<int, Arity>> tuples;
  std::size_t begin;
  std::size_t end;
};

std::optional<BoxToken> read_box_at(std::string_view text, std::size_t at) {
  TokenReader r(text, at + kBoxOpen.size());
  const auto a = read_tuple<2>(r);
  if (!a || !r.eat(",")) return std::nullopt;
  const auto b = read_tuple<2>(r);
  if (!b || !r.eat(kBoxClose)) return std::nullopt;
  if ((*a)[0] > (*b)[0] || (*a)[1] > (*b)[1]) return std::nullopt;
  return BoxToken{{(*a)[0], (*a)[1], (*b)[0], (*b)[1]}, at, r.pos()};
}

template <std::size_t Arity>
std::optional<PointsToken<Arity>> read_points_at(std::string_view text, std::size_t at) {
  TokenReader r(text, at + kPointsOpen.size());
  PointsToken<Arity> tok{{}, at, 0};
  do {
    const auto t = read_tuple<Arity>(r);
    if (!t) return std::nullopt;
    tok.tuples.push_back(*t);
  } while (r.eat(","));
  if (!r.eat(kPointsClose)) return std::nullopt;
  tok.end = r.pos();
  return tok;
}

std::vector<BoxToken> all_boxes(std::string_view text) {
  std::vector<BoxToken> out;
  for (std::size_t at = text.find(kBoxOpen); at != std::string_view::npos;
       at = text.find(kBoxOpen, at + 1)) {
    if (auto tok = read_box_at(text, at)) {
      out.push_back(*tok);
      at = tok->end - 1;
    }
  }
  return out;
}

template <std::size_t Arity>
std::vector<PointsToken<Arity>> all_points(std::string_view text) {
  std::vector<PointsToken<Arity>> out;
  for (std::size_t at = text.find(kPointsOpen); at != std::string_view::npos;
       at = text.find(kPointsOpen, at + 1)) {
    if (auto tok = read_points_at<Arity>(text, at)) {
      out.push_back(*tok);
      at = tok->end - 1;
    }
  }
  return out;
}

BBox box_from_codes(const std::array<int, 4>& c, int width, int height) {
  return {denormalize_coord(c[0], width), denormalize_coord(c[1], height),
          denormalize_coord(c[2], width), denormalize_coord(c[3], height)};
}

std::vector<LabeledPoint> labeled_from_token(const PointsToken<3>& tok, int width, int height,
                                             PointCardinality expect, std::string_view raw) {
  std::vector<LabeledPoint> pts;
  int positives = 0;
  int negatives = 0;
  for (const auto& t : tok.tuples) {
    const auto label = t[2] == 1 ? PointLabel::positive : PointLabel::negative;
    (label == PointLabel::positive ? positives : negatives)++;
    pts.push_back({denormalize_coord(t[0], width), denormalize_coord(t[1], height), label});
  }
  if (positives != expect.positives || negatives != expect.negatives) {
    throw ParseError(ParseError::Kind::points,
                     "expected " + std::to_string(expect.positives) + " positive and " +
                         std::to_string(expect.negatives) + " negative points, got " +
                         std::to_string(positives) + " and " + std::to_string(negatives),
                     std::string(raw));
  }
  return pts;
}

[[noreturn]] void no_box(std::string_view raw) {
  throw ParseError(ParseError::Kind::box, "no well-formed box token", std::string(raw));
}

[[noreturn]] void no_points(std::string_view raw) {
  throw ParseError(ParseError::Kind::points, "no well-formed points token", std::string(raw));
}

}  // namespace

PromptInstance parse_ppg_response(std::string_view text, int width, int height,
                                  PointCardinality expect) {
  const auto boxes = all_boxes(text);
  if (boxes.empty()) no_box(text);
  const auto points = all_points<3>(text);
  if (points.empty()) no_points(text);
  return {box_from_codes(boxes.front().codes, width, height),
          labeled_from_token(points.front(), width, height, expect, text)};
}

std::vector<PromptInstance> parse_ppg_instances(std::string_view text, int width, int height,
                                                PointCardinality expect) {
  const auto boxes = all_boxes(text);
  if (boxes.empty()) no_box(text);
  const auto points = all_points<3>(text);
  std::vector<PromptInstance> out;
  std::size_t p = 0;
  for (std::size_t b = 0; b < boxes.size(); ++b) {
    const std::size_t limit = b + 1 < boxes.size() ? boxes[b + 1].begin : text.size();
    while (p < points.size() && points[p].begin < boxes[b].end) ++p;
    if (p == points.size() || points[p].begin >= limit) no_points(text);
    out.push_back({box_from_codes(boxes[b].codes, width, height),
                   labeled_from_token(points[p], width, height, expect, text)});
    ++p;
  }
  return out;
}

std::vector<BBox> parse_boxes(std::string_view text, int width, int height) {
  const auto boxes = all_boxes(text);
  if (boxes.empty()) no_box(text);
  std::vector<BBox> out;
  out.reserve(boxes.size());
  for (const auto& b : boxes) out.push_back(box_from_codes(b.codes, width, height));
  return out;
}

std::vector<Point> parse_query_points(std::string_view text, int width, int height) {
  const auto tokens = all_points<2>(text);
  if (tokens.empty()) no_points(text);
  std::vector<Point> out;
  for (const auto& t : tokens.front().tuples) {
    out.push_back({denormalize_coord(t[0], width), denormalize_coord(t[1], height)});
  }
  return out;
}

namespace {

std::string lower(std::string_view s) {
  std::string out(s);
  for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return out;
}

std::optional<Verdict> verdict_of(std::string_view word) {
  const std::string w = lower(word);
  if (w == "yes") return Verdict::yes;
  if (w == "no") return Verdict::no;
  return std::nullopt;
}

}  // namespace

Verdict parse_answer(std::string_view text) {
  std::size_t i = 0;
  while (i < text.size() && !std::isalnum(static_cast<unsigned char>(text[i]))) ++i;
  std::size_t j = i;
  while (j < text.size() && std::isalpha(static_cast<unsigned char>(text[j]))) ++j;
  if (const auto v = verdict_of(text.substr(i, j - i))) return *v;
  throw ParseError(ParseError::Kind::answer, "answer is neither yes nor no", std::string(text));
}

std::vector<Verdict> parse_answers(std::string_view text, std::size_t expected) {
  std::vector<Verdict> out;
  for (std::size_t i = 0; i < text.size();) {
    if (!std::isalpha(static_cast<unsigned char>(text[i]))) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < text.size() && std::isalpha(static_cast<unsigned char>(text[j]))) ++j;
    if (const auto v = verdict_of(text.substr(i, j - i))) out.push_back(*v);
    i = j;
  }
  if (out.size() != expected) {
    throw ParseError(ParseError::Kind::answer,
                     "expected " + std::to_string(expected) + " yes/no answers, found " +
                         std::to_string(out.size()),
                     std::string(text));
  }
  return out;
}

bool parse_no_target(std::string_view text) {
  std::string_view phrase = kNoTargetPhrase;
  phrase.remove_suffix(1);  // trailing '.'
  return lower(text).find(lower(phrase)) != std::string::npos;
}

DialogRecord build_ppg_record(std::string id, std::string_view expression,
                              std::span<const PromptInstance> instances, int width, int height,
                              const InstructionTemplates& templates) {
  std::string answer;
  for (const auto& inst : instances) {
    if (!answer.empty()) answer += ' ';
    answer += serialize_box(inst.box, width, height);
    answer += serialize_points(inst.points, width, height);
  }
  DialogRecord r{std::move(id), TaskTag::ppg,
                 {{Role::user, fill_template(templates.ppg, expression)},
                  {Role::assistant, std::move(answer)}}};
  return r;
}

DialogRecord build_pqpp_record(std::string id, std::string_view expression,
                               std::span<const BBox> boxes, std::span<const LabeledPoint> points,
                               int width, int height, const InstructionTemplates& templates) {
  std::string box_answer;
  for (const auto& b : boxes) {
    if (!box_answer.empty()) box_answer += ' ';
    box_answer += serialize_box(b, width, height);
  }
  std::vector<Point> query;
  std::vector<Verdict> verdicts;
  for (const auto& p : points) {
    query.push_back(p.point());
    verdicts.push_back(p.positive() ? Verdict::yes : Verdict::no);
  }
  return DialogRecord{
      std::move(id),
      TaskTag::pqpp,
      {{Role::user, fill_template(templates.pqpp_box, expression)},
       {Role::assistant, std::move(box_answer)},
       {Role::user,
        fill_template(templates.pqpp_points, expression,
                      serialize_query_points(query, width, height))},
       {Role::assistant, format_answers(verdicts)}}};
}

DialogRecord build_no_target_record(std::string id, std::string_view expression,
                                    std::string_view instruction) {
  return DialogRecord{std::move(id),
                      TaskTag::no_target,
                      {{Role::user, fill_template(instruction, expression)},
                       {Role::assistant, std::string(kNoTargetPhrase)}}};
}

}  // namespace promptseg
