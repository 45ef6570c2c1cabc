#pragma once

#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

#include "promptseg/mask.hpp"

namespace promptseg {

/// Box plus labeled points: the discrete encoding of a mask handed to a
/// promptable segmenter. A missing box means "whole image".
struct SamPrompt {
  std::optional<BBox> box;
  std::vector<LabeledPoint> points;

  /// Throws UsageError if the box or any point falls outside the image.
  void validate(int width, int height) const;
};

enum class Verdict { no, yes };

/// One membership answer for a queried point.
struct PointAnswer {
  Point point;
  Verdict verdict = Verdict::no;
  double confidence = 0.0;
};

enum class Role { user, assistant };
enum class TaskTag { ppg, pqpp, no_target };

const char* to_string(Role role) noexcept;
const char* to_string(TaskTag task) noexcept;
Role role_from_string(std::string_view s);
TaskTag task_from_string(std::string_view s);

struct Turn {
  Role role = Role::user;
  std::string text;
  friend bool operator==(const Turn&, const Turn&) = default;
};

struct DialogRecord {
  std::string id;
  TaskTag task = TaskTag::ppg;
  std::vector<Turn> turns;

  /// Roles alternate starting with the user; PPG and no-target records hold
  /// one exchange, PQPP records two. Throws FormatError otherwise.
  void validate() const;

  friend bool operator==(const DialogRecord&, const DialogRecord&) = default;
};

nlohmann::json to_json(const DialogRecord& record);
DialogRecord dialog_from_json(const nlohmann::json& j);

/// The exact response that marks a referring expression with no match.
inline constexpr std::string_view kNoTargetPhrase = "Object not in the image.";

/// User-turn wording. "{expression}" and "{points}" are substituted.
struct InstructionTemplates {
  std::string ppg =
      "Segment the object referred to by \"{expression}\". Answer with its bounding box and "
      "prompt points.";
  std::string pqpp_box =
      "Locate the object referred to by \"{expression}\". Answer with its bounding box.";
  std::string pqpp_points = "Is each of these points on the object? {points}";
};

std::string fill_template(std::string_view tmpl, std::string_view expression,
                          std::string_view points = {});

// Text encoding. Coordinates are emitted on the 0..999 grid of mask.hpp.

/// "<box>(X1,Y1),(X2,Y2)</box>"
std::string serialize_box(const BBox& box, int width, int height);
/// "<points>(X,Y,1),(X,Y,0),...</points>", 1 = positive.
std::string serialize_points(std::span<const LabeledPoint> points, int width, int height);
/// "<points>(X,Y),...</points>": unlabeled points put to the model as questions.
std::string serialize_query_points(std::span<const Point> points, int width, int height);
/// "Yes, No, ..." in order.
std::string format_answers(std::span<const Verdict> verdicts);

/// One box with its prompt points, in pixel coordinates.
struct PromptInstance {
  BBox box;
  std::vector<LabeledPoint> points;
};

/// Expected point-token cardinality: exactly `positives` label-1 and
/// `negatives` label-0 triples.
struct PointCardinality {
  int positives = 2;
  int negatives = 1;
};

/// First well-formed box token and first well-formed labeled-points token,
/// denormalized to pixels. Throws ParseError(box) / ParseError(points).
PromptInstance parse_ppg_response(std::string_view text, int width, int height,
                                  PointCardinality expect);

/// Every box token paired with the first points token that follows it (and
/// precedes the next box). Multi-instance answers yield one entry per box.
std::vector<PromptInstance> parse_ppg_instances(std::string_view text, int width, int height,
                                                PointCardinality expect);

/// Every well-formed box token in order. Throws ParseError(box) if none.
std::vector<BBox> parse_boxes(std::string_view text, int width, int height);

/// Points of the first well-formed unlabeled points token. Throws
/// ParseError(points) if none.
std::vector<Point> parse_query_points(std::string_view text, int width, int height);

/// Leading-token yes/no, case-insensitive, ignoring leading punctuation and
/// whitespace. Throws ParseError(answer) otherwise.
Verdict parse_answer(std::string_view text);

/// Every yes/no word in order; throws ParseError(answer) unless exactly
/// `expected` are found.
std::vector<Verdict> parse_answers(std::string_view text, std::size_t expected);

/// True iff the text contains the no-target phrase (case-insensitive, the
/// trailing period is optional).
bool parse_no_target(std::string_view text);

DialogRecord build_ppg_record(std::string id, std::string_view expression,
                              std::span<const PromptInstance> instances, int width, int height,
                              const InstructionTemplates& templates = {});

/// Round 1 answers with `boxes`; round 2 asks about `points` and answers with
/// their labels in order.
DialogRecord build_pqpp_record(std::string id, std::string_view expression,
                               std::span<const BBox> boxes, std::span<const LabeledPoint> points,
                               int width, int height, const InstructionTemplates& templates = {});

/// One exchange whose answer is kNoTargetPhrase. `instruction` is the template
/// the task would have used for its first user turn.
DialogRecord build_no_target_record(std::string id, std::string_view expression,
                                    std::string_view instruction);

}  // namespace promptseg
