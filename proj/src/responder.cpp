#include "promptseg/responder.hpp"

#include <fstream>
#include <sstream>

#include "promptseg/errors.hpp"

namespace promptseg {

const char* to_string(InferenceTask task) noexcept {
  return task == InferenceTask::ppg ? "ppg" : "pqpp";
}

namespace {

std::size_t user_turns(std::span<const Turn> turns) {
  std::size_t n = 0;
  for (const auto& t : turns) n += t.role == Role::user;
  return n;
}

}  // namespace

ScriptedResponder ScriptedResponder::from_jsonl(std::string_view text) {
  ScriptedResponder r;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      std::vector<Reply> replies;
      for (const auto& item : j.at("replies")) {
        if (item.is_string()) {
          replies.push_back({item.get<std::string>(), {}});
        } else {
          Reply reply{item.at("text").get<std::string>(), {}};
          if (item.contains("confidences")) {
            reply.token_confidences = item.at("confidences").get<std::vector<double>>();
          }
          replies.push_back(std::move(reply));
        }
      }
      r.add(j.at("id").get<std::string>(), std::move(replies));
    } catch (const nlohmann::json::exception& e) {
      throw FormatError("scripted responder fixture line " + std::to_string(lineno) + ": " +
                        e.what());
    }
  }
  return r;
}

ScriptedResponder ScriptedResponder::from_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open responder fixture " + path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_jsonl(buf.str());
}

void ScriptedResponder::add(std::string id, std::vector<Reply> replies) {
  replies_.insert_or_assign(std::move(id), std::move(replies));
}

Reply ScriptedResponder::respond(const RESample& sample, std::span<const Turn> turns) {
  const auto it = replies_.find(sample.id);
  if (it == replies_.end()) {
    throw ResponderError("no_script", "no scripted replies for sample " + sample.id);
  }
  const std::size_t round = user_turns(turns);
  if (round == 0 || round > it->second.size()) {
    throw ResponderError("no_script", "sample " + sample.id + " has no scripted reply for turn " +
                                          std::to_string(round));
  }
  return it->second[round - 1];
}

GtOracleResponder::GtOracleResponder(GtOracleOptions options) : options_(std::move(options)) {}

Reply GtOracleResponder::respond(const RESample& sample, std::span<const Turn> turns) {
  const std::size_t round = user_turns(turns);
  if (round == 0) throw ResponderError("bad_dialog", "dialog has no user turn");
  if (sample.no_target()) return {std::string(kNoTargetPhrase), {}};

  const auto& cfg = options_.sampling;
  if (round == 1) {
    std::string text;
    for (std::size_t t = 0; t < sample.targets.size(); ++t) {
      const auto& target = sample.targets[t];
      const auto box = tight_bbox(target);
      if (!box) continue;
      if (!text.empty()) text += ' ';
      text += serialize_box(*box, sample.width, sample.height);
      if (options_.task == InferenceTask::ppg) {
        RngStream rng(derive_seed(cfg.seed, sample.id, "oracle-groups", t));
        std::vector<LabeledPoint> points;
        try {
          for (const auto& g : sample_point_groups(target, *box, cfg, cfg.groups_emitted, rng)) {
            const auto labeled = g.labeled();
            points.insert(points.end(), labeled.begin(), labeled.end());
          }
        } catch (const NoNegativeCandidates& e) {
          throw ResponderError("no_negative_candidates", e.what());
        }
        text += serialize_points(points, sample.width, sample.height);
      }
    }
    return {std::move(text), {}};
  }

  const std::string& question = turns.back().text;
  const auto points = parse_query_points(question, sample.width, sample.height);
  const auto gt = *sample.target_union();
  RngStream rng(derive_seed(cfg.seed, sample.id, "oracle-answers", round));
  Reply reply;
  std::vector<Verdict> verdicts;
  for (const auto& p : points) {
    bool inside = gt.at(p.x, p.y);
    double confidence = 1.0;
    if (options_.noisy) {
      confidence = 0.5 + 0.5 * rng.unit();
      if (rng.unit() >= confidence) inside = !inside;
    }
    verdicts.push_back(inside ? Verdict::yes : Verdict::no);
    reply.token_confidences.push_back(confidence);
  }
  reply.text = format_answers(verdicts);
  return reply;
}

}  // namespace promptseg
