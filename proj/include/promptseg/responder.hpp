#pragma once

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "promptseg/prompt_codec.hpp"
#include "promptseg/sample.hpp"
#include "promptseg/sampling.hpp"

namespace promptseg {

/// One model answer. token_confidences holds one probability per yes/no
/// answer in order; an empty list means the binding reports none and every
/// answer counts as fully confident. Entries missing from a non-empty list
/// count as 0.
struct Reply {
  std::string text;
  std::vector<double> token_confidences;
};

/// Stand-in for the multimodal model: answers the latest user turn of a
/// dialog about `sample`. Implementations are safe for concurrent calls.
class Responder {
 public:
  virtual ~Responder() = default;
  virtual Reply respond(const RESample& sample, std::span<const Turn> turns) = 0;
};

/// Replays fixture replies: the n-th user turn of a sample gets the n-th reply
/// listed for its id. Fixture JSONL lines look like
///   {"id": "s1", "replies": ["<box>...</box>", {"text": "Yes, No", "confidences": [0.95, 0.4]}]}
class ScriptedResponder final : public Responder {
 public:
  static ScriptedResponder from_file(const std::filesystem::path& path);
  static ScriptedResponder from_jsonl(std::string_view text);

  void add(std::string id, std::vector<Reply> replies);
  Reply respond(const RESample& sample, std::span<const Turn> turns) override;

 private:
  std::map<std::string, std::vector<Reply>, std::less<>> replies_;
};

enum class InferenceTask { ppg, pqpp };

const char* to_string(InferenceTask task) noexcept;

struct GtOracleOptions {
  InferenceTask task = InferenceTask::pqpp;
  SamplingConfig sampling;
  /// When set, each point answer carries confidence 0.5 + 0.5u (u uniform) and
  /// is wrong with probability 1 - confidence. Otherwise answers are correct
  /// with confidence 1.
  bool noisy = false;
};

/// Answers from the sample's ground truth: PPG round 1 gives each target's
/// tight box with k groups drawn from it; PQPP round 1 gives the boxes and
/// later rounds answer the queried points against the target union. No-target
/// samples get the no-target phrase.
class GtOracleResponder final : public Responder {
 public:
  explicit GtOracleResponder(GtOracleOptions options);
  Reply respond(const RESample& sample, std::span<const Turn> turns) override;

 private:
  GtOracleOptions options_;
};

}  // namespace promptseg
