#include "promptseg/sample.hpp"

#include <string>

#include "promptseg/errors.hpp"

namespace promptseg {

const char* to_string(SourceTag tag) noexcept {
  switch (tag) {
    case SourceTag::refcoco: return "refcoco";
    case SourceTag::refcoco_plus: return "refcoco+";
    case SourceTag::refcocog: return "refcocog";
    case SourceTag::grefcoco: return "grefcoco";
  }
  return "unknown";
}

SourceTag source_from_string(std::string_view s) {
  if (s == "refcoco") return SourceTag::refcoco;
  if (s == "refcoco+") return SourceTag::refcoco_plus;
  if (s == "refcocog") return SourceTag::refcocog;
  if (s == "grefcoco") return SourceTag::grefcoco;
  throw FormatError("unknown dataset source \"" + std::string(s) + "\"");
}

std::optional<BinaryMask> RESample::target_union() const {
  if (targets.empty()) return std::nullopt;
  BinaryMask u = targets.front();
  for (std::size_t i = 1; i < targets.size(); ++i) u |= targets[i];
  return u;
}

void RESample::validate() const {
  if (width < 1 || height < 1) throw FormatError("sample " + id + ": image dims must be positive");
  for (const auto& t : targets) {
    if (t.width() != width || t.height() != height) {
      throw FormatError("sample " + id + ": target mask is " + std::to_string(t.width()) + "x" +
                        std::to_string(t.height()) + ", image is " + std::to_string(width) + "x" +
                        std::to_string(height));
    }
    if (t.empty()) throw FormatError("sample " + id + ": target mask is empty");
  }
  if (single_target(source) && targets.size() != 1) {
    throw FormatError("sample " + id + ": " + to_string(source) + " samples need exactly 1 target");
  }
}

}  // namespace promptseg
