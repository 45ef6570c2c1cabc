#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "promptseg/mask.hpp"

namespace promptseg {

enum class SourceTag { refcoco, refcoco_plus, refcocog, grefcoco };

const char* to_string(SourceTag tag) noexcept;
SourceTag source_from_string(std::string_view s);

/// Single-target benchmarks (everything but gRefCOCO).
inline bool single_target(SourceTag tag) noexcept { return tag != SourceTag::grefcoco; }

/// One referring expression over one image. An empty target list means the
/// expression refers to nothing in the image.
struct RESample {
  std::string id;
  std::string image_id;
  int width = 0;
  int height = 0;
  std::string expression;
  std::vector<BinaryMask> targets;
  SourceTag source = SourceTag::grefcoco;

  bool no_target() const noexcept { return targets.empty(); }

  /// Union of all targets; nullopt for a no-target sample.
  std::optional<BinaryMask> target_union() const;

  /// Throws FormatError if a target's dims differ from the image or a
  /// single-target source carries anything but one target.
  void validate() const;
};

}  // namespace promptseg
