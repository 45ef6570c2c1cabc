#pragma once

#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "promptseg/sample.hpp"

namespace promptseg {

/// Where a split's annotations live and what benchmark they come from.
struct DatasetManifest {
  std::string name;
  SourceTag source = SourceTag::grefcoco;
  std::filesystem::path annotations;
  std::string split;
};

/// Reads a manifest. A ".jsonl" path is taken as the annotation file itself
/// (source gRefCOCO, name from the file stem); anything else must be a JSON
/// object {"name", "source", "annotations", "split"} with "annotations"
/// relative to the manifest's directory. Throws FormatError.
DatasetManifest load_manifest(const std::filesystem::path& path);

struct SkippedRecord {
  std::size_t line = 0;
  std::string reason;
};

/// Native annotation line:
///   {"id", "image_id", "width", "height", "expression",
///    "masks": [RLE | {"polygon": [...]}, ...], "no_target": bool, "source"?: str}
/// Throws FormatError on any schema or validation violation.
RESample sample_from_json(const nlohmann::json& j, SourceTag default_source);

/// Inverse of sample_from_json; masks are written as RLE.
nlohmann::json sample_to_json(const RESample& sample);

/// Streams validated samples from a manifest's JSONL file, one line at a time.
/// Records that violate the schema are skipped and reported through
/// skipped(); a line that is not JSON at all is treated as file corruption
/// and throws FormatError.
class SampleReader {
 public:
  explicit SampleReader(const DatasetManifest& manifest);

  std::optional<RESample> next();
  const std::vector<SkippedRecord>& skipped() const noexcept { return skipped_; }

 private:
  std::filesystem::path path_;
  SourceTag source_;
  std::ifstream in_;
  std::size_t line_ = 0;
  std::vector<SkippedRecord> skipped_;
};

struct LoadedDataset {
  std::vector<RESample> samples;
  std::vector<SkippedRecord> skipped;
};

LoadedDataset load_samples(const DatasetManifest& manifest);

/// A closed polygon ring in pixel coordinates; pixel (x, y) covers
/// [x, x+1) x [y, y+1).
using PolygonRing = std::vector<std::pair<double, double>>;

/// Even-odd fill of each ring sampled at pixel centres; rings are unioned.
/// Throws FormatError for rings with fewer than 3 vertices or vertices more
/// than one pixel outside the image.
BinaryMask rasterize_polygon(std::span<const PolygonRing> rings, int width, int height);

struct ImportStats {
  std::size_t written = 0;
  std::size_t skipped = 0;
};

/// Converts a COCO-style instances file plus a refs file (a JSON list of
/// {"ref_id", "image_id", "ann_id": id | [ids], "split", "sentences": [{"sent"}],
/// "no_target"?}) into native JSONL, one sample per sentence, keeping refs of
/// `split` (all refs when empty).
ImportStats import_refs(const std::filesystem::path& instances, const std::filesystem::path& refs,
                        const std::string& split, SourceTag source, std::ostream& out);

}  // namespace promptseg
