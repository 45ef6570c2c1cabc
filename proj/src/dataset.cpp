#include "promptseg/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <map>

#include "promptseg/errors.hpp"

namespace promptseg {

namespace fs = std::filesystem;

DatasetManifest load_manifest(const fs::path& path) {
  if (path.extension() == ".jsonl") {
    return {path.stem().string(), SourceTag::grefcoco, path, {}};
  }
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open manifest " + path.string());
  try {
    const auto j = nlohmann::json::parse(in);
    DatasetManifest m;
    m.name = j.value("name", path.stem().string());
    m.source = source_from_string(j.value("source", std::string("grefcoco")));
    m.split = j.value("split", std::string());
    fs::path ann = j.at("annotations").get<std::string>();
    m.annotations = ann.is_absolute() ? ann : path.parent_path() / ann;
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError("manifest " + path.string() + ": " + e.what());
  }
}

namespace {

PolygonRing ring_from_flat(const nlohmann::json& flat) {
  if (!flat.is_array() || flat.size() % 2 != 0) {
    throw FormatError("polygon ring must be a flat [x, y, ...] list");
  }
  PolygonRing ring;
  for (std::size_t i = 0; i < flat.size(); i += 2) {
    ring.emplace_back(flat[i].get<double>(), flat[i + 1].get<double>());
  }
  return ring;
}

std::vector<PolygonRing> rings_from_json(const nlohmann::json& poly) {
  std::vector<PolygonRing> rings;
  if (!poly.is_array() || poly.empty()) throw FormatError("polygon must be a non-empty list");
  if (poly.front().is_array()) {
    for (const auto& r : poly) rings.push_back(ring_from_flat(r));
  } else {
    rings.push_back(ring_from_flat(poly));
  }
  return rings;
}

BinaryMask mask_from_json(const nlohmann::json& m, int width, int height) {
  if (m.is_object() && m.contains("polygon")) {
    return rasterize_polygon(rings_from_json(m.at("polygon")), width, height);
  }
  const RleMask rle = rle_from_json(m);
  if (rle.height != height || rle.width != width) {
    throw FormatError("RLE size [" + std::to_string(rle.height) + ", " + std::to_string(rle.width) +
                      "] does not match image " + std::to_string(width) + "x" +
                      std::to_string(height));
  }
  return decode_rle(rle);
}

}  // namespace

RESample sample_from_json(const nlohmann::json& j, SourceTag default_source) {
  try {
    RESample s;
    s.id = j.at("id").get<std::string>();
    s.image_id = j.contains("image_id") ? (j.at("image_id").is_string()
                                               ? j.at("image_id").get<std::string>()
                                               : j.at("image_id").dump())
                                        : s.id;
    s.width = j.at("width").get<int>();
    s.height = j.at("height").get<int>();
    s.expression = j.at("expression").get<std::string>();
    s.source = j.contains("source") ? source_from_string(j.at("source").get<std::string>())
                                    : default_source;
    const bool no_target = j.value("no_target", false);
    const auto masks = j.value("masks", nlohmann::json::array());
    if (no_target && !masks.empty()) {
      throw FormatError("sample " + s.id + " is marked no_target but lists masks");
    }
    if (!no_target && masks.empty()) {
      throw FormatError("sample " + s.id + " has no masks and is not marked no_target");
    }
    if (s.width < 1 || s.height < 1) throw FormatError("sample " + s.id + ": bad image dims");
    for (const auto& m : masks) s.targets.push_back(mask_from_json(m, s.width, s.height));
    s.validate();
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw FormatError(std::string("schema violation: ") + e.what());
  } catch (const UsageError& e) {
    throw FormatError(e.what());
  }
}

nlohmann::json sample_to_json(const RESample& sample) {
  nlohmann::json masks = nlohmann::json::array();
  for (const auto& t : sample.targets) masks.push_back(rle_to_json(encode_rle(t)));
  return {{"id", sample.id},
          {"image_id", sample.image_id},
          {"width", sample.width},
          {"height", sample.height},
          {"expression", sample.expression},
          {"masks", std::move(masks)},
          {"no_target", sample.no_target()},
          {"source", to_string(sample.source)}};
}

SampleReader::SampleReader(const DatasetManifest& manifest)
    : path_(manifest.annotations), source_(manifest.source), in_(manifest.annotations) {
  if (!in_) throw FormatError("cannot open annotations " + path_.string());
}

std::optional<RESample> SampleReader::next() {
  std::string line;
  while (std::getline(in_, line)) {
    ++line_;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw FormatError(path_.string() + ":" + std::to_string(line_) + ": not JSON (" + e.what() +
                        ")");
    }
    try {
      return sample_from_json(j, source_);
    } catch (const FormatError& e) {
      skipped_.push_back({line_, e.what()});
    }
  }
  return std::nullopt;
}

LoadedDataset load_samples(const DatasetManifest& manifest) {
  SampleReader reader(manifest);
  LoadedDataset out;
  while (auto s = reader.next()) out.samples.push_back(std::move(*s));
  out.skipped = reader.skipped();
  return out;
}

BinaryMask rasterize_polygon(std::span<const PolygonRing> rings, int width, int height) {
  BinaryMask mask(width, height);
  for (const auto& ring : rings) {
    if (ring.size() < 3) throw FormatError("polygon ring needs at least 3 vertices");
    for (const auto& [x, y] : ring) {
      if (!(x >= -1.0 && y >= -1.0 && x <= width + 1.0 && y <= height + 1.0)) {
        throw FormatError("polygon vertex outside the image");
      }
    }
    std::vector<double> crossings;
    for (int row = 0; row < height; ++row) {
      const double cy = row + 0.5;
      crossings.clear();
      for (std::size_t i = 0; i < ring.size(); ++i) {
        const auto [x0, y0] = ring[i];
        const auto [x1, y1] = ring[(i + 1) % ring.size()];
        if ((y0 <= cy && cy < y1) || (y1 <= cy && cy < y0)) {
          crossings.push_back(x0 + (cy - y0) * (x1 - x0) / (y1 - y0));
        }
      }
      std::sort(crossings.begin(), crossings.end());
      for (std::size_t i = 0; i + 1 < crossings.size(); i += 2) {
        // Pixel centres x + 0.5 in [a, b).
        const int first = std::max(0, static_cast<int>(std::ceil(crossings[i] - 0.5)));
        const int last = std::min(width - 1, static_cast<int>(std::ceil(crossings[i + 1] - 0.5)) - 1);
        for (int x = first; x <= last; ++x) mask.set(x, row);
      }
    }
  }
  return mask;
}

namespace {

nlohmann::json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw FormatError("cannot open " + path.string());
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::parse_error& e) {
    throw FormatError(path.string() + ": " + e.what());
  }
}

std::string id_string(const nlohmann::json& v) {
  return v.is_string() ? v.get<std::string>() : v.dump();
}

}  // namespace

ImportStats import_refs(const fs::path& instances, const fs::path& refs, const std::string& split,
                        SourceTag source, std::ostream& out) {
  const auto inst = read_json(instances);
  const auto ref_list = read_json(refs);

  std::map<std::string, std::pair<int, int>> image_dims;
  for (const auto& img : inst.at("images")) {
    image_dims[id_string(img.at("id"))] = {img.at("width").get<int>(), img.at("height").get<int>()};
  }
  std::map<std::string, nlohmann::json> segmentation;
  for (const auto& ann : inst.at("annotations")) {
    segmentation[id_string(ann.at("id"))] = ann.at("segmentation");
  }

  ImportStats stats;
  for (const auto& ref : ref_list) {
    if (!split.empty() && ref.value("split", std::string()) != split) continue;
    const std::string image_id = id_string(ref.at("image_id"));
    const auto dims = image_dims.find(image_id);
    std::vector<std::string> ann_ids;
    if (ref.contains("ann_id")) {
      const auto& a = ref.at("ann_id");
      if (a.is_array()) {
        for (const auto& x : a) ann_ids.push_back(id_string(x));
      } else {
        ann_ids.push_back(id_string(a));
      }
    }
    std::erase(ann_ids, "-1");
    const bool no_target = ref.value("no_target", false) || ann_ids.empty();

    nlohmann::json masks = nlohmann::json::array();
    bool ok = dims != image_dims.end();
    for (const auto& a : ann_ids) {
      const auto seg = segmentation.find(a);
      if (!ok || seg == segmentation.end()) {
        ok = false;
        break;
      }
      if (seg->second.is_array()) {
        masks.push_back({{"polygon", seg->second}});
      } else if (seg->second.is_object() && seg->second.value("counts", nlohmann::json()).is_array()) {
        masks.push_back(seg->second);
      } else {
        ok = false;  // compressed RLE strings are not supported
      }
    }
    const auto& sentences = ref.at("sentences");
    for (std::size_t i = 0; i < sentences.size(); ++i) {
      if (!ok) {
        ++stats.skipped;
        continue;
      }
      nlohmann::json rec{{"id", id_string(ref.at("ref_id")) + "_" + std::to_string(i)},
                         {"image_id", image_id},
                         {"width", dims->second.first},
                         {"height", dims->second.second},
                         {"expression", sentences[i].at("sent").get<std::string>()},
                         {"masks", no_target ? nlohmann::json::array() : masks},
                         {"no_target", no_target},
                         {"source", to_string(source)}};
      out << rec.dump() << '\n';
      ++stats.written;
    }
  }
  return stats;
}

}  // namespace promptseg
