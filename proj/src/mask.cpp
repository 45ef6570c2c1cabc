#include "promptseg/mask.hpp"

#include <algorithm>
#include <numeric>
#include <string>

#include "promptseg/errors.hpp"

namespace promptseg {

namespace {

void require_dims(int width, int height) {
  if (width < 1 || height < 1) {
    throw UsageError("mask dimensions must be positive, got " + std::to_string(width) + "x" +
                     std::to_string(height));
  }
}

void require_same_dims(const BinaryMask& a, const BinaryMask& b) {
  if (a.width() != b.width() || a.height() != b.height()) {
    throw UsageError("mask dimension mismatch: " + std::to_string(a.width()) + "x" +
                     std::to_string(a.height()) + " vs " + std::to_string(b.width()) + "x" +
                     std::to_string(b.height()));
  }
}

}  // namespace

BinaryMask::BinaryMask(int width, int height) : width_(width), height_(height) {
  require_dims(width, height);
  bits_.assign(static_cast<std::size_t>(width) * static_cast<std::size_t>(height), 0);
}

BinaryMask::BinaryMask(int width, int height, std::vector<std::uint8_t> bits)
    : width_(width), height_(height), bits_(std::move(bits)) {
  require_dims(width, height);
  if (bits_.size() != static_cast<std::size_t>(width) * static_cast<std::size_t>(height)) {
    throw UsageError("mask grid has " + std::to_string(bits_.size()) + " cells, expected " +
                     std::to_string(static_cast<std::size_t>(width) * height));
  }
  for (auto& b : bits_) b = b ? 1 : 0;
}

std::size_t BinaryMask::area() const noexcept {
  return static_cast<std::size_t>(std::count(bits_.begin(), bits_.end(), std::uint8_t{1}));
}

BinaryMask& BinaryMask::operator|=(const BinaryMask& other) {
  require_same_dims(*this, other);
  for (std::size_t i = 0; i < bits_.size(); ++i) bits_[i] |= other.bits_[i];
  return *this;
}

BinaryMask& BinaryMask::operator&=(const BinaryMask& other) {
  require_same_dims(*this, other);
  for (std::size_t i = 0; i < bits_.size(); ++i) bits_[i] &= other.bits_[i];
  return *this;
}

void RleMask::validate() const {
  if (height < 1 || width < 1) {
    throw FormatError("RLE size must be positive, got [" + std::to_string(height) + ", " +
                      std::to_string(width) + "]");
  }
  for (std::size_t i = 1; i < counts.size(); ++i) {
    if (counts[i] == 0) {
      throw FormatError("RLE run " + std::to_string(i) + " is zero; only the first run may be 0");
    }
  }
  const std::uint64_t total = std::accumulate(counts.begin(), counts.end(), std::uint64_t{0});
  const std::uint64_t expected = static_cast<std::uint64_t>(height) * static_cast<std::uint64_t>(width);
  if (total != expected) {
    throw FormatError("RLE counts sum to " + std::to_string(total) + ", expected h*w = " +
                      std::to_string(expected));
  }
}

BinaryMask decode_rle(const RleMask& rle) {
  rle.validate();
  BinaryMask mask(rle.width, rle.height);
  std::uint64_t pos = 0;
  bool on = false;
  for (const std::uint64_t run : rle.counts) {
    if (on) {
      for (std::uint64_t i = pos; i < pos + run; ++i) {
        const int x = static_cast<int>(i / rle.height);
        const int y = static_cast<int>(i % rle.height);
        mask.set(x, y);
      }
    }
    pos += run;
    on = !on;
  }
  return mask;
}

RleMask encode_rle(const BinaryMask& mask) {
  RleMask rle{mask.height(), mask.width(), {}};
  bool current = false;
  std::uint64_t run = 0;
  for (int x = 0; x < mask.width(); ++x) {
    for (int y = 0; y < mask.height(); ++y) {
      const bool on = mask.at(x, y);
      if (on != current) {
        rle.counts.push_back(run);
        run = 0;
        current = on;
      }
      ++run;
    }
  }
  rle.counts.push_back(run);
  return rle;
}

nlohmann::json rle_to_json(const RleMask& rle) {
  return {{"size", {rle.height, rle.width}}, {"counts", rle.counts}};
}

RleMask rle_from_json(const nlohmann::json& j) {
  if (!j.is_object() || !j.contains("size") || !j.contains("counts")) {
    throw FormatError("RLE object needs \"size\" and \"counts\"");
  }
  const auto& size = j.at("size");
  if (!size.is_array() || size.size() != 2 || !size[0].is_number_integer() ||
      !size[1].is_number_integer()) {
    throw FormatError("RLE \"size\" must be [h, w]");
  }
  const auto& counts = j.at("counts");
  if (!counts.is_array()) throw FormatError("RLE \"counts\" must be an integer array");
  RleMask rle;
  rle.height = size[0].get<int>();
  rle.width = size[1].get<int>();
  rle.counts.reserve(counts.size());
  for (const auto& c : counts) {
    if (!c.is_number_integer() || c.get<std::int64_t>() < 0) {
      throw FormatError("RLE counts must be non-negative integers");
    }
    rle.counts.push_back(c.get<std::uint64_t>());
  }
  return rle;
}

bool BBox::fits(int image_width, int image_height) const noexcept {
  return 0 <= x1 && x1 <= x2 && x2 < image_width && 0 <= y1 && y1 <= y2 && y2 < image_height;
}

std::optional<BBox> tight_bbox(const BinaryMask& mask) {
  int x1 = mask.width(), y1 = mask.height(), x2 = -1, y2 = -1;
  for (int y = 0; y < mask.height(); ++y) {
    for (int x = 0; x < mask.width(); ++x) {
      if (!mask.at(x, y)) continue;
      x1 = std::min(x1, x);
      x2 = std::max(x2, x);
      y1 = std::min(y1, y);
      y2 = std::max(y2, y);
    }
  }
  if (x2 < 0) return std::nullopt;
  return BBox{x1, y1, x2, y2};
}

Overlap overlap(const BinaryMask& a, const BinaryMask& b) {
  require_same_dims(a, b);
  Overlap o;
  const auto ab = a.bits();
  const auto bb = b.bits();
  for (std::size_t i = 0; i < ab.size(); ++i) {
    o.intersection += ab[i] & bb[i];
    o.union_ += ab[i] | bb[i];
  }
  return o;
}

double iou(const BinaryMask& a, const BinaryMask& b) {
  const Overlap o = overlap(a, b);
  if (o.union_ == 0) return 1.0;
  return static_cast<double>(o.intersection) / static_cast<double>(o.union_);
}

bool point_in_mask(const BinaryMask& mask, int x, int y) {
  if (!mask.contains(x, y)) {
    throw UsageError("point (" + std::to_string(x) + "," + std::to_string(y) +
                     ") outside " + std::to_string(mask.width()) + "x" +
                     std::to_string(mask.height()) + " mask");
  }
  return mask.at(x, y);
}

int normalize_coord(int v, int extent, int bins) {
  if (extent < 1 || v < 0 || v >= extent) {
    throw UsageError("coordinate " + std::to_string(v) + " outside [0, " +
                     std::to_string(extent) + ")");
  }
  return static_cast<int>(static_cast<std::int64_t>(v) * bins / extent);
}

int denormalize_coord(int code, int extent, int bins) {
  if (extent < 1 || code < 0 || code >= bins) {
    throw UsageError("coordinate code " + std::to_string(code) + " outside [0, " +
                     std::to_string(bins) + ")");
  }
  // Pixels v with floor(v*bins/extent) == code are [ceil(code*e/bins), ceil((code+1)*e/bins)).
  const auto ceil_div = [](std::int64_t a, std::int64_t b) { return (a + b - 1) / b; };
  const std::int64_t lo = ceil_div(static_cast<std::int64_t>(code) * extent, bins);
  const std::int64_t hi = ceil_div(static_cast<std::int64_t>(code + 1) * extent, bins) - 1;
  const std::int64_t v = lo <= hi ? (lo + hi) / 2 : lo;
  return static_cast<int>(std::min<std::int64_t>(v, extent - 1));
}

int quantize_coord(int v, int extent, int bins) {
  return denormalize_coord(normalize_coord(v, extent, bins), extent, bins);
}

bool representable_coord(int v, int extent, int bins) {
  return quantize_coord(v, extent, bins) == v;
}

}  // namespace promptseg
