#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <json.hpp>

namespace promptseg {

/// Dense binary pixel grid, row-major. Pixel (x, y) is column x of row y.
class BinaryMask {
 public:
  /// All-off mask. Throws UsageError unless width, height >= 1.
  BinaryMask(int width, int height);
  /// Takes ownership of a row-major grid; bits.size() must equal width*height.
  BinaryMask(int width, int height, std::vector<std::uint8_t> bits);

  int width() const noexcept { return width_; }
  int height() const noexcept { return height_; }

  /// Unchecked lookup; use point_in_mask() for the bounds-checked form.
  bool at(int x, int y) const noexcept {
    return bits_[static_cast<std::size_t>(y) * width_ + x] != 0;
  }
  void set(int x, int y, bool on = true) noexcept {
    bits_[static_cast<std::size_t>(y) * width_ + x] = on ? 1 : 0;
  }
  bool contains(int x, int y) const noexcept {
    return x >= 0 && y >= 0 && x < width_ && y < height_;
  }

  std::size_t area() const noexcept;
  bool empty() const noexcept { return area() == 0; }
  std::span<const std::uint8_t> bits() const noexcept { return bits_; }

  /// In-place union / intersection with a same-sized mask.
  BinaryMask& operator|=(const BinaryMask& other);
  BinaryMask& operator&=(const BinaryMask& other);

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;

 private:
  int width_;
  int height_;
  std::vector<std::uint8_t> bits_;
};

/// Column-major run-length encoding. counts alternate background/foreground
/// runs and always start with a (possibly zero) background run.
struct RleMask {
  int height = 0;
  int width = 0;
  std::vector<std::uint64_t> counts;

  /// Throws FormatError if the counts do not describe a height x width grid.
  void validate() const;

  friend bool operator==(const RleMask&, const RleMask&) = default;
};

BinaryMask decode_rle(const RleMask& rle);
RleMask encode_rle(const BinaryMask& mask);

/// {"size": [h, w], "counts": [...]}
nlohmann::json rle_to_json(const RleMask& rle);
/// Inverse of rle_to_json; throws FormatError on shape violations. Does not
/// check the count sum (decode_rle/validate do).
RleMask rle_from_json(const nlohmann::json& j);

/// Axis-aligned box with inclusive pixel corners.
struct BBox {
  int x1 = 0;
  int y1 = 0;
  int x2 = 0;
  int y2 = 0;

  int width() const noexcept { return x2 - x1 + 1; }
  int height() const noexcept { return y2 - y1 + 1; }
  std::size_t area() const noexcept {
    return static_cast<std::size_t>(width()) * static_cast<std::size_t>(height());
  }
  bool contains(int x, int y) const noexcept {
    return x >= x1 && x <= x2 && y >= y1 && y <= y2;
  }
  /// True when 0 <= x1 <= x2 < width and 0 <= y1 <= y2 < height.
  bool fits(int image_width, int image_height) const noexcept;

  friend bool operator==(const BBox&, const BBox&) = default;
};

struct Point {
  int x = 0;
  int y = 0;
  friend bool operator==(const Point&, const Point&) = default;
};

enum class PointLabel : std::uint8_t { negative = 0, positive = 1 };

struct LabeledPoint {
  int x = 0;
  int y = 0;
  PointLabel label = PointLabel::positive;

  Point point() const noexcept { return {x, y}; }
  bool positive() const noexcept { return label == PointLabel::positive; }
  friend bool operator==(const LabeledPoint&, const LabeledPoint&) = default;
};

/// Minimal box holding every on-pixel; nullopt for an empty mask.
std::optional<BBox> tight_bbox(const BinaryMask& mask);

struct Overlap {
  std::uint64_t intersection = 0;
  std::uint64_t union_ = 0;
};

/// Pixel counts of a&b and a|b. Throws UsageError on dimension mismatch.
Overlap overlap(const BinaryMask& a, const BinaryMask& b);

/// |a&b| / |a|b|; 1.0 when both are empty.
double iou(const BinaryMask& a, const BinaryMask& b);

/// Bounds-checked membership test; throws UsageError outside the image.
bool point_in_mask(const BinaryMask& mask, int x, int y);

/// Number of discrete coordinate bins per axis used in text prompts.
inline constexpr int kCoordBins = 1000;

/// floor(v * bins / extent). Throws UsageError unless 0 <= v < extent.
int normalize_coord(int v, int extent, int bins = kCoordBins);

/// Center pixel of bin `code`. For extent < bins some bins hold no pixel; those
/// map to the first pixel of the next non-empty bin (clamped to the image).
int denormalize_coord(int code, int extent, int bins = kCoordBins);

/// denormalize(normalize(v)): the pixel a coordinate lands on after a trip
/// through the text encoding.
int quantize_coord(int v, int extent, int bins = kCoordBins);

/// True when v survives the text encoding unchanged.
bool representable_coord(int v, int extent, int bins = kCoordBins);

}  // namespace promptseg
