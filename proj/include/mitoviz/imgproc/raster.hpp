#pragma once

#include <algorithm>
#include <cstdint>
#include <span>
#include <vector>

namespace mitoviz {

inline constexpr double kDefaultPixelSizeUm = 0.21;

// All connected-component work in the project uses this neighbourhood.
inline constexpr int kConnectivity = 4;

using PixelIndex = std::uint32_t;

struct Point {
  int x = 0;
  int y = 0;
  friend bool operator==(const Point&, const Point&) = default;
};

struct Rect {
  int x = 0;
  int y = 0;
  int w = 0;
  int h = 0;

  int area() const { return w * h; }
  int right() const { return x + w; }
  int bottom() const { return y + h; }
  bool empty() const { return w <= 0 || h <= 0; }
  bool contains(int px, int py) const { return px >= x && px < x + w && py >= y && py < y + h; }

  // Positive-area intersection; rectangles sharing only an edge do not overlap.
  bool overlaps(const Rect& o) const {
    return x < o.right() && o.x < right() && y < o.bottom() && o.y < bottom();
  }

  Rect united(const Rect& o) const {
    const int nx = std::min(x, o.x);
    const int ny = std::min(y, o.y);
    return {nx, ny, std::max(right(), o.right()) - nx, std::max(bottom(), o.bottom()) - ny};
  }

  friend bool operator==(const Rect&, const Rect&) = default;
};

// Grid geometry shared by every raster type.
struct Extent {
  int width = 0;
  int height = 0;

  std::size_t size() const { return static_cast<std::size_t>(width) * static_cast<std::size_t>(height); }
  bool in_bounds(int x, int y) const { return x >= 0 && y >= 0 && x < width && y < height; }
  PixelIndex index(int x, int y) const { return static_cast<PixelIndex>(y) * width + x; }
  Point point(PixelIndex i) const { return {static_cast<int>(i % width), static_cast<int>(i / width)}; }

  friend bool operator==(const Extent&, const Extent&) = default;
};

// One fluorescence channel, intensities normalized to [0, 1], row-major.
class ChannelRaster {
 public:
  ChannelRaster() = default;
  ChannelRaster(int width, int height, double fill = 0.0, double pixel_size_um = kDefaultPixelSizeUm);
  ChannelRaster(int width, int height, std::vector<double> values,
                double pixel_size_um = kDefaultPixelSizeUm);

  int width() const { return extent_.width; }
  int height() const { return extent_.height; }
  const Extent& extent() const { return extent_; }
  std::size_t size() const { return values_.size(); }
  double pixel_size_um() const { return pixel_size_um_; }
  void set_pixel_size_um(double s);

  std::span<const double> values() const { return values_; }
  double operator[](std::size_t i) const { return values_[i]; }
  double at(int x, int y) const { return values_[extent_.index(x, y)]; }

  // Throws ValidationError if v is outside [0, 1].
  void set(std::size_t i, double v);

  friend bool operator==(const ChannelRaster&, const ChannelRaster&) = default;

 private:
  Extent extent_;
  double pixel_size_um_ = kDefaultPixelSizeUm;
  std::vector<double> values_;
};

struct BinaryMask {
  Extent extent;
  std::vector<std::uint8_t> bits;

  BinaryMask() = default;
  BinaryMask(int width, int height) : extent{width, height}, bits(extent.size(), 0) {}

  int width() const { return extent.width; }
  int height() const { return extent.height; }
  bool operator[](std::size_t i) const { return bits[i] != 0; }
  std::size_t count() const;

  friend bool operator==(const BinaryMask&, const BinaryMask&) = default;
};

// Sorted, duplicate-free set of linear pixel indices into a raster of known extent.
class PixelSet {
 public:
  PixelSet() = default;
  explicit PixelSet(Extent extent) : extent_(extent) {}
  // Sorts and deduplicates; throws ValidationError on out-of-range indices.
  PixelSet(Extent extent, std::vector<PixelIndex> indices);

  static PixelSet from_sorted(Extent extent, std::vector<PixelIndex> sorted_unique);
  static PixelSet from_mask(const BinaryMask& mask);

  const Extent& extent() const { return extent_; }
  std::span<const PixelIndex> indices() const { return indices_; }
  std::size_t size() const { return indices_.size(); }
  bool empty() const { return indices_.empty(); }
  bool contains(PixelIndex i) const { return std::binary_search(indices_.begin(), indices_.end(), i); }
  auto begin() const { return indices_.begin(); }
  auto end() const { return indices_.end(); }

  // Tight bounding rectangle; empty rect for the empty set.
  Rect bbox() const;
  BinaryMask to_mask() const;

  friend bool operator==(const PixelSet&, const PixelSet&) = default;

 private:
  Extent extent_;
  std::vector<PixelIndex> indices_;
};

std::size_t intersection_size(const PixelSet& a, const PixelSet& b);
PixelSet set_union(const PixelSet& a, const PixelSet& b);
PixelSet set_intersection(const PixelSet& a, const PixelSet& b);
PixelSet set_difference(const PixelSet& a, const PixelSet& b);

// Interleaved RGB, each channel in [0, 1].
struct RgbRaster {
  Extent extent;
  std::vector<double> rgb;

  RgbRaster() = default;
  RgbRaster(int width, int height) : extent{width, height}, rgb(extent.size() * 3, 0.0) {}
  int width() const { return extent.width; }
  int height() const { return extent.height; }
};

}  // namespace mitoviz
