#include "mitoviz/imgproc/raster.hpp"

#include <algorithm>
#include <cmath>
#include <iterator>
#include <string>

#include "mitoviz/core/error.hpp"

namespace mitoviz {
namespace {

void check_extent(int width, int height) {
  if (width < 1 || height < 1) {
    throw ValidationError("extent", "raster dimensions must be at least 1x1, got " +
                                        std::to_string(width) + "x" + std::to_string(height));
  }
}

void check_pixel_size(double s) {
  if (!(s > 0.0) || !std::isfinite(s)) throw ValidationError("pixel_size_um", "pixel size must be positive");
}

}  // namespace

ChannelRaster::ChannelRaster(int width, int height, double fill, double pixel_size_um)
    : extent_{width, height}, pixel_size_um_(pixel_size_um) {
  check_extent(width, height);
  check_pixel_size(pixel_size_um);
  if (!(fill >= 0.0 && fill <= 1.0)) throw ValidationError("values", "intensity outside [0,1]");
  values_.assign(extent_.size(), fill);
}

ChannelRaster::ChannelRaster(int width, int height, std::vector<double> values, double pixel_size_um)
    : extent_{width, height}, pixel_size_um_(pixel_size_um), values_(std::move(values)) {
  check_extent(width, height);
  check_pixel_size(pixel_size_um);
  if (values_.size() != extent_.size()) {
    throw ValidationError("values", "expected " + std::to_string(extent_.size()) + " values, got " +
                                        std::to_string(values_.size()));
  }
  for (double v : values_) {
    if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("values", "intensity outside [0,1]");
  }
}

void ChannelRaster::set_pixel_size_um(double s) {
  check_pixel_size(s);
  pixel_size_um_ = s;
}

void ChannelRaster::set(std::size_t i, double v) {
  if (!(v >= 0.0 && v <= 1.0)) throw ValidationError("values", "intensity outside [0,1]");
  values_.at(i) = v;
}

std::size_t BinaryMask::count() const {
  return static_cast<std::size_t>(std::count_if(bits.begin(), bits.end(), [](std::uint8_t b) { return b != 0; }));
}

PixelSet::PixelSet(Extent extent, std::vector<PixelIndex> indices) : extent_(extent), indices_(std::move(indices)) {
  std::sort(indices_.begin(), indices_.end());
  indices_.erase(std::unique(indices_.begin(), indices_.end()), indices_.end());
  if (!indices_.empty() && indices_.back() >= extent_.size()) {
    throw ValidationError("pixels", "pixel index out of range");
  }
}

PixelSet PixelSet::from_sorted(Extent extent, std::vector<PixelIndex> sorted_unique) {
  PixelSet s(extent);
  s.indices_ = std::move(sorted_unique);
  return s;
}

PixelSet PixelSet::from_mask(const BinaryMask& mask) {
  std::vector<PixelIndex> idx;
  for (std::size_t i = 0; i < mask.bits.size(); ++i) {
    if (mask.bits[i]) idx.push_back(static_cast<PixelIndex>(i));
  }
  return from_sorted(mask.extent, std::move(idx));
}

Rect PixelSet::bbox() const {
  if (indices_.empty()) return {};
  int x0 = extent_.width, y0 = extent_.height, x1 = -1, y1 = -1;
  for (PixelIndex i : indices_) {
    const Point p = extent_.point(i);
    x0 = std::min(x0, p.x);
    y0 = std::min(y0, p.y);
    x1 = std::max(x1, p.x);
    y1 = std::max(y1, p.y);
  }
  return {x0, y0, x1 - x0 + 1, y1 - y0 + 1};
}

BinaryMask PixelSet::to_mask() const {
  BinaryMask m(extent_.width, extent_.height);
  for (PixelIndex i : indices_) m.bits[i] = 1;
  return m;
}

std::size_t intersection_size(const PixelSet& a, const PixelSet& b) {
  std::size_t n = 0;
  auto i = a.begin(), j = b.begin();
  while (i != a.end() && j != b.end()) {
    if (*i < *j) {
      ++i;
    } else if (*j < *i) {
      ++j;
    } else {
      ++n;
      ++i;
      ++j;
    }
  }
  return n;
}

PixelSet set_union(const PixelSet& a, const PixelSet& b) {
  std::vector<PixelIndex> out;
  out.reserve(a.size() + b.size());
  std::set_union(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return PixelSet::from_sorted(a.empty() ? b.extent() : a.extent(), std::move(out));
}

PixelSet set_intersection(const PixelSet& a, const PixelSet& b) {
  std::vector<PixelIndex> out;
  std::set_intersection(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return PixelSet::from_sorted(a.extent(), std::move(out));
}

PixelSet set_difference(const PixelSet& a, const PixelSet& b) {
  std::vector<PixelIndex> out;
  std::set_difference(a.begin(), a.end(), b.begin(), b.end(), std::back_inserter(out));
  return PixelSet::from_sorted(a.extent(), std::move(out));
}

}  // namespace mitoviz
