#pragma once

#include <span>
#include <vector>

#include "mitoviz/imgproc/raster.hpp"

namespace mitoviz {

enum class Threshold {
  Below,     // value < sigma
  AtOrAbove  // value >= sigma
};

inline bool passes(double value, Threshold kind, double sigma) {
  return kind == Threshold::Below ? value < sigma : value >= sigma;
}

// Maximal 4-connected set of qualifying pixels reachable from each seed.
// Seeds that do not qualify contribute nothing. Result is sorted.
template <class Qualifies>
std::vector<PixelIndex> flood_fill(const Extent& extent, std::span<const PixelIndex> seeds, Qualifies&& qualifies) {
  std::vector<std::uint8_t> seen(extent.size(), 0);
  std::vector<PixelIndex> stack;
  std::vector<PixelIndex> out;
  for (PixelIndex s : seeds) {
    if (seen[s] || !qualifies(s)) continue;
    seen[s] = 1;
    stack.push_back(s);
    while (!stack.empty()) {
      const PixelIndex i = stack.back();
      stack.pop_back();
      out.push_back(i);
      const int x = static_cast<int>(i % extent.width);
      const int y = static_cast<int>(i / extent.width);
      auto visit = [&](PixelIndex n) {
        if (!seen[n] && qualifies(n)) {
          seen[n] = 1;
          stack.push_back(n);
        }
      };
      if (x > 0) visit(i - 1);
      if (x + 1 < extent.width) visit(i + 1);
      if (y > 0) visit(i - extent.width);
      if (y + 1 < extent.height) visit(i + extent.width);
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

// CC(seed, predicate): empty when the seed itself fails the predicate.
// Throws ValidationError when seed is outside the raster.
PixelSet connected_component(const ChannelRaster& raster, PixelIndex seed, Threshold kind, double sigma);

// Union of connected_component over all seeds.
PixelSet connected_region(const ChannelRaster& raster, std::span<const PixelIndex> seeds, Threshold kind,
                          double sigma);

// Partition of {value >= sigma} into 4-connected components, ordered by smallest index.
std::vector<PixelSet> label_components(const ChannelRaster& raster, double sigma);
std::vector<PixelSet> label_components(const BinaryMask& mask);

}  // namespace mitoviz
