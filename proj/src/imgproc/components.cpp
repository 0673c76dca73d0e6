#include "mitoviz/imgproc/components.hpp"

#include <string>

#include "mitoviz/core/error.hpp"

namespace mitoviz {
namespace {

template <class Qualifies>
std::vector<PixelSet> label_all(const Extent& extent, Qualifies&& qualifies) {
  // Scanning in index order and flooding from each unvisited foreground pixel
  // yields components ordered by their smallest index.
  std::vector<std::uint8_t> seen(extent.size(), 0);
  std::vector<PixelIndex> stack;
  std::vector<PixelSet> out;
  for (PixelIndex s = 0; s < extent.size(); ++s) {
    if (seen[s] || !qualifies(s)) continue;
    std::vector<PixelIndex> comp;
    seen[s] = 1;
    stack.push_back(s);
    while (!stack.empty()) {
      const PixelIndex i = stack.back();
      stack.pop_back();
      comp.push_back(i);
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
    std::sort(comp.begin(), comp.end());
    out.push_back(PixelSet::from_sorted(extent, std::move(comp)));
  }
  return out;
}

}  // namespace

PixelSet connected_component(const ChannelRaster& raster, PixelIndex seed, Threshold kind, double sigma) {
  if (seed >= raster.size()) {
    throw ValidationError("seed", "seed index " + std::to_string(seed) + " outside raster");
  }
  const PixelIndex seeds[] = {seed};
  return connected_region(raster, seeds, kind, sigma);
}

PixelSet connected_region(const ChannelRaster& raster, std::span<const PixelIndex> seeds, Threshold kind,
                          double sigma) {
  for (PixelIndex s : seeds) {
    if (s >= raster.size()) throw ValidationError("seed", "seed index " + std::to_string(s) + " outside raster");
  }
  const auto v = raster.values();
  auto idx = flood_fill(raster.extent(), seeds, [&](PixelIndex i) { return passes(v[i], kind, sigma); });
  return PixelSet::from_sorted(raster.extent(), std::move(idx));
}

std::vector<PixelSet> label_components(const ChannelRaster& raster, double sigma) {
  const auto v = raster.values();
  return label_all(raster.extent(), [&](PixelIndex i) { return v[i] >= sigma; });
}

std::vector<PixelSet> label_components(const BinaryMask& mask) {
  return label_all(mask.extent, [&](PixelIndex i) { return mask.bits[i] != 0; });
}

}  // namespace mitoviz
