#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>

#include "mitoviz/imgproc/raster.hpp"

namespace mitoviz {

enum class Colormap { Gray, Yellow, Red, Green, Cyan, Magenta, Categorical };

std::string to_string(Colormap c);
// Throws ValidationError for unknown names.
Colormap colormap_from_string(const std::string& s);

using Rgb = std::array<double, 3>;

// Continuous ramp from black to the map's colour. Categorical maps fall back to gray.
Rgb ramp_color(Colormap map, double v);
// Colour of a label code; code 0 is never drawn.
Rgb category_color(Colormap map, std::uint32_t code);

struct LayerSpec {
  double opacity = 1.0;
  Colormap colormap = Colormap::Gray;
  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

// Layers composite back to front in this order.
enum class Layer : std::size_t { Venus = 0, Mito = 1, Structure = 2, Objects = 3 };

struct BlendSpec {
  std::array<LayerSpec, 4> layers{{
      {1.0, Colormap::Yellow},
      {0.6, Colormap::Red},
      {0.3, Colormap::Categorical},
      {0.0, Colormap::Categorical},
  }};

  LayerSpec& operator[](Layer l) { return layers[static_cast<std::size_t>(l)]; }
  const LayerSpec& operator[](Layer l) const { return layers[static_cast<std::size_t>(l)]; }
  void validate() const;
  friend bool operator==(const BlendSpec&, const BlendSpec&) = default;
};

// Any layer may be absent (null pointer or empty span); present layers must
// share the extent.
struct BlendLayers {
  Extent extent;
  const ChannelRaster* venus = nullptr;
  const ChannelRaster* mito = nullptr;
  std::span<const std::uint8_t> structure;
  std::span<const std::uint32_t> objects;
};

// Alpha compositing over a black background. The two label layers are
// transparent where the code is 0. Restricted to viewport when given.
RgbRaster blend(const BlendLayers& layers, const BlendSpec& spec, std::optional<Rect> viewport = std::nullopt);

}  // namespace mitoviz
