#pragma once

#include "mitoviz/imgproc/raster.hpp"

namespace mitoviz {

// Sigmoid transfer function parameters for one channel; each in [0, 1].
struct EnhancementParams {
  double brightness = 0.5;
  double contrast = 0.1;
  double translate = 0.3;

  // Throws ValidationError naming the offending field.
  void validate() const;
  friend bool operator==(const EnhancementParams&, const EnhancementParams&) = default;
};

// Steepness multiplier applied to the contrast parameter inside the sigmoid.
inline constexpr double kContrastGain = 60.0;

// clamp(2b / (1 + exp(-60 c (v - t))), 0, 1) for a single value.
double enhance_value(double raw, const EnhancementParams& params);

ChannelRaster enhance(const ChannelRaster& raw, const EnhancementParams& params);

}  // namespace mitoviz
