#include "mitoviz/imgproc/enhance.hpp"

#include <algorithm>
#include <cmath>

#include "mitoviz/core/error.hpp"

namespace mitoviz {
namespace {

void check_unit(double v, const char* field) {
  if (!(v >= 0.0 && v <= 1.0)) throw ValidationError(field, std::string(field) + " must lie in [0,1]");
}

}  // namespace

void EnhancementParams::validate() const {
  check_unit(brightness, "brightness");
  check_unit(contrast, "contrast");
  check_unit(translate, "translate");
}

double enhance_value(double raw, const EnhancementParams& p) {
  const double out = 2.0 * p.brightness / (1.0 + std::exp(-kContrastGain * p.contrast * (raw - p.translate)));
  return std::clamp(out, 0.0, 1.0);
}

ChannelRaster enhance(const ChannelRaster& raw, const EnhancementParams& params) {
  params.validate();
  std::vector<double> out(raw.size());
  const auto in = raw.values();
  std::transform(in.begin(), in.end(), out.begin(), [&](double v) { return enhance_value(v, params); });
  return ChannelRaster(raw.width(), raw.height(), std::move(out), raw.pixel_size_um());
}

}  // namespace mitoviz
