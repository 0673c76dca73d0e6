#include "mitoviz/imgproc/blend.hpp"

#include <algorithm>
#include <cmath>

#include "mitoviz/core/error.hpp"

namespace mitoviz {
namespace {

constexpr std::array<const char*, 7> kColormapNames = {"gray", "yellow", "red", "green", "cyan", "magenta",
                                                       "categorical"};

Rgb hue_color(double h) {
  // HSV with s = 0.75, v = 1.
  const double s = 0.75;
  const double hh = std::fmod(h, 1.0) * 6.0;
  const int sector = static_cast<int>(hh);
  const double f = hh - sector;
  const double p = 1.0 - s, q = 1.0 - s * f, t = 1.0 - s * (1.0 - f);
  switch (sector) {
    case 0: return {1.0, t, p};
    case 1: return {q, 1.0, p};
    case 2: return {p, 1.0, t};
    case 3: return {p, q, 1.0};
    case 4: return {t, p, 1.0};
    default: return {1.0, p, q};
  }
}

inline void over(double* dst, const Rgb& c, double alpha) {
  for (int k = 0; k < 3; ++k) dst[k] = (1.0 - alpha) * dst[k] + alpha * c[k];
}

}  // namespace

std::string to_string(Colormap c) { return kColormapNames[static_cast<std::size_t>(c)]; }

Colormap colormap_from_string(const std::string& s) {
  for (std::size_t i = 0; i < kColormapNames.size(); ++i) {
    if (s == kColormapNames[i]) return static_cast<Colormap>(i);
  }
  throw ValidationError("colormap", "unknown colormap '" + s + "'");
}

Rgb ramp_color(Colormap map, double v) {
  switch (map) {
    case Colormap::Yellow: return {v, v, 0.0};
    case Colormap::Red: return {v, 0.0, 0.0};
    case Colormap::Green: return {0.0, v, 0.0};
    case Colormap::Cyan: return {0.0, v, v};
    case Colormap::Magenta: return {v, 0.0, v};
    case Colormap::Gray:
    case Colormap::Categorical: return {v, v, v};
  }
  return {v, v, v};
}

Rgb category_color(Colormap map, std::uint32_t code) {
  if (map != Colormap::Categorical) return ramp_color(map, 1.0);
  switch (code) {
    case 1: return {0.2, 0.85, 0.2};
    case 2: return {0.25, 0.5, 1.0};
    case 3: return {0.9, 0.3, 0.9};
    default: break;
  }
  // Golden-ratio hue stepping spreads consecutive ids around the wheel.
  return hue_color(0.61803398874989485 * code);
}

void BlendSpec::validate() const {
  for (const auto& l : layers) {
    if (!(l.opacity >= 0.0 && l.opacity <= 1.0)) throw ValidationError("opacity", "layer opacity must lie in [0,1]");
  }
}

RgbRaster blend(const BlendLayers& in, const BlendSpec& spec, std::optional<Rect> viewport) {
  spec.validate();
  const Extent& e = in.extent;
  if (e.width < 1 || e.height < 1) throw ValidationError("extent", "blend extent must be non-empty");
  auto check = [&](bool ok, const char* what) {
    if (!ok) throw ValidationError(what, std::string("layer '") + what + "' does not match the blend extent");
  };
  if (in.venus) check(in.venus->extent() == e, "venus");
  if (in.mito) check(in.mito->extent() == e, "mito");
  if (!in.structure.empty()) check(in.structure.size() == e.size(), "structure");
  if (!in.objects.empty()) check(in.objects.size() == e.size(), "objects");

  Rect vp = viewport.value_or(Rect{0, 0, e.width, e.height});
  if (vp.x < 0 || vp.y < 0 || vp.w < 1 || vp.h < 1 || vp.right() > e.width || vp.bottom() > e.height) {
    throw ValidationError("viewport", "viewport must be a non-empty rectangle inside the image");
  }

  const LayerSpec& lv = spec[Layer::Venus];
  const LayerSpec& lm = spec[Layer::Mito];
  const LayerSpec& ls = spec[Layer::Structure];
  const LayerSpec& lo = spec[Layer::Objects];

  RgbRaster out(vp.w, vp.h);
  for (int y = 0; y < vp.h; ++y) {
    for (int x = 0; x < vp.w; ++x) {
      const std::size_t src = e.index(vp.x + x, vp.y + y);
      double* px = &out.rgb[(static_cast<std::size_t>(y) * vp.w + x) * 3];
      if (in.venus && lv.opacity > 0.0) over(px, ramp_color(lv.colormap, (*in.venus)[src]), lv.opacity);
      if (in.mito && lm.opacity > 0.0) over(px, ramp_color(lm.colormap, (*in.mito)[src]), lm.opacity);
      if (!in.structure.empty() && ls.opacity > 0.0 && in.structure[src] != 0) {
        over(px, category_color(ls.colormap, in.structure[src]), ls.opacity);
      }
      if (!in.objects.empty() && lo.opacity > 0.0 && in.objects[src] != 0) {
        over(px, category_color(lo.colormap, in.objects[src]), lo.opacity);
      }
      for (int k = 0; k < 3; ++k) px[k] = std::clamp(px[k], 0.0, 1.0);
    }
  }
  return out;
}

}  // namespace mitoviz
