#include "mitoviz/mito/scoring.hpp"

#include <algorithm>

#include "mitoviz/core/error.hpp"
#include "mitoviz/imgproc/components.hpp"

namespace mitoviz {

double dice(const PixelSet& a, const PixelSet& b) {
  const std::size_t denom = a.size() + b.size();
  if (denom == 0) return 0.0;
  return 2.0 * static_cast<double>(intersection_size(a, b)) / static_cast<double>(denom);
}

PixelSet high_signal_neighbourhood(const MitoObject& obj, const ChannelRaster& mito, double sigma_m) {
  if (obj.pixels.extent() != mito.extent()) throw ValidationError("extent", "object and channel differ in size");
  return connected_region(mito, obj.pixels.indices(), Threshold::AtOrAbove, sigma_m);
}

double object_error(const MitoObject& obj, const ChannelRaster& mito, double sigma_m) {
  const PixelSet n = high_signal_neighbourhood(obj, mito, sigma_m);
  if (n.empty()) return 1.0;
  return 1.0 - dice(obj.pixels, n);
}

std::vector<BackgroundRegion> background_error(const ChannelRaster& mito, double sigma_m, const MitoState& state) {
  if (state.extent != mito.extent()) throw ValidationError("extent", "object state and channel differ in size");
  const BinaryMask occupied = state.foreground();
  std::vector<BackgroundRegion> out;
  for (auto& comp : label_components(mito, sigma_m)) {
    bool touches = false;
    for (PixelIndex i : comp) {
      if (occupied.bits[i]) {
        touches = true;
        break;
      }
    }
    out.push_back({std::move(comp), touches ? 0.0 : 1.0});
  }
  return out;
}

std::vector<CandidateBox> error_candidates(const MitoState& state, const ChannelRaster& mito, double sigma_m,
                                           double sigma_e) {
  std::vector<CandidateBox> out;
  for (const auto& obj : state.objects) {
    const double e = object_error(obj, mito, sigma_m);
    if (e > sigma_e) out.push_back({obj.bbox, CandidateKind::MitoObjectError, e, false});
  }
  for (const auto& region : background_error(mito, sigma_m, state)) {
    if (region.score > sigma_e) {
      out.push_back({region.pixels.bbox(), CandidateKind::MitoBackgroundError, region.score, false});
    }
  }
  return out;
}

double mask_agreement(const BinaryMask& a, const BinaryMask& b) {
  if (!(a.extent == b.extent)) throw ValidationError("mask", "masks differ in size");
  if (a.bits.empty()) return 1.0;
  std::size_t same = 0;
  for (std::size_t i = 0; i < a.bits.size(); ++i) same += a[i] == b[i];
  return static_cast<double>(same) / static_cast<double>(a.bits.size());
}

DetectionScore detection_score(const MitoState& predicted, const std::vector<PixelSet>& truth, double min_iou) {
  if (!(min_iou > 0.0 && min_iou <= 1.0)) throw ValidationError("min_iou", "must be in (0, 1]");
  DetectionScore s;
  s.predicted = predicted.objects.size();
  s.truth = truth.size();
  struct Pair {
    double iou;
    std::size_t p, t;
  };
  std::vector<Pair> pairs;
  for (std::size_t p = 0; p < predicted.objects.size(); ++p) {
    const PixelSet& a = predicted.objects[p].pixels;
    for (std::size_t t = 0; t < truth.size(); ++t) {
      const std::size_t inter = intersection_size(a, truth[t]);
      if (inter == 0) continue;
      const double iou = static_cast<double>(inter) / static_cast<double>(a.size() + truth[t].size() - inter);
      if (iou >= min_iou) pairs.push_back({iou, p, t});
    }
  }
  std::sort(pairs.begin(), pairs.end(), [](const Pair& x, const Pair& y) {
    if (x.iou != y.iou) return x.iou > y.iou;
    return x.p != y.p ? x.p < y.p : x.t < y.t;
  });
  std::vector<bool> used_p(s.predicted, false), used_t(s.truth, false);
  for (const Pair& pr : pairs) {
    if (used_p[pr.p] || used_t[pr.t]) continue;
    used_p[pr.p] = used_t[pr.t] = true;
    ++s.matched;
  }
  if (s.predicted > 0) s.precision = static_cast<double>(s.matched) / static_cast<double>(s.predicted);
  if (s.truth > 0) s.recall = static_cast<double>(s.matched) / static_cast<double>(s.truth);
  return s;
}

}  // namespace mitoviz
