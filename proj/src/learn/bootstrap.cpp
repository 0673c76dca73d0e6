#include "mitoviz/learn/bootstrap.hpp"

#include <algorithm>
#include <array>
#include <cmath>

#include "mitoviz/core/error.hpp"
#include "mitoviz/core/rng.hpp"
#include "mitoviz/imgproc/distance.hpp"

namespace mitoviz {

namespace {

// Radius of the largest inscribed disc covering each foreground pixel.
std::vector<double> local_radius(const BinaryMask& fg) {
  const Extent e = fg.extent;
  const double cap = std::hypot(e.width, e.height);
  std::vector<double> dt = squared_distance_to_background(fg);
  for (double& d : dt) d = std::min(std::sqrt(d), cap);
  std::vector<double> out(e.size(), 0.0);
  for (int y = 0; y < e.height; ++y) {
    for (int x = 0; x < e.width; ++x) {
      const double r = dt[e.index(x, y)];
      if (r <= 0.0) continue;
      const int reach = static_cast<int>(std::ceil(r));
      for (int dy = -reach; dy <= reach; ++dy) {
        for (int dx = -reach; dx <= reach; ++dx) {
          if (dx * dx + dy * dy >= r * r || !e.in_bounds(x + dx, y + dy)) continue;
          double& o = out[e.index(x + dx, y + dy)];
          o = std::max(o, r);
        }
      }
    }
  }
  return out;
}

bool is_blank(const ChannelRaster& c) {
  const auto [lo, hi] = std::minmax_element(c.values().begin(), c.values().end());
  return c.size() == 0 || *hi - *lo < 1e-9;
}

ClassifierModel train_on(const ChannelRaster& channel, const TrainSignal& signal, const TrainConfig& config,
                         std::uint64_t seed, std::vector<std::uint8_t>& labels) {
  const FeatureStack features = extract_features(channel);
  ClassifierModel model = ClassifierModel::he_uniform(features.planes(), signal.classes, seed);
  if (signal.masked_count() > 0) model = finetune(model, features, signal, config).model;
  labels = predict(model, features).labels;
  return model;
}

TrainSignal full_mask_signal(const Extent& e, int classes, std::vector<std::uint8_t> labels) {
  TrainSignal s(e, classes, labels);
  for (std::size_t i = 0; i < e.size(); ++i) s.mark(static_cast<PixelIndex>(i), labels[i]);
  return s;
}

// Marks a random subset of the background candidates as class 0, about
// background_ratio per positive seed.
void mark_background(TrainSignal& s, const std::vector<PixelIndex>& candidates, std::size_t positives,
                     const BootstrapOptions& o) {
  const double keep = candidates.empty() ? 0.0
                                         : std::min(1.0, o.background_ratio * static_cast<double>(positives) /
                                                             static_cast<double>(candidates.size()));
  SplitMix64 rng(o.seed);
  for (PixelIndex i : candidates)
    if (rng.uniform() < keep) s.mark(i, 0);
}

}  // namespace

double otsu_threshold(std::span<const double> values) {
  if (values.empty()) return 1.0;
  std::array<double, 256> hist{};
  for (double v : values) hist[std::clamp(static_cast<int>(v * 256.0), 0, 255)] += 1.0;
  const double total = static_cast<double>(values.size());
  double sum_all = 0.0;
  for (int k = 0; k < 256; ++k) sum_all += k * hist[k];
  double w0 = 0.0, sum0 = 0.0, best = -1.0;
  int best_k = 255;
  for (int k = 0; k < 255; ++k) {
    w0 += hist[k];
    sum0 += k * hist[k];
    const double w1 = total - w0;
    if (w0 == 0.0 || w1 == 0.0) continue;
    const double m0 = sum0 / w0, m1 = (sum_all - sum0) / w1;
    const double between = w0 * w1 * (m0 - m1) * (m0 - m1);
    if (between > best) {
      best = between;
      best_k = k;
    }
  }
  return (best_k + 1) / 256.0;
}

TrainSignal structure_scribbles(const ChannelRaster& venus, const BootstrapOptions& o) {
  const Extent e = venus.extent();
  const double t = otsu_threshold(venus.values());
  BinaryMask fg(e.width, e.height);
  for (std::size_t i = 0; i < e.size(); ++i) fg.bits[i] = venus[i] > t;
  const std::vector<double> radius = local_radius(fg);

  const double mid = 0.5 * (o.axon_max_radius + o.dendrite_min_radius);
  std::vector<std::uint8_t> labels(e.size(), 0);
  for (std::size_t i = 0; i < e.size(); ++i) {
    if (!fg.bits[i]) continue;
    const double r = radius[i];
    labels[i] = static_cast<std::uint8_t>(r >= o.cell_body_min_radius ? StructureClass::CellBody
                                          : r >= mid                  ? StructureClass::Dendrite
                                                                      : StructureClass::Axon);
  }
  TrainSignal s(e, kStructureClassCount, labels);
  std::vector<PixelIndex> dim;
  for (std::size_t i = 0; i < e.size(); ++i) {
    const auto pi = static_cast<PixelIndex>(i);
    if (!fg.bits[i]) {
      if (venus[i] < o.background_fraction * t) dim.push_back(pi);
      continue;
    }
    const double r = radius[i];
    if (r >= o.dendrite_min_radius || r <= o.axon_max_radius) s.mark(pi, labels[i]);
  }
  mark_background(s, dim, s.masked_count(), o);
  return s;
}

TrainSignal mito_scribbles(const ChannelRaster& mito, const BootstrapOptions& o) {
  const Extent e = mito.extent();
  const double t = otsu_threshold(mito.values());
  std::vector<std::uint8_t> labels(e.size(), 0);
  for (std::size_t i = 0; i < e.size(); ++i) labels[i] = mito[i] > t ? 1 : 0;
  TrainSignal s(e, 2, labels);
  std::vector<PixelIndex> dim;
  for (std::size_t i = 0; i < e.size(); ++i) {
    const auto pi = static_cast<PixelIndex>(i);
    if (labels[i]) {
      s.mark(pi, 1);
    } else if (mito[i] < o.background_fraction * t) {
      dim.push_back(pi);
    }
  }
  mark_background(s, dim, s.masked_count(), o);
  return s;
}

BootstrapResult bootstrap_initial(const ChannelRaster& venus, const ChannelRaster& mito, const BootstrapOptions& o,
                                  const std::optional<StructureLabelRaster>& imported_labels,
                                  const std::optional<BinaryMask>& imported_mito) {
  const Extent e = venus.extent();
  if (!(mito.extent() == e)) throw ValidationError("mito", "channel dimensions differ");
  if (imported_labels && !(imported_labels->extent() == e)) throw ValidationError("labels", "label dimensions differ");
  if (imported_mito && !(imported_mito->extent == e)) throw ValidationError("mito", "mask dimensions differ");
  o.train.validate();

  BootstrapResult out;
  std::vector<std::uint8_t> labels;
  if (imported_labels) {
    std::vector<std::uint8_t> codes(imported_labels->codes().begin(), imported_labels->codes().end());
    out.structure_model = train_on(venus, full_mask_signal(e, kStructureClassCount, codes), o.train, o.seed, labels);
    out.labels = *imported_labels;
  } else if (is_blank(venus)) {
    out.structure_model = ClassifierModel::he_uniform(kFeaturePlanes, kStructureClassCount, o.seed);
    out.labels = StructureLabelRaster(e.width, e.height);
  } else {
    const ChannelRaster enhanced = enhance(venus, o.venus_enhancement);
    out.structure_model = train_on(venus, structure_scribbles(enhanced, o), o.train, o.seed, labels);
    out.labels = StructureLabelRaster(e.width, e.height, labels);
  }

  if (imported_mito) {
    out.mito_model = train_on(mito, full_mask_signal(e, 2, imported_mito->bits), o.train, o.seed + 1, labels);
    out.mito_foreground = *imported_mito;
  } else if (is_blank(mito)) {
    out.mito_model = ClassifierModel::he_uniform(kFeaturePlanes, 2, o.seed + 1);
    out.mito_foreground = BinaryMask(e.width, e.height);
  } else {
    const ChannelRaster enhanced = enhance(mito, o.mito_enhancement);
    out.mito_model = train_on(mito, mito_scribbles(enhanced, o), o.train, o.seed + 1, labels);
    out.mito_foreground = BinaryMask(e.width, e.height);
    out.mito_foreground.bits = std::move(labels);
  }
  return out;
}

}  // namespace mitoviz
