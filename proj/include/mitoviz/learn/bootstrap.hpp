#pragma once

#include <cstdint>
#include <optional>
#include <span>

#include "mitoviz/imgproc/enhance.hpp"
#include "mitoviz/imgproc/raster.hpp"
#include "mitoviz/learn/training.hpp"
#include "mitoviz/structure/labels.hpp"

namespace mitoviz {

// Threshold t maximizing between-class variance of a 256-bin histogram over
// [0, 1]; foreground is v > t. Returns 1 for an empty or constant input.
double otsu_threshold(std::span<const double> values);

struct BootstrapOptions {
  std::uint64_t seed = 1;
  EnhancementParams venus_enhancement;
  EnhancementParams mito_enhancement;
  TrainConfig train = default_train();
  // Local half-thickness (px) cut-offs used to name automatic scribbles.
  double axon_max_radius = 2.0;
  double dendrite_min_radius = 2.8;
  double cell_body_min_radius = 6.0;
  // Background seeds lie below this fraction of the Otsu threshold.
  double background_fraction = 0.6;
  // Background seeds kept per foreground seed, drawn at random from the candidates.
  double background_ratio = 2.0;

  static TrainConfig default_train() {
    TrainConfig c;
    c.max_steps = 600;
    c.budget_seconds = 30.0;
    return c;
  }
};

struct BootstrapResult {
  StructureLabelRaster labels;
  BinaryMask mito_foreground;
  ClassifierModel structure_model;  // C = 4, on Venus features
  ClassifierModel mito_model;       // C = 2, on mito features
};

// Heuristic scribbles for one channel: Otsu foreground named by local
// thickness, dim pixels as background. Unmasked pixels keep the heuristic label.
TrainSignal structure_scribbles(const ChannelRaster& venus_enhanced, const BootstrapOptions& options);
TrainSignal mito_scribbles(const ChannelRaster& mito_enhanced, const BootstrapOptions& options);

// Initial labels from classifiers trained on automatic scribbles. Imported
// labels or masks are passed through unchanged; the matching model is then
// trained on them instead so later fine-tuning starts from a fitted state.
BootstrapResult bootstrap_initial(const ChannelRaster& venus, const ChannelRaster& mito,
                                  const BootstrapOptions& options = {},
                                  const std::optional<StructureLabelRaster>& imported_labels = std::nullopt,
                                  const std::optional<BinaryMask>& imported_mito = std::nullopt);

}  // namespace mitoviz
