#pragma once

#include <vector>

#include "mitoviz/imgproc/raster.hpp"
#include "mitoviz/mito/objects.hpp"
#include "mitoviz/structure/candidates.hpp"

namespace mitoviz {

// 2|A n B| / (|A| + |B|); 0 when both are empty.
double dice(const PixelSet& a, const PixelSet& b);

// N: union of the >= sigma_m components seeded from every object pixel.
PixelSet high_signal_neighbourhood(const MitoObject& obj, const ChannelRaster& mito_enhanced, double sigma_m);

// E_o = 1 - Dice(O, N); 1 when N is empty.
double object_error(const MitoObject& obj, const ChannelRaster& mito_enhanced, double sigma_m);

struct BackgroundRegion {
  PixelSet pixels;
  double score = 0.0;  // E_b: 0 when the region meets any object, else 1
};

// One entry per 4-connected component of {mito_enhanced >= sigma_m}, in component order.
std::vector<BackgroundRegion> background_error(const ChannelRaster& mito_enhanced, double sigma_m,
                                               const MitoState& state);

// Boxes for objects with E_o > sigma_e, then background regions with E_b > sigma_e.
std::vector<CandidateBox> error_candidates(const MitoState& state, const ChannelRaster& mito_enhanced,
                                           double sigma_m, double sigma_e);

// Fraction of pixels where the masks agree; 1 for empty masks. Throws ValidationError on size mismatch.
double mask_agreement(const BinaryMask& a, const BinaryMask& b);

struct DetectionScore {
  std::size_t matched = 0;
  std::size_t predicted = 0;
  std::size_t truth = 0;
  double precision = 1.0;  // matched / predicted; 1 when nothing was predicted
  double recall = 1.0;     // matched / truth; 1 when there is nothing to find
};

// One-to-one matching of predicted objects to truth objects with IoU >= min_iou,
// taken greedily in order of decreasing IoU (ties by index).
DetectionScore detection_score(const MitoState& predicted, const std::vector<PixelSet>& truth, double min_iou = 0.5);

}  // namespace mitoviz
