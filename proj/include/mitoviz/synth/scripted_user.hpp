#pragma once

#include <array>
#include <cstddef>
#include <limits>
#include <vector>

#include "mitoviz/imgproc/raster.hpp"
#include "mitoviz/mito/edits.hpp"
#include "mitoviz/structure/brush.hpp"
#include "mitoviz/structure/labels.hpp"

namespace mitoviz {

struct StructureUserBudget {
  int max_strokes = std::numeric_limits<int>::max();
  // Distinct pixels the strokes may cover in total (the training mask size).
  std::size_t max_touched = std::numeric_limits<std::size_t>::max();
  double max_radius = 12.0;
  // Pixels closer than this to an earlier stroke centre are treated as already
  // addressed when picking the next component (0 disables).
  double spacing = 0.0;
};

struct StructureUserSession {
  std::vector<BrushStroke> strokes;
  StructureLabelRaster labels;  // labels after applying every stroke
  std::size_t touched = 0;
};

// Greedy: brush the largest disagreement component from its qualifying pixel
// nearest the centroid. The radius stops short of any pixel whose true class
// differs, so strokes never introduce new errors.
StructureUserSession scripted_structure_user(const StructureLabelRaster& current, const StructureLabelRaster& truth,
                                             const ChannelRaster& venus_enhanced, double sigma_s,
                                             const StructureUserBudget& budget = {});

struct MitoUserEvent {
  MitoEditKind kind = MitoEditKind::Exclude;  // Exclude, Split or Merge (merge also includes)
  std::vector<ObjectId> ids;                  // exclude targets
  ObjectId target = 0;                        // split target
  std::vector<std::array<double, 2>> points;  // polyline for split / merge
};

void apply_mito_event(MitoEditor& editor, const MitoUserEvent& event, const ChannelRaster& mito_enhanced);

// Greedy over object-level errors (false positive, merged, missing, split),
// largest first. Events are simulated on a copy so each one sees the previous.
std::vector<MitoUserEvent> scripted_mito_user(const MitoState& current, const std::vector<PixelSet>& truth,
                                              const ChannelRaster& mito_enhanced, int max_events = 1000);

}  // namespace mitoviz
