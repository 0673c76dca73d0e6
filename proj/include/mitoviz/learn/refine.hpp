#pragma once

#include "mitoviz/learn/training.hpp"
#include "mitoviz/mito/edits.hpp"
#include "mitoviz/structure/brush.hpp"

namespace mitoviz {

// Training input gathered from the brush records still in the journal; a later
// stroke overrides an earlier one at the same pixel. L is the current raster.
TrainSignal structure_signal(const LabelEditor& editor);

// Pixels touched by journaled mito edits, each targeted at its membership in
// the current foreground. Two classes: 0 background, 1 mitochondrion.
TrainSignal mito_signal(const MitoEditor& editor);

// Argmax labels with every masked pixel forced to its U code.
std::vector<std::uint8_t> refined_codes(const Prediction& prediction, const TrainSignal& signal);

}  // namespace mitoviz
