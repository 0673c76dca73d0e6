#pragma once

#include <vector>

#include "mitoviz/imgproc/raster.hpp"

namespace mitoviz {

// Exact squared Euclidean distance from each set pixel to the nearest unset pixel
// (0 on unset pixels). Pixels outside the raster are ignored, so a fully set
// mask yields +inf everywhere.
std::vector<double> squared_distance_to_background(const BinaryMask& mask);

}  // namespace mitoviz
