#pragma once

#include <string>
#include <vector>

#include "mitoviz/mito/objects.hpp"
#include "mitoviz/structure/labels.hpp"

namespace mitoviz {

enum class Feature { Area, Circularity, Eccentricity, Length };

inline constexpr Feature kNumericFeatures[] = {Feature::Area, Feature::Circularity, Feature::Eccentricity,
                                                Feature::Length};

std::string to_string(Feature f);
Feature feature_from_string(const std::string& s);

struct FeatureVector {
  double area_um2 = 0.0;
  double circularity = 0.0;
  double eccentricity = 0.0;
  double length_um = 0.0;
  StructureClass structure = StructureClass::Background;

  double value(Feature f) const;
  friend bool operator==(const FeatureVector&, const FeatureVector&) = default;
};

// Shape measurements in pixel units.

// Length of the 8-connected outer boundary traced through pixel centres, with
// diagonal steps counted as sqrt 2. Zero for a single pixel.
double contour_perimeter(const PixelSet& object);
// Number of pixel edges shared with non-object pixels.
std::size_t crack_perimeter(const PixelSet& object);
// Zhang-Suen thinning. Never empty for a non-empty object: when thinning removes
// everything, the pixel nearest the centroid is kept.
PixelSet skeletonize(const PixelSet& object);
// Longest shortest path over 8-connected pixels (steps 1 and sqrt 2), found by a
// double sweep from an arbitrary pixel.
double geodesic_diameter(const PixelSet& pixels);
// sqrt(1 - l2 / l1) of the second moments, each pixel treated as a unit square.
double eccentricity(const PixelSet& object);

// Throws ValidationError for an empty object or one outside the label raster.
FeatureVector compute_features(const MitoObject& object, const StructureLabelRaster& labels, double pixel_size_um);

struct MeasuredObject {
  ObjectId id = 0;
  FeatureVector features;
  std::size_t pixel_count = 0;
};

std::vector<MeasuredObject> measure(const MitoState& state, const StructureLabelRaster& labels,
                                    double pixel_size_um);

}  // namespace mitoviz
