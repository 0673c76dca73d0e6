#pragma once

#include <span>
#include <string>
#include <vector>

#include "mitoviz/imgproc/raster.hpp"

namespace mitoviz {

// Planes in extraction order.
inline constexpr int kFeaturePlanes = 16;

// D planes of per-pixel features, plane-major.
class FeatureStack {
 public:
  FeatureStack() = default;
  FeatureStack(int width, int height, int planes);

  int width() const { return extent_.width; }
  int height() const { return extent_.height; }
  const Extent& extent() const { return extent_; }
  int planes() const { return planes_; }

  std::span<float> plane(int k);
  std::span<const float> plane(int k) const;
  std::span<const float> values() const { return data_; }

  friend bool operator==(const FeatureStack&, const FeatureStack&) = default;

 private:
  Extent extent_;
  int planes_ = 0;
  std::vector<float> data_;
};

// Human-readable plane names, e.g. "gauss_s2".
std::vector<std::string> feature_plane_names();

// Separable Gaussian with radius ceil(3 sigma) and mirrored borders.
std::vector<double> gaussian_blur(std::span<const double> values, Extent extent, double sigma);

// Identity, Gaussians, gradient magnitudes, Laplacians, local standard deviations
// and ridge responses, each standardized over the image.
FeatureStack extract_features(const ChannelRaster& channel);

}  // namespace mitoviz
