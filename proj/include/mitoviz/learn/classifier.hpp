#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <vector>

#include "mitoviz/learn/features.hpp"

namespace mitoviz {

inline constexpr int kHiddenChannels = 16;
inline constexpr int kKernelSize = 3;

// 3x3 convolution, weights laid out [out][in][ky][kx].
struct ConvLayer {
  int in_channels = 0;
  int out_channels = 0;
  std::vector<double> weights;
  std::vector<double> bias;

  ConvLayer() = default;
  ConvLayer(int in, int out);
  double& weight(int o, int i, int ky, int kx) { return weights[((o * in_channels + i) * 3 + ky) * 3 + kx]; }
  double weight(int o, int i, int ky, int kx) const { return weights[((o * in_channels + i) * 3 + ky) * 3 + kx]; }

  friend bool operator==(const ConvLayer&, const ConvLayer&) = default;
};

// D -> hidden -> hidden -> C with ReLU after the first two layers and a softmax
// over classes. Zero padding keeps every layer at image resolution.
struct ClassifierModel {
  std::array<ConvLayer, 3> layers;

  ClassifierModel() = default;
  // All-zero weights.
  ClassifierModel(int input_channels, int classes, int hidden = kHiddenChannels);
  // He-style uniform weights in +-sqrt(6 / fan_in), zero biases.
  static ClassifierModel he_uniform(int input_channels, int classes, std::uint64_t seed,
                                    int hidden = kHiddenChannels);

  int input_channels() const { return layers[0].in_channels; }
  int classes() const { return layers[2].out_channels; }
  int hidden() const { return layers[0].out_channels; }

  // Flat view across layers: weights then bias for layer 0, 1, 2.
  std::size_t parameter_count() const;
  double& parameter(std::size_t k);
  double parameter(std::size_t k) const;

  bool all_finite() const;
  void set_zero();
  // this += scale * other; shapes must match.
  void add_scaled(const ClassifierModel& other, double scale);

  friend bool operator==(const ClassifierModel&, const ClassifierModel&) = default;
};

struct Prediction {
  Extent extent;
  int classes = 0;
  std::vector<double> probabilities;  // [class][pixel]
  std::vector<std::uint8_t> labels;   // argmax, ties to the lower code

  double probability(int c, std::size_t pixel) const { return probabilities[c * extent.size() + pixel]; }
};

// Throws ValidationError when the stack depth differs from the model input width.
Prediction predict(const ClassifierModel& model, const FeatureStack& features);

// "MVCL1", uint32 input/hidden/hidden/classes, then float32 weights and biases
// per layer, all little-endian.
std::vector<std::uint8_t> encode_checkpoint(const ClassifierModel& model);
ClassifierModel decode_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const ClassifierModel& model, const std::filesystem::path& path);
ClassifierModel load_checkpoint(const std::filesystem::path& path);

}  // namespace mitoviz
