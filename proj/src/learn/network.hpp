#pragma once

// Region-restricted forward and backward passes shared by prediction and training.

#include <array>
#include <vector>

#include "mitoviz/learn/classifier.hpp"

namespace mitoviz::detail {

// Half-open pixel window clipped to the image.
struct Window {
  int x0 = 0, y0 = 0, x1 = 0, y1 = 0;
  int w() const { return x1 - x0; }
  int h() const { return y1 - y0; }
  std::size_t size() const { return static_cast<std::size_t>(w()) * h(); }
  std::size_t at(int x, int y) const { return static_cast<std::size_t>(y - y0) * w() + (x - x0); }
};

Window grow(const Rect& tile, int r, const Extent& e);

// Activations for one tile. Layer k lives on the tile grown by 3 - k pixels so
// the tile outputs equal those of a whole-image pass.
struct Activations {
  std::array<Window, 4> win;
  std::vector<double> input;   // D planes on win[0]
  std::vector<double> hidden1; // after ReLU, win[1]
  std::vector<double> hidden2; // after ReLU, win[2]
  std::vector<double> probs;   // C planes on win[3]
};

void forward(const ClassifierModel& model, const FeatureStack& features, const Rect& tile, Activations& act);

// d_probs: dLoss/dprob on win[3], laid out like probs. Accumulates into grad.
void backward(const ClassifierModel& model, const Activations& act, const std::vector<double>& d_probs,
              ClassifierModel& grad);

}  // namespace mitoviz::detail
