#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mitoviz/learn/classifier.hpp"

namespace mitoviz {

// U, M and L of the training loss. Classes are stored as codes; one-hot is implied.
struct TrainSignal {
  Extent extent;
  int classes = 0;
  std::vector<std::uint8_t> mask;      // M
  std::vector<std::uint8_t> target;    // U, meaningful where mask is set
  std::vector<std::uint8_t> previous;  // L

  TrainSignal() = default;
  // Empty mask, U = L.
  TrainSignal(Extent extent, int classes, std::vector<std::uint8_t> previous_labels);

  // Sets M and U at one pixel.
  void mark(PixelIndex pixel, std::uint8_t cls);
  std::size_t masked_count() const;
  // Throws ValidationError on size mismatch or codes >= classes.
  void validate() const;
};

struct TrainConfig {
  double focusing_factor = 10.0;  // f
  double budget_seconds = 60.0;
  double learning_rate = 0.05;
  double momentum = 0.9;
  double gradient_clip = 1.0;  // max global gradient norm per step; 0 disables
  int tile_size = 64;
  std::uint64_t seed = 1;
  int max_steps = 0;          // 0: bounded only by time and plateau
  int eval_interval = 20;     // steps between whole-image loss evaluations
  double plateau_tolerance = 1e-3;
  int plateau_patience = 5;   // consecutive flat evaluation windows before stopping
  double lr_decay = 0.7;      // step scale after a window without improvement; 1 disables

  void validate() const;
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

void to_json(nlohmann::json& j, const TrainConfig& c);
// Missing keys keep their defaults; unknown keys are rejected.
void from_json(const nlohmann::json& j, TrainConfig& c);

struct LossTerms {
  double total = 0.0;
  double interaction = 0.0;  // Loss_u
  double original = 0.0;     // Loss_o
};

enum class LossPart { Total, Interaction, Original };

// Loss_u = ||M (U - P)||, Loss_o = ||(1 - M)(L - P)||, Loss_t = f Loss_u + Loss_o (Frobenius norms).
LossTerms loss(const Prediction& output, const TrainSignal& signal, double f);

struct GradientResult {
  LossTerms loss;
  ClassifierModel grad;
};

// Analytic gradient of the chosen loss term; region restricts both loss and
// gradient to a sub-rectangle (whole image when absent).
GradientResult gradient(const ClassifierModel& model, const FeatureStack& features, const TrainSignal& signal,
                        double f, LossPart part = LossPart::Total, std::optional<Rect> region = std::nullopt);

using ProgressSink = std::function<void(double)>;

struct FinetuneResult {
  ClassifierModel model;  // lowest whole-image Loss_t seen, including the input model
  LossTerms initial;
  LossTerms best;
  int steps = 0;
  double seconds = 0.0;
  std::string stop_reason;  // "budget", "plateau" or "max_steps"
  std::vector<double> history;  // whole-image Loss_t at each evaluation
};

// Momentum SGD on random tiles, half of them centred on masked pixels.
// Throws ValidationError("no user input to learn from") when M is empty.
FinetuneResult finetune(const ClassifierModel& model, const FeatureStack& features, const TrainSignal& signal,
                        const TrainConfig& config, const ProgressSink& progress = {});

}  // namespace mitoviz
