#include "mitoviz/learn/training.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>

#include "mitoviz/core/error.hpp"
#include "mitoviz/core/rng.hpp"
#include "network.hpp"

namespace mitoviz {

namespace {

struct Residuals {
  double masked_sq = 0.0;
  double unmasked_sq = 0.0;
};

// Sums squared residuals over window w of probs (C planes laid out on w).
Residuals residuals(const std::vector<double>& probs, const detail::Window& w, const TrainSignal& s) {
  Residuals r;
  const std::size_t n = w.size();
  for (int y = w.y0; y < w.y1; ++y) {
    for (int x = w.x0; x < w.x1; ++x) {
      const std::size_t gi = s.extent.index(x, y), li = w.at(x, y);
      const bool m = s.mask[gi] != 0;
      const int cls = m ? s.target[gi] : s.previous[gi];
      double acc = 0.0;
      for (int k = 0; k < s.classes; ++k) {
        const double d = probs[k * n + li] - (k == cls ? 1.0 : 0.0);
        acc += d * d;
      }
      (m ? r.masked_sq : r.unmasked_sq) += acc;
    }
  }
  return r;
}

LossTerms terms(const Residuals& r, double f) {
  LossTerms t;
  t.interaction = std::sqrt(r.masked_sq);
  t.original = std::sqrt(r.unmasked_sq);
  t.total = f * t.interaction + t.original;
  return t;
}

std::vector<double> loss_gradient(const std::vector<double>& probs, const detail::Window& w, const TrainSignal& s,
                                  const LossTerms& t, double f, LossPart part) {
  const std::size_t n = w.size();
  std::vector<double> d(probs.size(), 0.0);
  double scale_u = 0.0, scale_o = 0.0;
  if (t.interaction > 0.0 && part != LossPart::Original) {
    scale_u = (part == LossPart::Total ? f : 1.0) / t.interaction;
  }
  if (t.original > 0.0 && part != LossPart::Interaction) scale_o = 1.0 / t.original;
  for (int y = w.y0; y < w.y1; ++y) {
    for (int x = w.x0; x < w.x1; ++x) {
      const std::size_t gi = s.extent.index(x, y), li = w.at(x, y);
      const bool m = s.mask[gi] != 0;
      const double scale = m ? scale_u : scale_o;
      if (scale == 0.0) continue;
      const int cls = m ? s.target[gi] : s.previous[gi];
      for (int k = 0; k < s.classes; ++k) d[k * n + li] = scale * (probs[k * n + li] - (k == cls ? 1.0 : 0.0));
    }
  }
  return d;
}

void check_shapes(const ClassifierModel& model, const FeatureStack& features, const TrainSignal& signal) {
  signal.validate();
  if (features.planes() != model.input_channels()) throw ValidationError("features", "feature depth mismatch");
  if (!(features.extent() == signal.extent)) throw ValidationError("signal", "signal extent mismatch");
  if (signal.classes != model.classes()) throw ValidationError("signal", "class count mismatch");
}

LossTerms whole_image_loss(const ClassifierModel& model, const FeatureStack& features, const TrainSignal& signal,
                           double f) {
  detail::Activations act;
  const Extent& e = features.extent();
  detail::forward(model, features, Rect{0, 0, e.width, e.height}, act);
  return terms(residuals(act.probs, act.win[3], signal), f);
}

// Gradient over one tile. With norms given, residuals are scaled by those
// whole-image norms, so the result is the tile's share of the full gradient.
GradientResult tile_gradient(const ClassifierModel& model, const FeatureStack& features, const TrainSignal& signal,
                             double f, LossPart part, const Rect& tile, const LossTerms* norms) {
  detail::Activations act;
  detail::forward(model, features, tile, act);
  GradientResult out;
  out.loss = terms(residuals(act.probs, act.win[3], signal), f);
  out.grad = ClassifierModel(model.input_channels(), model.classes(), model.hidden());
  const auto d_probs = loss_gradient(act.probs, act.win[3], signal, norms ? *norms : out.loss, f, part);
  detail::backward(model, act, d_probs, out.grad);
  return out;
}

}  // namespace

TrainSignal::TrainSignal(Extent e, int c, std::vector<std::uint8_t> previous_labels)
    : extent(e), classes(c), mask(e.size(), 0), target(previous_labels), previous(std::move(previous_labels)) {
  validate();
}

void TrainSignal::mark(PixelIndex pixel, std::uint8_t cls) {
  if (pixel >= extent.size()) throw ValidationError("pixel", "pixel outside the signal");
  if (cls >= classes) throw ValidationError("class", "class code out of range");
  mask[pixel] = 1;
  target[pixel] = cls;
}

std::size_t TrainSignal::masked_count() const {
  return static_cast<std::size_t>(std::count_if(mask.begin(), mask.end(), [](std::uint8_t m) { return m != 0; }));
}

void TrainSignal::validate() const {
  const std::size_t n = extent.size();
  if (classes < 2) throw ValidationError("classes", "signal needs at least two classes");
  if (mask.size() != n || target.size() != n || previous.size() != n) {
    throw ValidationError("signal", "signal planes do not match the extent");
  }
  for (std::size_t i = 0; i < n; ++i) {
    if (previous[i] >= classes || (mask[i] && target[i] >= classes)) {
      throw ValidationError("signal", "class code out of range at pixel " + std::to_string(i));
    }
  }
}

void TrainConfig::validate() const {
  std::vector<FieldError> errs;
  if (!(focusing_factor >= 0.0) || !std::isfinite(focusing_factor)) errs.push_back({"focusing_factor", "must be >= 0"});
  if (!(budget_seconds > 0.0) || !std::isfinite(budget_seconds)) errs.push_back({"budget_seconds", "must be > 0"});
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) errs.push_back({"learning_rate", "must be > 0"});
  if (!(momentum >= 0.0 && momentum < 1.0)) errs.push_back({"momentum", "must be in [0, 1)"});
  if (!(gradient_clip >= 0.0)) errs.push_back({"gradient_clip", "must be >= 0"});
  if (tile_size < 8) errs.push_back({"tile_size", "must be >= 8"});
  if (max_steps < 0) errs.push_back({"max_steps", "must be >= 0"});
  if (eval_interval < 1) errs.push_back({"eval_interval", "must be >= 1"});
  if (!(plateau_tolerance >= 0.0)) errs.push_back({"plateau_tolerance", "must be >= 0"});
  if (plateau_patience < 1) errs.push_back({"plateau_patience", "must be >= 1"});
  if (!(lr_decay > 0.0 && lr_decay <= 1.0)) errs.push_back({"lr_decay", "must be in (0, 1]"});
  if (!errs.empty()) throw ValidationError("invalid training configuration", std::move(errs));
}

void to_json(nlohmann::json& j, const TrainConfig& c) {
  j = {{"focusing_factor", c.focusing_factor}, {"budget_seconds", c.budget_seconds},
       {"learning_rate", c.learning_rate},     {"momentum", c.momentum},
       {"gradient_clip", c.gradient_clip},
       {"tile_size", c.tile_size},             {"seed", c.seed},
       {"max_steps", c.max_steps},             {"eval_interval", c.eval_interval},
       {"plateau_tolerance", c.plateau_tolerance}, {"plateau_patience", c.plateau_patience},
       {"lr_decay", c.lr_decay}};
}

void from_json(const nlohmann::json& j, TrainConfig& c) {
  if (!j.is_object()) throw ValidationError("train_config", "training configuration must be an object");
  TrainConfig out = c;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "focusing_factor") out.focusing_factor = value.get<double>();
      else if (key == "budget_seconds") out.budget_seconds = value.get<double>();
      else if (key == "learning_rate") out.learning_rate = value.get<double>();
      else if (key == "momentum") out.momentum = value.get<double>();
      else if (key == "gradient_clip") out.gradient_clip = value.get<double>();
      else if (key == "tile_size") out.tile_size = value.get<int>();
      else if (key == "seed") out.seed = value.get<std::uint64_t>();
      else if (key == "max_steps") out.max_steps = value.get<int>();
      else if (key == "eval_interval") out.eval_interval = value.get<int>();
      else if (key == "plateau_tolerance") out.plateau_tolerance = value.get<double>();
      else if (key == "plateau_patience") out.plateau_patience = value.get<int>();
      else if (key == "lr_decay") out.lr_decay = value.get<double>();
      else throw ValidationError(key, "unknown training option");
    } catch (const nlohmann::json::exception&) {
      throw ValidationError(key, "wrong type for training option");
    }
  }
  out.validate();
  c = out;
}

LossTerms loss(const Prediction& output, const TrainSignal& signal, double f) {
  signal.validate();
  if (!(output.extent == signal.extent) || output.classes != signal.classes) {
    throw ValidationError("signal", "prediction and signal shapes differ");
  }
  if (!(f >= 0.0)) throw ValidationError("focusing_factor", "must be >= 0");
  const detail::Window w{0, 0, output.extent.width, output.extent.height};
  return terms(residuals(output.probabilities, w, signal), f);
}

GradientResult gradient(const ClassifierModel& model, const FeatureStack& features, const TrainSignal& signal,
                        double f, LossPart part, std::optional<Rect> region) {
  check_shapes(model, features, signal);
  const Extent& e = features.extent();
  const Rect tile = region.value_or(Rect{0, 0, e.width, e.height});
  if (tile.empty() || tile.x < 0 || tile.y < 0 || tile.right() > e.width || tile.bottom() > e.height) {
    throw ValidationError("region", "region outside the image");
  }
  return tile_gradient(model, features, signal, f, part, tile, nullptr);
}

FinetuneResult finetune(const ClassifierModel& model, const FeatureStack& features, const TrainSignal& signal,
                        const TrainConfig& config, const ProgressSink& progress) {
  config.validate();
  check_shapes(model, features, signal);
  std::vector<PixelIndex> masked;
  for (std::size_t i = 0; i < signal.mask.size(); ++i)
    if (signal.mask[i]) masked.push_back(static_cast<PixelIndex>(i));
  if (masked.empty()) throw ValidationError("signal", "no user input to learn from");

  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  auto elapsed = [&] { return std::chrono::duration<double>(clock::now() - start).count(); };
  double reported = 0.0;
  auto report = [&](double frac) {
    frac = std::clamp(frac, 0.0, 1.0);
    if (frac > reported) reported = frac;
    if (progress) progress(reported);
  };

  const Extent& e = features.extent();
  const double f = config.focusing_factor;
  const int tw = std::min(config.tile_size, e.width), th = std::min(config.tile_size, e.height);
  const double coverage = static_cast<double>(e.size()) / (static_cast<double>(tw) * th);

  FinetuneResult out;
  out.model = model;
  out.initial = whole_image_loss(model, features, signal, f);
  out.best = out.initial;
  report(0.0);

  ClassifierModel current = model;
  ClassifierModel velocity(model.input_channels(), model.classes(), model.hidden());
  SplitMix64 rng(config.seed);
  double best_at_last_eval = out.best.total;
  int since_eval = 0;
  int flat_windows = 0;

  double lr = config.learning_rate;
  // Tile residuals are scaled by the last whole-image norms so tiles share one objective.
  LossTerms norms = out.initial;
  // A window that fails to improve restarts from the best iterate at a smaller step.
  auto evaluate = [&] {
    const LossTerms now = whole_image_loss(current, features, signal, f);
    out.history.push_back(now.total);
    norms = now;
    if (now.total < out.best.total) {
      out.best = now;
      out.model = current;
    } else if (config.lr_decay < 1.0) {
      current = out.model;
      velocity.set_zero();
      norms = out.best;
      lr *= config.lr_decay;
    }
    since_eval = 0;
  };

  while (true) {
    if (config.max_steps > 0 && out.steps >= config.max_steps) {
      out.stop_reason = "max_steps";
      break;
    }
    if (elapsed() >= config.budget_seconds) {
      out.stop_reason = "budget";
      break;
    }
    Rect tile{0, 0, tw, th};
    if (out.steps % 2 == 0) {
      const Point c = e.point(masked[rng.below(masked.size())]);
      tile.x = std::clamp(c.x - tw / 2, 0, e.width - tw);
      tile.y = std::clamp(c.y - th / 2, 0, e.height - th);
    } else {
      tile.x = static_cast<int>(rng.below(static_cast<std::uint64_t>(e.width - tw + 1)));
      tile.y = static_cast<int>(rng.below(static_cast<std::uint64_t>(e.height - th + 1)));
    }
    const GradientResult g = tile_gradient(current, features, signal, f, LossPart::Total, tile, &norms);
    double sq = 0.0;
    for (std::size_t k = 0; k < g.grad.parameter_count(); ++k) sq += g.grad.parameter(k) * g.grad.parameter(k);
    const double norm = coverage * std::sqrt(sq);
    double step = coverage * lr;
    if (config.gradient_clip > 0.0 && norm > config.gradient_clip) step *= config.gradient_clip / norm;
    for (int k = 0; k < 3; ++k) {
      ConvLayer& v = velocity.layers[k];
      const ConvLayer& gl = g.grad.layers[k];
      for (std::size_t i = 0; i < v.weights.size(); ++i) v.weights[i] = config.momentum * v.weights[i] - step * gl.weights[i];
      for (std::size_t i = 0; i < v.bias.size(); ++i) v.bias[i] = config.momentum * v.bias[i] - step * gl.bias[i];
    }
    current.add_scaled(velocity, 1.0);
    if (!current.all_finite()) {
      out.stop_reason = "diverged";
      break;
    }
    ++out.steps;
    ++since_eval;

    double frac = elapsed() / config.budget_seconds;
    if (config.max_steps > 0) frac = std::max(frac, static_cast<double>(out.steps) / config.max_steps);
    report(frac);

    if (since_eval == config.eval_interval) {
      evaluate();
      const double gain = best_at_last_eval > 0.0 ? (best_at_last_eval - out.best.total) / best_at_last_eval : 0.0;
      best_at_last_eval = out.best.total;
      flat_windows = gain < config.plateau_tolerance ? flat_windows + 1 : 0;
      if (flat_windows >= config.plateau_patience) {
        out.stop_reason = "plateau";
        break;
      }
    }
  }
  if (since_eval > 0 && out.stop_reason != "diverged") evaluate();
  out.seconds = elapsed();
  report(1.0);
  return out;
}

}  // namespace mitoviz
