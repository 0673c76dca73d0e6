#include "mitoviz/learn/classifier.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>

#include "mitoviz/core/error.hpp"
#include "mitoviz/core/rng.hpp"
#include "network.hpp"

namespace mitoviz {

namespace {

constexpr char kMagic[] = {'M', 'V', 'C', 'L', '1'};

void put_u32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int k = 0; k < 4; ++k) out.push_back(static_cast<std::uint8_t>(v >> (8 * k)));
}

void put_f32(std::vector<std::uint8_t>& out, double v) {
  put_u32(out, std::bit_cast<std::uint32_t>(static_cast<float>(v)));
}

struct Reader {
  std::span<const std::uint8_t> bytes;
  std::size_t pos = 0;

  std::uint32_t u32() {
    if (pos + 4 > bytes.size()) throw ValidationError("checkpoint", "truncated checkpoint");
    std::uint32_t v = 0;
    for (int k = 0; k < 4; ++k) v |= static_cast<std::uint32_t>(bytes[pos + k]) << (8 * k);
    pos += 4;
    return v;
  }
  double f32() { return std::bit_cast<float>(u32()); }
};

}  // namespace

ConvLayer::ConvLayer(int in, int out)
    : in_channels(in), out_channels(out), weights(static_cast<std::size_t>(in) * out * 9, 0.0), bias(out, 0.0) {}

ClassifierModel::ClassifierModel(int input_channels, int classes, int hidden)
    : layers{ConvLayer(input_channels, hidden), ConvLayer(hidden, hidden), ConvLayer(hidden, classes)} {
  if (input_channels <= 0 || hidden <= 0 || classes < 2) {
    throw ValidationError("model", "classifier needs positive widths and at least two classes");
  }
}

ClassifierModel ClassifierModel::he_uniform(int input_channels, int classes, std::uint64_t seed, int hidden) {
  ClassifierModel m(input_channels, classes, hidden);
  SplitMix64 rng(seed);
  for (ConvLayer& layer : m.layers) {
    const double bound = std::sqrt(6.0 / (layer.in_channels * 9.0));
    for (double& w : layer.weights) w = rng.uniform(-bound, bound);
  }
  return m;
}

std::size_t ClassifierModel::parameter_count() const {
  std::size_t n = 0;
  for (const ConvLayer& l : layers) n += l.weights.size() + l.bias.size();
  return n;
}

double& ClassifierModel::parameter(std::size_t k) {
  for (ConvLayer& l : layers) {
    if (k < l.weights.size()) return l.weights[k];
    k -= l.weights.size();
    if (k < l.bias.size()) return l.bias[k];
    k -= l.bias.size();
  }
  throw ValidationError("parameter", "parameter index out of range");
}

double ClassifierModel::parameter(std::size_t k) const { return const_cast<ClassifierModel*>(this)->parameter(k); }

bool ClassifierModel::all_finite() const {
  for (const ConvLayer& l : layers) {
    for (double w : l.weights)
      if (!std::isfinite(w)) return false;
    for (double b : l.bias)
      if (!std::isfinite(b)) return false;
  }
  return true;
}

void ClassifierModel::set_zero() {
  for (ConvLayer& l : layers) {
    std::fill(l.weights.begin(), l.weights.end(), 0.0);
    std::fill(l.bias.begin(), l.bias.end(), 0.0);
  }
}

void ClassifierModel::add_scaled(const ClassifierModel& other, double scale) {
  for (int k = 0; k < 3; ++k) {
    ConvLayer& a = layers[k];
    const ConvLayer& b = other.layers[k];
    for (std::size_t i = 0; i < a.weights.size(); ++i) a.weights[i] += scale * b.weights[i];
    for (std::size_t i = 0; i < a.bias.size(); ++i) a.bias[i] += scale * b.bias[i];
  }
}

Prediction predict(const ClassifierModel& model, const FeatureStack& features) {
  if (features.planes() != model.input_channels()) {
    throw ValidationError("features", "feature depth " + std::to_string(features.planes()) +
                                          " does not match model input " + std::to_string(model.input_channels()));
  }
  const Extent e = features.extent();
  detail::Activations act;
  detail::forward(model, features, Rect{0, 0, e.width, e.height}, act);

  Prediction out;
  out.extent = e;
  out.classes = model.classes();
  out.probabilities = std::move(act.probs);
  out.labels.assign(e.size(), 0);
  const std::size_t n = e.size();
  for (std::size_t p = 0; p < n; ++p) {
    int best = 0;
    for (int k = 1; k < out.classes; ++k) {
      if (out.probabilities[k * n + p] > out.probabilities[best * n + p]) best = k;
    }
    out.labels[p] = static_cast<std::uint8_t>(best);
  }
  return out;
}

std::vector<std::uint8_t> encode_checkpoint(const ClassifierModel& model) {
  std::vector<std::uint8_t> out(std::begin(kMagic), std::end(kMagic));
  put_u32(out, model.input_channels());
  put_u32(out, model.hidden());
  put_u32(out, model.layers[1].out_channels);
  put_u32(out, model.classes());
  for (const ConvLayer& l : model.layers) {
    for (double w : l.weights) put_f32(out, w);
    for (double b : l.bias) put_f32(out, b);
  }
  return out;
}

ClassifierModel decode_checkpoint(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < sizeof(kMagic) || std::memcmp(bytes.data(), kMagic, sizeof(kMagic)) != 0) {
    throw ValidationError("checkpoint", "not a classifier checkpoint");
  }
  Reader r{bytes, sizeof(kMagic)};
  const std::uint32_t d = r.u32(), h1 = r.u32(), h2 = r.u32(), c = r.u32();
  if (d == 0 || h1 == 0 || h1 != h2 || c < 2 || d > 4096 || h1 > 4096 || c > 256) {
    throw ValidationError("checkpoint", "unsupported checkpoint dimensions");
  }
  ClassifierModel m(static_cast<int>(d), static_cast<int>(c), static_cast<int>(h1));
  for (ConvLayer& l : m.layers) {
    for (double& w : l.weights) w = r.f32();
    for (double& b : l.bias) b = r.f32();
  }
  if (r.pos != bytes.size()) throw ValidationError("checkpoint", "trailing bytes in checkpoint");
  if (!m.all_finite()) throw ValidationError("checkpoint", "non-finite weights in checkpoint");
  return m;
}

void save_checkpoint(const ClassifierModel& model, const std::filesystem::path& path) {
  const auto bytes = encode_checkpoint(model);
  std::ofstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot write " + path.string());
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("cannot write " + path.string());
}

ClassifierModel load_checkpoint(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot read " + path.string());
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
  return decode_checkpoint(bytes);
}

}  // namespace mitoviz
