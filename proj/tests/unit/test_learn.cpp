#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "mitoviz/core/error.hpp"
#include "mitoviz/core/rng.hpp"
#include "mitoviz/learn/bootstrap.hpp"
#include "mitoviz/learn/classifier.hpp"
#include "mitoviz/learn/features.hpp"
#include "mitoviz/learn/training.hpp"
#include "mitoviz/synth/corrupt.hpp"
#include "mitoviz/synth/phantom.hpp"

using namespace mitoviz;
namespace fs = std::filesystem;

namespace {

FeatureStack random_features(int w, int h, int d, SplitMix64& rng) {
  FeatureStack fs(w, h, d);
  for (int k = 0; k < d; ++k)
    for (float& v : fs.plane(k)) v = static_cast<float>(rng.normal());
  return fs;
}

TrainSignal random_signal(Extent e, int classes, double mask_fraction, SplitMix64& rng) {
  std::vector<std::uint8_t> prev(e.size());
  for (auto& c : prev) c = static_cast<std::uint8_t>(rng.below(classes));
  TrainSignal s(e, classes, prev);
  for (PixelIndex i = 0; i < e.size(); ++i)
    if (rng.uniform() < mask_fraction) s.mark(i, static_cast<std::uint8_t>(rng.below(classes)));
  return s;
}

// Direct zero-padded convolution, independent of the library's tiled kernels.
std::vector<double> reference_conv(const ConvLayer& l, const std::vector<double>& in, int w, int h, bool relu) {
  std::vector<double> out(static_cast<std::size_t>(l.out_channels) * w * h);
  for (int o = 0; o < l.out_channels; ++o)
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        double acc = l.bias[o];
        for (int i = 0; i < l.in_channels; ++i)
          for (int ky = 0; ky < 3; ++ky)
            for (int kx = 0; kx < 3; ++kx) {
              const int sx = x + kx - 1, sy = y + ky - 1;
              if (sx < 0 || sy < 0 || sx >= w || sy >= h) continue;
              acc += l.weight(o, i, ky, kx) * in[(static_cast<std::size_t>(i) * h + sy) * w + sx];
            }
        out[(static_cast<std::size_t>(o) * h + y) * w + x] = relu ? std::max(0.0, acc) : acc;
      }
  return out;
}

std::vector<double> reference_probabilities(const ClassifierModel& m, const FeatureStack& fs) {
  const int w = fs.width(), h = fs.height();
  std::vector<double> x(fs.values().begin(), fs.values().end());
  x = reference_conv(m.layers[0], x, w, h, true);
  x = reference_conv(m.layers[1], x, w, h, true);
  x = reference_conv(m.layers[2], x, w, h, false);
  const int c = m.classes();
  const std::size_t n = static_cast<std::size_t>(w) * h;
  for (std::size_t p = 0; p < n; ++p) {
    double mx = -INFINITY;
    for (int k = 0; k < c; ++k) mx = std::max(mx, x[k * n + p]);
    double z = 0.0;
    for (int k = 0; k < c; ++k) z += std::exp(x[k * n + p] - mx);
    for (int k = 0; k < c; ++k) x[k * n + p] = std::exp(x[k * n + p] - mx) / z;
  }
  return x;
}

double total_loss(const ClassifierModel& m, const FeatureStack& fs, const TrainSignal& s, double f) {
  return loss(predict(m, fs), s, f).total;
}

double relative_error(double a, double b) { return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6}); }

// Worst relative error between analytic and central-difference gradients over the
// given parameter indices.
double worst_fd_error(ClassifierModel m, const FeatureStack& fs, const TrainSignal& s, double f,
                      const std::vector<std::size_t>& params) {
  const auto g = gradient(m, fs, s, f);
  const double eps = 1e-4;
  double worst = 0.0;
  for (std::size_t k : params) {
    const double w0 = m.parameter(k);
    m.parameter(k) = w0 + eps;
    const double up = total_loss(m, fs, s, f);
    m.parameter(k) = w0 - eps;
    const double down = total_loss(m, fs, s, f);
    m.parameter(k) = w0;
    worst = std::max(worst, relative_error(g.grad.parameter(k), (up - down) / (2 * eps)));
  }
  return worst;
}

ChannelRaster vertical_bar_image(int w, int h, int x0, int x1, double fg) {
  ChannelRaster r(w, h, 0.05);
  for (int y = 0; y < h; ++y)
    for (int x = x0; x < x1; ++x) r.set(static_cast<std::size_t>(y) * w + x, fg);
  return r;
}

fs::path temp_path(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / "mitoviz_test_learn";
  fs::create_directories(dir);
  return dir / name;
}

}  // namespace

TEST_CASE("features: constant image gives all-zero planes") {
  const auto fs = extract_features(ChannelRaster(20, 14, 0.4));
  REQUIRE(fs.planes() == kFeaturePlanes);
  CHECK(feature_plane_names().size() == static_cast<std::size_t>(kFeaturePlanes));
  for (float v : fs.values()) CHECK(v == 0.0f);
}

TEST_CASE("gaussian_blur: impulse response equals the normalized separable kernel") {
  const int w = 41, h = 41;
  for (double sigma : {1.0, 2.0, 4.0}) {
    std::vector<double> img(w * h, 0.0);
    img[20 * w + 20] = 1.0;
    const auto out = gaussian_blur(img, Extent{w, h}, sigma);
    const int r = static_cast<int>(std::ceil(3 * sigma));
    double norm = 0.0;
    for (int d = -r; d <= r; ++d) norm += std::exp(-d * d / (2 * sigma * sigma));
    double total = 0.0;
    for (int y = 0; y < h; ++y)
      for (int x = 0; x < w; ++x) {
        const int dx = x - 20, dy = y - 20;
        double expect = 0.0;
        if (std::abs(dx) <= r && std::abs(dy) <= r)
          expect = std::exp(-(dx * dx + dy * dy) / (2 * sigma * sigma)) / (norm * norm);
        CHECK(out[y * w + x] == doctest::Approx(expect).epsilon(1e-12));
        total += out[y * w + x];
      }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("features: deterministic, standardized, and sized to the image") {
  SplitMix64 rng(5);
  std::vector<double> v(30 * 22);
  for (auto& x : v) x = rng.uniform();
  const ChannelRaster img(30, 22, v);
  const auto a = extract_features(img);
  const auto b = extract_features(img);
  CHECK(a == b);
  CHECK(a.extent() == img.extent());
  for (int k = 0; k < a.planes(); ++k) {
    double s = 0.0, ss = 0.0;
    for (float x : a.plane(k)) {
      s += x;
      ss += double(x) * x;
    }
    const double n = static_cast<double>(img.size());
    CHECK(s / n == doctest::Approx(0.0).epsilon(1e-5));
    CHECK(ss / n == doctest::Approx(1.0).epsilon(1e-4));
  }
}

TEST_CASE("predict: zero model is uniform, ties go to the lowest class") {
  SplitMix64 rng(1);
  const auto fs = random_features(9, 7, 5, rng);
  for (int c : {2, 4}) {
    const auto p = predict(ClassifierModel(5, c), fs);
    for (double q : p.probabilities) CHECK(q == doctest::Approx(1.0 / c));
    for (auto l : p.labels) CHECK(l == 0);
  }
}

TEST_CASE("predict: a dominant output bias claims every pixel") {
  SplitMix64 rng(2);
  const auto fs = random_features(8, 8, 4, rng);
  auto m = ClassifierModel::he_uniform(4, 4, 3);
  m.layers[2].bias[2] = 1e4;
  const auto p = predict(m, fs);
  for (auto l : p.labels) CHECK(l == 2);
  for (std::size_t i = 0; i < fs.extent().size(); ++i) CHECK(p.probability(2, i) == doctest::Approx(1.0));
}

TEST_CASE("predict: matches direct convolution and handles large images in tiles") {
  SplitMix64 rng(3);
  for (auto [w, h] : {std::pair{8, 8}, std::pair{70, 67}, std::pair{1, 5}}) {
    const auto fs = random_features(w, h, 6, rng);
    const auto m = ClassifierModel::he_uniform(6, 3, rng.next_u64());
    const auto p = predict(m, fs);
    const auto ref = reference_probabilities(m, fs);
    REQUIRE(ref.size() == p.probabilities.size());
    double worst = 0.0;
    for (std::size_t i = 0; i < ref.size(); ++i) worst = std::max(worst, std::abs(ref[i] - p.probabilities[i]));
    CHECK(worst < 1e-5);
  }
}

TEST_CASE("predict: rejects a feature depth mismatch") {
  SplitMix64 rng(4);
  CHECK_THROWS_AS(predict(ClassifierModel(3, 2), random_features(4, 4, 5, rng)), ValidationError);
}

TEST_CASE("predict: argmax invariant to positive scaling of the logits") {
  SplitMix64 rng(6);
  for (int trial = 0; trial < 20; ++trial) {
    const auto fs = random_features(10, 9, 4, rng);
    auto m = ClassifierModel::he_uniform(4, 4, rng.next_u64());
    const auto base = predict(m, fs).labels;
    const double scale = rng.uniform(0.01, 50.0);
    for (auto& v : m.layers[2].weights) v *= scale;
    for (auto& v : m.layers[2].bias) v *= scale;
    CHECK(predict(m, fs).labels == base);
  }
}

TEST_CASE("loss: trivial configurations") {
  SplitMix64 rng(7);
  const auto fs = random_features(6, 6, 3, rng);
  auto m = ClassifierModel(3, 3);
  m.layers[2].bias[1] = 1e3;
  const auto p = predict(m, fs);
  TrainSignal same(fs.extent(), 3, std::vector<std::uint8_t>(36, 1));
  const auto z = loss(p, same, 10.0);
  CHECK(z.total == 0.0);
  CHECK(z.interaction == 0.0);
  CHECK(z.original == 0.0);

  const auto q = predict(ClassifierModel::he_uniform(3, 3, 1), fs);
  TrainSignal all = random_signal(fs.extent(), 3, 0.0, rng);
  for (PixelIndex i = 0; i < 36; ++i) all.mark(i, static_cast<std::uint8_t>(i % 3));
  const auto t = loss(q, all, 10.0);
  CHECK(t.original == 0.0);
  double sq = 0.0;
  for (PixelIndex i = 0; i < 36; ++i)
    for (int c = 0; c < 3; ++c) {
      const double r = (c == static_cast<int>(i % 3) ? 1.0 : 0.0) - q.probability(c, i);
      sq += r * r;
    }
  CHECK(t.total == doctest::Approx(10.0 * std::sqrt(sq)).epsilon(1e-14));
}

TEST_CASE("loss: two-pixel two-class hand computation") {
  Prediction p;
  p.extent = {2, 1};
  p.classes = 2;
  p.probabilities = {0.7, 0.4, 0.3, 0.6};  // [class][pixel]
  p.labels = {0, 1};
  TrainSignal s(p.extent, 2, {1, 1});
  s.mark(0, 0);
  // Masked pixel 0, U = class 0: residual (1 - 0.7, 0 - 0.3).
  // Unmasked pixel 1, L = class 1: residual (0 - 0.4, 1 - 0.6).
  const auto t = loss(p, s, 3.0);
  CHECK(t.interaction == doctest::Approx(std::sqrt(0.09 + 0.09)));
  CHECK(t.original == doctest::Approx(std::sqrt(0.16 + 0.16)));
  CHECK(t.total == doctest::Approx(3.0 * std::sqrt(0.18) + std::sqrt(0.32)));
}

TEST_CASE("loss: decomposition identity holds exactly on random inputs") {
  SplitMix64 rng(8);
  for (int trial = 0; trial < 50; ++trial) {
    const auto fs = random_features(7, 5, 3, rng);
    const auto s = random_signal(fs.extent(), 4, rng.uniform(), rng);
    const auto p = predict(ClassifierModel::he_uniform(3, 4, rng.next_u64(), 4), fs);
    const double f = rng.uniform(0.0, 20.0);
    const auto t = loss(p, s, f);
    CHECK(t.total == f * t.interaction + t.original);
    CHECK(t.interaction >= 0.0);
    CHECK(t.original >= 0.0);
  }
}

TEST_CASE("loss: shape mismatch is rejected") {
  SplitMix64 rng(9);
  const auto fs = random_features(5, 5, 3, rng);
  const auto p = predict(ClassifierModel(3, 2), fs);
  CHECK_THROWS_AS(loss(p, TrainSignal(Extent{4, 5}, 2, std::vector<std::uint8_t>(20, 0)), 1.0), ValidationError);
  CHECK_THROWS_AS(loss(p, TrainSignal(Extent{5, 5}, 3, std::vector<std::uint8_t>(25, 0)), 1.0), ValidationError);
}

TEST_CASE("gradient: every weight matches central differences on an 8x8 toy") {
  SplitMix64 rng(10);
  const auto fs = random_features(8, 8, 4, rng);
  const auto s = random_signal(fs.extent(), 3, 0.3, rng);
  const auto m = ClassifierModel::he_uniform(4, 3, 11);
  std::vector<std::size_t> all(m.parameter_count());
  for (std::size_t k = 0; k < all.size(); ++k) all[k] = k;
  CHECK(worst_fd_error(m, fs, s, 10.0, all) < 1e-3);
}

TEST_CASE("gradient: total equals f times interaction plus original") {
  SplitMix64 rng(12);
  const auto fs = random_features(8, 8, 3, rng);
  const auto s = random_signal(fs.extent(), 4, 0.4, rng);
  const auto m = ClassifierModel::he_uniform(3, 4, 13, 6);
  const double f = 7.5;
  const auto t = gradient(m, fs, s, f, LossPart::Total);
  const auto u = gradient(m, fs, s, f, LossPart::Interaction);
  const auto o = gradient(m, fs, s, f, LossPart::Original);
  CHECK(t.loss.total == doctest::Approx(f * t.loss.interaction + t.loss.original).epsilon(1e-15));
  for (std::size_t k = 0; k < m.parameter_count(); ++k)
    CHECK(t.grad.parameter(k) ==
          doctest::Approx(f * u.grad.parameter(k) + o.grad.parameter(k)).epsilon(1e-12).scale(1e-12));
}

TEST_CASE("gradient: zero-loss configuration has zero gradient") {
  SplitMix64 rng(14);
  const auto fs = random_features(8, 8, 3, rng);
  auto m = ClassifierModel::he_uniform(3, 2, 15, 4);
  m.layers[2].bias[1] = 1e3;
  TrainSignal s(fs.extent(), 2, std::vector<std::uint8_t>(64, 1));
  s.mark(5, 1);
  const auto g = gradient(m, fs, s, 10.0);
  CHECK(g.loss.total == 0.0);
  for (std::size_t k = 0; k < g.grad.parameter_count(); ++k) CHECK(g.grad.parameter(k) == 0.0);
}

TEST_CASE("gradient: region restriction equals the loss on the cropped problem") {
  SplitMix64 rng(16);
  const auto fs = random_features(12, 10, 3, rng);
  const auto s = random_signal(fs.extent(), 3, 0.3, rng);
  const auto m = ClassifierModel::he_uniform(3, 3, 17, 4);
  const Rect r{3, 2, 6, 5};
  const auto g = gradient(m, fs, s, 4.0, LossPart::Total, r);
  const auto p = predict(m, fs);
  double su = 0.0, so = 0.0;
  for (int y = r.y; y < r.bottom(); ++y)
    for (int x = r.x; x < r.right(); ++x) {
      const PixelIndex i = fs.extent().index(x, y);
      const int want = s.mask[i] ? s.target[i] : s.previous[i];
      for (int c = 0; c < 3; ++c) {
        const double d = (c == want ? 1.0 : 0.0) - p.probability(c, i);
        (s.mask[i] ? su : so) += d * d;
      }
    }
  CHECK(g.loss.interaction == doctest::Approx(std::sqrt(su)));
  CHECK(g.loss.original == doctest::Approx(std::sqrt(so)));
}

TEST_CASE("finetune: empty mask is rejected") {
  SplitMix64 rng(18);
  const auto fs = random_features(8, 8, 3, rng);
  TrainSignal s(fs.extent(), 2, std::vector<std::uint8_t>(64, 0));
  try {
    finetune(ClassifierModel::he_uniform(3, 2, 1), fs, s, TrainConfig{});
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(std::string(e.what()) == "no user input to learn from");
  }
}

TEST_CASE("finetune: U equal to current predictions never degrades") {
  SplitMix64 rng(19);
  const auto fs = random_features(24, 24, 4, rng);
  const auto m = ClassifierModel::he_uniform(4, 3, 20);
  const auto p = predict(m, fs);
  TrainSignal s(fs.extent(), 3, p.labels);
  for (PixelIndex i = 0; i < fs.extent().size(); i += 7) s.mark(i, p.labels[i]);
  TrainConfig cfg;
  cfg.max_steps = 60;
  const auto r = finetune(m, fs, s, cfg);
  CHECK(r.best.total <= r.initial.total);
  CHECK(loss(predict(r.model, fs), s, cfg.focusing_factor).total <= loss(p, s, cfg.focusing_factor).total);
}

TEST_CASE("finetune: never returns a worse model on random problems") {
  SplitMix64 rng(21);
  for (int trial = 0; trial < 5; ++trial) {
    const auto fs = random_features(16, 16, 3, rng);
    const auto s = random_signal(fs.extent(), 3, 0.2, rng);
    const auto m = ClassifierModel::he_uniform(3, 3, rng.next_u64());
    TrainConfig cfg;
    cfg.max_steps = 40;
    cfg.learning_rate = rng.uniform(0.01, 2.0);
    cfg.seed = rng.next_u64();
    const auto r = finetune(m, fs, s, cfg);
    const double before = total_loss(m, fs, s, cfg.focusing_factor);
    CHECK(total_loss(r.model, fs, s, cfg.focusing_factor) <= before);
  }
}

TEST_CASE("finetune: respects the wall-clock budget") {
  SplitMix64 rng(22);
  const auto fs = random_features(128, 128, kFeaturePlanes, rng);
  const auto s = random_signal(fs.extent(), 4, 0.05, rng);
  TrainConfig cfg;
  cfg.budget_seconds = 1.0;
  cfg.plateau_tolerance = 0.0;  // keep going until the clock runs out
  const auto t0 = std::chrono::steady_clock::now();
  const auto r = finetune(ClassifierModel::he_uniform(kFeaturePlanes, 4, 1), fs, s, cfg);
  const double wall = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  CHECK(r.stop_reason == "budget");
  // One tile step plus one whole-image evaluation is well under a second here.
  CHECK(wall <= cfg.budget_seconds + 1.0);
  CHECK(r.seconds <= wall);
}

TEST_CASE("finetune: progress is monotone and ends at 1") {
  SplitMix64 rng(23);
  const auto fs = random_features(20, 20, 3, rng);
  const auto s = random_signal(fs.extent(), 2, 0.3, rng);
  TrainConfig cfg;
  cfg.max_steps = 50;
  std::vector<double> seen;
  finetune(ClassifierModel::he_uniform(3, 2, 2), fs, s, cfg, [&](double p) { seen.push_back(p); });
  REQUIRE(!seen.empty());
  for (std::size_t i = 1; i < seen.size(); ++i) CHECK(seen[i] >= seen[i - 1]);
  CHECK(seen.front() >= 0.0);
  CHECK(seen.back() == 1.0);
}

TEST_CASE("finetune: deterministic for a fixed seed") {
  SplitMix64 rng(24);
  const auto fs = random_features(20, 20, 3, rng);
  const auto s = random_signal(fs.extent(), 3, 0.3, rng);
  TrainConfig cfg;
  cfg.max_steps = 30;
  const auto m = ClassifierModel::he_uniform(3, 3, 4);
  CHECK(finetune(m, fs, s, cfg).model == finetune(m, fs, s, cfg).model);
}

TEST_CASE("finetune: masked pixels adopt the user's class on a 32x32 toy") {
  const auto img = vertical_bar_image(32, 32, 10, 22, 0.8);
  const auto fs = extract_features(img);
  // Previous labels say "all background"; the user marks bar pixels as class 1
  // and a few background pixels as class 0.
  TrainSignal s(fs.extent(), 2, std::vector<std::uint8_t>(fs.extent().size(), 0));
  for (int y = 2; y < 30; y += 3) {
    for (int x = 11; x < 21; x += 2) s.mark(fs.extent().index(x, y), 1);
    s.mark(fs.extent().index(3, y), 0);
    s.mark(fs.extent().index(28, y), 0);
  }
  TrainConfig cfg;
  cfg.focusing_factor = 10.0;
  cfg.max_steps = 400;
  const auto r = finetune(ClassifierModel::he_uniform(kFeaturePlanes, 2, 7), fs, s, cfg);
  const auto p = predict(r.model, fs);
  std::size_t ok = 0;
  for (PixelIndex i = 0; i < s.mask.size(); ++i) ok += s.mask[i] && p.labels[i] == s.target[i];
  CHECK(static_cast<double>(ok) >= 0.95 * static_cast<double>(s.masked_count()));
}

TEST_CASE("finetune: scribbles on part of a mislabeled neurite reduce error on the whole region") {
  PhantomSpec spec;
  spec.seed = 3;
  spec.width = spec.height = 96;
  const auto ph = generate_phantom(spec);
  const auto fs = extract_features(ph.venus);
  // Mislabel 30% of one neurite.
  const CorruptionOp op{CorruptionType::FlipRegion, 1, 0.3};
  const auto cor = corrupt(ph.truth, std::span(&op, 1), 5);
  REQUIRE(!cor.manifest.empty());
  const Rect box = cor.manifest.front().bbox;
  std::vector<std::uint8_t> labels(ph.truth.labels.codes().begin(), ph.truth.labels.codes().end());
  std::vector<PixelIndex> wrong;
  for (PixelIndex i = 0; i < labels.size(); ++i) {
    const Point q = fs.extent().point(i);
    if (box.contains(q.x, q.y) && cor.labels[i] != labels[i]) {
      labels[i] = cor.labels[i];
      wrong.push_back(i);
    }
  }
  REQUIRE(wrong.size() >= 20);

  // Session model from automatic scribbles, then one round of user scribbles on
  // every twentieth wrong pixel.
  BootstrapOptions bo;
  bo.train.max_steps = 300;
  TrainConfig fit_cfg = bo.train;
  const auto start = finetune(ClassifierModel::he_uniform(kFeaturePlanes, 4, 1), fs,
                              structure_scribbles(enhance(ph.venus, bo.venus_enhancement), bo), fit_cfg)
                         .model;
  TrainSignal s(fs.extent(), 4, labels);
  for (std::size_t k = 0; k < wrong.size(); k += 20) s.mark(wrong[k], ph.truth.labels[wrong[k]]);
  TrainConfig cfg;
  cfg.max_steps = 300;
  const auto after = predict(finetune(start, fs, s, cfg).model, fs);
  std::size_t errors = 0;
  for (PixelIndex i : wrong) errors += after.labels[i] != ph.truth.labels[i];
  MESSAGE("wrong region " << wrong.size() << " px, after one round " << errors);
  CHECK(errors < wrong.size());
}

TEST_CASE("checkpoint: round trip to float32 precision") {
  const auto m = ClassifierModel::he_uniform(kFeaturePlanes, 4, 9);
  const auto bytes = encode_checkpoint(m);
  CHECK(std::string(bytes.begin(), bytes.begin() + 5) == "MVCL1");
  CHECK(bytes.size() == 5 + 16 + 4 * m.parameter_count());
  const auto back = decode_checkpoint(bytes);
  REQUIRE(back.parameter_count() == m.parameter_count());
  for (std::size_t k = 0; k < m.parameter_count(); ++k)
    CHECK(back.parameter(k) == static_cast<double>(static_cast<float>(m.parameter(k))));
  CHECK(encode_checkpoint(back) == bytes);

  const auto path = temp_path("model.mvcl");
  save_checkpoint(m, path);
  CHECK(load_checkpoint(path) == back);
  CHECK_THROWS_AS(load_checkpoint(temp_path("missing.mvcl")), IoError);
}

TEST_CASE("checkpoint: corrupt blobs are rejected") {
  const auto bytes = encode_checkpoint(ClassifierModel::he_uniform(3, 2, 1, 4));
  auto bad_magic = bytes;
  bad_magic[0] = 'X';
  CHECK_THROWS_AS(decode_checkpoint(bad_magic), ValidationError);
  CHECK_THROWS_AS(decode_checkpoint(std::span(bytes).first(bytes.size() - 1)), ValidationError);
  auto trailing = bytes;
  trailing.push_back(0);
  CHECK_THROWS_AS(decode_checkpoint(trailing), ValidationError);
  auto nan = bytes;
  const float q = std::nanf("");
  std::memcpy(nan.data() + 21, &q, 4);
  CHECK_THROWS_AS(decode_checkpoint(nan), ValidationError);
}

TEST_CASE("TrainConfig: JSON round trip and validation") {
  TrainConfig c;
  c.focusing_factor = 3.5;
  c.max_steps = 17;
  c.seed = 99;
  const nlohmann::json j = c;
  CHECK(j.get<TrainConfig>() == c);
  CHECK(nlohmann::json::parse(j.dump()).get<TrainConfig>() == c);
  CHECK(nlohmann::json::object().get<TrainConfig>() == TrainConfig{});
  CHECK_THROWS_AS((nlohmann::json{{"focus", 1.0}}.get<TrainConfig>()), ValidationError);
  CHECK_THROWS_AS((nlohmann::json{{"tile_size", 0}}.get<TrainConfig>()), ValidationError);
  CHECK_THROWS_AS((nlohmann::json{{"budget_seconds", -1.0}}.get<TrainConfig>()), ValidationError);
}

TEST_CASE("otsu_threshold: separates two modes, degenerate inputs give 1") {
  std::vector<double> v;
  for (int i = 0; i < 100; ++i) v.push_back(0.1 + 0.001 * (i % 10));
  for (int i = 0; i < 50; ++i) v.push_back(0.8 + 0.001 * (i % 10));
  const double t = otsu_threshold(v);
  CHECK(t >= 0.109);
  CHECK(t < 0.8);
  CHECK(otsu_threshold(std::vector<double>(10, 0.3)) == 1.0);
  CHECK(otsu_threshold({}) == 1.0);
}

TEST_CASE("bootstrap: blank image gives all background") {
  const ChannelRaster blank(40, 30, 0.0);
  const auto r = bootstrap_initial(blank, blank);
  CHECK(r.labels == StructureLabelRaster(40, 30));
  CHECK(r.mito_foreground.count() == 0);
}

TEST_CASE("bootstrap: imported labels and masks pass through unchanged") {
  const auto img = vertical_bar_image(24, 20, 8, 14, 0.7);
  std::vector<std::uint8_t> codes(img.size(), 0);
  for (std::size_t i = 0; i < codes.size(); i += 3) codes[i] = static_cast<std::uint8_t>(i % 4);
  const StructureLabelRaster imported(24, 20, codes);
  BinaryMask mito(24, 20);
  mito.bits[17] = 1;
  BootstrapOptions o;
  o.train.max_steps = 5;
  const auto r = bootstrap_initial(img, img, o, imported, mito);
  CHECK(r.labels == imported);
  CHECK(r.mito_foreground == mito);
}

TEST_CASE("bootstrap: structure foreground recall on a phantom") {
  PhantomSpec spec;
  spec.seed = 4;
  spec.cell_body_count = 1;
  const auto ph = generate_phantom(spec);
  const auto r = bootstrap_initial(ph.venus, ph.mito);
  std::size_t fg = 0, hit = 0, mfg = 0, mhit = 0;
  for (std::size_t i = 0; i < ph.venus.size(); ++i) {
    if (ph.truth.labels[i] != 0) {
      ++fg;
      hit += r.labels[i] != 0;
    }
  }
  for (const auto& o : ph.truth.objects)
    for (PixelIndex i : o.pixels) {
      ++mfg;
      mhit += r.mito_foreground[i];
    }
  REQUIRE(fg > 0);
  CHECK(static_cast<double>(hit) / static_cast<double>(fg) >= 0.8);
  CHECK(static_cast<double>(mhit) / static_cast<double>(mfg) >= 0.8);
  CHECK(r.structure_model.classes() == 4);
  CHECK(r.mito_model.classes() == 2);
}
