#include "mitoviz/learn/features.hpp"

#include <cmath>

#include "mitoviz/core/error.hpp"

namespace mitoviz {

namespace {

constexpr double kGaussScales[] = {1, 2, 4, 8};
constexpr double kDerivativeScales[] = {1, 2, 4};
constexpr double kStdScales[] = {2, 4};
constexpr double kRidgeScales[] = {1, 2, 4};

// Half-sample symmetric reflection: -1 -> 0, n -> n - 1.
int mirror(int i, int n) {
  const int period = 2 * n;
  i %= period;
  if (i < 0) i += period;
  return i < n ? i : period - 1 - i;
}

using Plane = std::vector<double>;

struct Sampler {
  const Plane& p;
  Extent e;
  double operator()(int x, int y) const {
    return p[e.index(mirror(x, e.width), mirror(y, e.height))];
  }
};

Plane gradient_magnitude(const Plane& g, Extent e) {
  Sampler s{g, e};
  Plane out(e.size());
  for (int y = 0; y < e.height; ++y) {
    for (int x = 0; x < e.width; ++x) {
      const double gx = 0.5 * (s(x + 1, y) - s(x - 1, y));
      const double gy = 0.5 * (s(x, y + 1) - s(x, y - 1));
      out[e.index(x, y)] = std::sqrt(gx * gx + gy * gy);
    }
  }
  return out;
}

Plane laplacian(const Plane& g, Extent e) {
  Sampler s{g, e};
  Plane out(e.size());
  for (int y = 0; y < e.height; ++y) {
    for (int x = 0; x < e.width; ++x) {
      out[e.index(x, y)] = s(x + 1, y) + s(x - 1, y) + s(x, y + 1) + s(x, y - 1) - 4.0 * s(x, y);
    }
  }
  return out;
}

// Bright-tube response: -min(Hessian eigenvalue), clipped at 0.
Plane ridge(const Plane& g, Extent e) {
  Sampler s{g, e};
  Plane out(e.size());
  for (int y = 0; y < e.height; ++y) {
    for (int x = 0; x < e.width; ++x) {
      const double c = s(x, y);
      const double hxx = s(x + 1, y) - 2.0 * c + s(x - 1, y);
      const double hyy = s(x, y + 1) - 2.0 * c + s(x, y - 1);
      const double hxy = 0.25 * (s(x + 1, y + 1) - s(x + 1, y - 1) - s(x - 1, y + 1) + s(x - 1, y - 1));
      const double half_diff = 0.5 * (hxx - hyy);
      const double lmin = 0.5 * (hxx + hyy) - std::sqrt(half_diff * half_diff + hxy * hxy);
      out[e.index(x, y)] = std::max(0.0, -lmin);
    }
  }
  return out;
}

void standardize_into(const Plane& p, std::span<float> out) {
  const double n = static_cast<double>(p.size());
  double mean = 0.0;
  for (double v : p) mean += v;
  mean /= n;
  double var = 0.0;
  for (double v : p) var += (v - mean) * (v - mean);
  const double sd = std::sqrt(var / n);
  if (!(sd > 1e-9)) {
    std::fill(out.begin(), out.end(), 0.0f);
    return;
  }
  for (std::size_t i = 0; i < p.size(); ++i) out[i] = static_cast<float>((p[i] - mean) / sd);
}

}  // namespace

FeatureStack::FeatureStack(int width, int height, int planes)
    : extent_{width, height}, planes_(planes), data_(extent_.size() * static_cast<std::size_t>(planes), 0.0f) {
  if (width <= 0 || height <= 0 || planes <= 0) throw ValidationError("features", "feature stack must be non-empty");
}

std::span<float> FeatureStack::plane(int k) {
  return std::span<float>(data_).subspan(static_cast<std::size_t>(k) * extent_.size(), extent_.size());
}

std::span<const float> FeatureStack::plane(int k) const {
  return std::span<const float>(data_).subspan(static_cast<std::size_t>(k) * extent_.size(), extent_.size());
}

std::vector<std::string> feature_plane_names() {
  std::vector<std::string> names{"identity"};
  auto add = [&](const char* stem, auto& scales) {
    for (double s : scales) names.push_back(std::string(stem) + "_s" + std::to_string(static_cast<int>(s)));
  };
  add("gauss", kGaussScales);
  add("gradmag", kDerivativeScales);
  add("laplace", kDerivativeScales);
  add("localstd", kStdScales);
  add("ridge", kRidgeScales);
  return names;
}

std::vector<double> gaussian_blur(std::span<const double> values, Extent e, double sigma) {
  const int r = static_cast<int>(std::ceil(3.0 * sigma));
  std::vector<double> k(2 * r + 1);
  double sum = 0.0;
  for (int i = -r; i <= r; ++i) sum += k[i + r] = std::exp(-0.5 * i * i / (sigma * sigma));
  for (double& v : k) v /= sum;

  std::vector<double> tmp(e.size()), out(e.size());
  for (int y = 0; y < e.height; ++y) {
    for (int x = 0; x < e.width; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) acc += k[i + r] * values[e.index(mirror(x + i, e.width), y)];
      tmp[e.index(x, y)] = acc;
    }
  }
  for (int y = 0; y < e.height; ++y) {
    for (int x = 0; x < e.width; ++x) {
      double acc = 0.0;
      for (int i = -r; i <= r; ++i) acc += k[i + r] * tmp[e.index(x, mirror(y + i, e.height))];
      out[e.index(x, y)] = acc;
    }
  }
  return out;
}

FeatureStack extract_features(const ChannelRaster& channel) {
  const Extent e = channel.extent();
  FeatureStack stack(e.width, e.height, kFeaturePlanes);
  const Plane raw(channel.values().begin(), channel.values().end());
  Plane squared(raw.size());
  for (std::size_t i = 0; i < raw.size(); ++i) squared[i] = raw[i] * raw[i];

  int k = 0;
  auto emit = [&](const Plane& p) { standardize_into(p, stack.plane(k++)); };
  auto blur = [&](double s) { return gaussian_blur(raw, e, s); };

  emit(raw);
  for (double s : kGaussScales) emit(blur(s));
  for (double s : kDerivativeScales) emit(gradient_magnitude(blur(s), e));
  for (double s : kDerivativeScales) emit(laplacian(blur(s), e));
  for (double s : kStdScales) {
    const Plane m = blur(s);
    const Plane m2 = gaussian_blur(squared, e, s);
    Plane sd(raw.size());
    for (std::size_t i = 0; i < sd.size(); ++i) sd[i] = std::sqrt(std::max(0.0, m2[i] - m[i] * m[i]));
    emit(sd);
  }
  for (double s : kRidgeScales) emit(ridge(blur(s), e));
  return stack;
}

}  // namespace mitoviz
