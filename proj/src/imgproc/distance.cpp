#include "mitoviz/imgproc/distance.hpp"

#include <cmath>
#include <limits>

namespace mitoviz {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

// Lower envelope of parabolas (Felzenszwalb and Huttenlocher), one line.
void transform_line(const double* f, double* d, int n, std::vector<int>& v, std::vector<double>& z) {
  v.assign(n, 0);
  z.assign(n + 1, 0.0);
  int k = -1;
  for (int q = 0; q < n; ++q) {
    if (f[q] == kInf) continue;
    if (k < 0) {
      k = 0;
      v[0] = q;
      z[0] = -kInf;
      z[1] = kInf;
      continue;
    }
    const auto intersect = [&](int p) {
      return ((f[q] + double(q) * q) - (f[p] + double(p) * p)) / (2.0 * (q - p));
    };
    double s = intersect(v[k]);
    while (s <= z[k]) s = intersect(v[--k]);
    ++k;
    v[k] = q;
    z[k] = s;
    z[k + 1] = kInf;
  }
  if (k < 0) {
    for (int q = 0; q < n; ++q) d[q] = kInf;
    return;
  }
  int j = 0;
  for (int q = 0; q < n; ++q) {
    while (z[j + 1] < q) ++j;
    const double dq = q - v[j];
    d[q] = dq * dq + f[v[j]];
  }
}

}  // namespace

std::vector<double> squared_distance_to_background(const BinaryMask& mask) {
  const int w = mask.width(), h = mask.height();
  std::vector<double> grid(mask.extent.size());
  for (std::size_t i = 0; i < grid.size(); ++i) grid[i] = mask.bits[i] ? kInf : 0.0;

  std::vector<int> v;
  std::vector<double> z, in(std::max(w, h)), out(std::max(w, h));
  for (int x = 0; x < w; ++x) {
    for (int y = 0; y < h; ++y) in[y] = grid[static_cast<std::size_t>(y) * w + x];
    transform_line(in.data(), out.data(), h, v, z);
    for (int y = 0; y < h; ++y) grid[static_cast<std::size_t>(y) * w + x] = out[y];
  }
  for (int y = 0; y < h; ++y) {
    double* row = grid.data() + static_cast<std::size_t>(y) * w;
    std::copy(row, row + w, in.begin());
    transform_line(in.data(), row, w, v, z);
  }
  return grid;
}

}  // namespace mitoviz
