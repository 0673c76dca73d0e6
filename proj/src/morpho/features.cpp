#include "mitoviz/morpho/features.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <numbers>
#include <queue>

#include "mitoviz/core/error.hpp"

namespace mitoviz {
namespace {

// Object pixels copied into a bitmap with a one-pixel empty border.
struct Patch {
  int x0 = 0, y0 = 0, w = 0, h = 0;
  std::vector<std::uint8_t> on;

  explicit Patch(const PixelSet& s) {
    const Rect b = s.bbox();
    x0 = b.x - 1;
    y0 = b.y - 1;
    w = b.w + 2;
    h = b.h + 2;
    on.assign(static_cast<std::size_t>(w) * h, 0);
    for (PixelIndex i : s) {
      const Point p = s.extent().point(i);
      on[(p.y - y0) * w + (p.x - x0)] = 1;
    }
  }
  bool at(int x, int y) const { return x >= 0 && y >= 0 && x < w && y < h && on[y * w + x]; }
};

// Clockwise on screen (y down), starting west.
constexpr std::array<Point, 8> kRing = {{{-1, 0}, {-1, -1}, {0, -1}, {1, -1}, {1, 0}, {1, 1}, {0, 1}, {-1, 1}}};

int ring_index(int dx, int dy) {
  for (int k = 0; k < 8; ++k)
    if (kRing[k].x == dx && kRing[k].y == dy) return k;
  return -1;
}

}  // namespace

std::string to_string(Feature f) {
  switch (f) {
    case Feature::Area: return "area";
    case Feature::Circularity: return "circularity";
    case Feature::Eccentricity: return "eccentricity";
    case Feature::Length: return "length";
  }
  return "unknown";
}

Feature feature_from_string(const std::string& s) {
  for (Feature f : kNumericFeatures)
    if (to_string(f) == s) return f;
  throw ValidationError("feature", "unknown feature '" + s + "'");
}

double FeatureVector::value(Feature f) const {
  switch (f) {
    case Feature::Area: return area_um2;
    case Feature::Circularity: return circularity;
    case Feature::Eccentricity: return eccentricity;
    case Feature::Length: return length_um;
  }
  return 0.0;
}

double contour_perimeter(const PixelSet& object) {
  if (object.size() <= 1) return 0.0;
  const Patch p(object);
  // The first pixel in raster order has an empty west neighbour.
  Point start{};
  for (int i = 0; i < p.w * p.h; ++i) {
    if (p.on[i]) {
      start = {i % p.w, i / p.w};
      break;
    }
  }
  Point c = start;
  Point back{start.x - 1, start.y};
  Point first_move{0, 0};
  double length = 0.0;
  const std::size_t cap = 8 * object.size() + 8;
  for (std::size_t step = 0; step < cap; ++step) {
    const int b = ring_index(back.x - c.x, back.y - c.y);
    int found = -1;
    for (int t = 1; t <= 8; ++t) {
      const int k = (b + t) % 8;
      if (p.at(c.x + kRing[k].x, c.y + kRing[k].y)) {
        found = k;
        break;
      }
    }
    if (found < 0) return 0.0;
    const Point move = kRing[found];
    if (step == 0) {
      first_move = move;
    } else if (c == start && move == first_move) {
      break;
    }
    const int prev = (found + 7) % 8;
    back = {c.x + kRing[prev].x, c.y + kRing[prev].y};
    c = {c.x + move.x, c.y + move.y};
    length += (move.x != 0 && move.y != 0) ? std::numbers::sqrt2 : 1.0;
  }
  return length;
}

std::size_t crack_perimeter(const PixelSet& object) {
  const Patch p(object);
  std::size_t n = 0;
  for (int y = 1; y + 1 < p.h; ++y)
    for (int x = 1; x + 1 < p.w; ++x)
      if (p.at(x, y)) n += !p.at(x - 1, y) + !p.at(x + 1, y) + !p.at(x, y - 1) + !p.at(x, y + 1);
  return n;
}

PixelSet skeletonize(const PixelSet& object) {
  if (object.empty()) return object;
  Patch p(object);
  auto px = [&](int x, int y) -> int { return p.at(x, y) ? 1 : 0; };
  bool changed = true;
  std::vector<int> kill;
  while (changed) {
    changed = false;
    for (int pass = 0; pass < 2; ++pass) {
      kill.clear();
      for (int y = 1; y + 1 < p.h; ++y) {
        for (int x = 1; x + 1 < p.w; ++x) {
          if (!p.at(x, y)) continue;
          // P2..P9 clockwise from north.
          const int n[8] = {px(x, y - 1),     px(x + 1, y - 1), px(x + 1, y), px(x + 1, y + 1),
                            px(x, y + 1),     px(x - 1, y + 1), px(x - 1, y), px(x - 1, y - 1)};
          int b = 0, a = 0;
          for (int k = 0; k < 8; ++k) {
            b += n[k];
            a += n[k] == 0 && n[(k + 1) % 8] == 1;
          }
          if (b < 2 || b > 6 || a != 1) continue;
          const int p2 = n[0], p4 = n[2], p6 = n[4], p8 = n[6];
          const bool ok = pass == 0 ? (p2 * p4 * p6 == 0 && p4 * p6 * p8 == 0)
                                    : (p2 * p4 * p8 == 0 && p2 * p6 * p8 == 0);
          if (ok) kill.push_back(y * p.w + x);
        }
      }
      for (int i : kill) p.on[i] = 0;
      changed = changed || !kill.empty();
    }
  }
  std::vector<PixelIndex> out;
  const Extent& e = object.extent();
  for (int y = 0; y < p.h; ++y)
    for (int x = 0; x < p.w; ++x)
      if (p.on[y * p.w + x]) out.push_back(e.index(x + p.x0, y + p.y0));
  if (out.empty()) {
    double cx = 0.0, cy = 0.0;
    for (PixelIndex i : object) {
      cx += e.point(i).x;
      cy += e.point(i).y;
    }
    cx /= static_cast<double>(object.size());
    cy /= static_cast<double>(object.size());
    PixelIndex best = object.indices().front();
    double best_d = std::numeric_limits<double>::infinity();
    for (PixelIndex i : object) {
      const double d = std::hypot(e.point(i).x - cx, e.point(i).y - cy);
      if (d < best_d) {
        best_d = d;
        best = i;
      }
    }
    out.push_back(best);
  }
  return PixelSet(e, std::move(out));
}

double geodesic_diameter(const PixelSet& pixels) {
  if (pixels.size() <= 1) return 0.0;
  const Patch p(pixels);
  const int n = p.w * p.h;
  auto sweep = [&](int source, int& farthest) {
    std::vector<double> dist(n, std::numeric_limits<double>::infinity());
    using Item = std::pair<double, int>;
    std::priority_queue<Item, std::vector<Item>, std::greater<>> q;
    dist[source] = 0.0;
    q.push({0.0, source});
    double best = 0.0;
    farthest = source;
    while (!q.empty()) {
      const auto [d, i] = q.top();
      q.pop();
      if (d > dist[i]) continue;
      if (d > best || (d == best && i < farthest)) {
        best = d;
        farthest = i;
      }
      const int x = i % p.w, y = i / p.w;
      for (const Point& r : kRing) {
        if (!p.at(x + r.x, y + r.y)) continue;
        const int j = (y + r.y) * p.w + (x + r.x);
        const double nd = d + ((r.x != 0 && r.y != 0) ? std::numbers::sqrt2 : 1.0);
        if (nd < dist[j]) {
          dist[j] = nd;
          q.push({nd, j});
        }
      }
    }
    return best;
  };
  int start = 0;
  while (!p.on[start]) ++start;
  int u = start, v = start;
  sweep(start, u);
  return sweep(u, v);
}

double eccentricity(const PixelSet& object) {
  if (object.empty()) return 0.0;
  const Extent& e = object.extent();
  const double n = static_cast<double>(object.size());
  double mx = 0.0, my = 0.0;
  for (PixelIndex i : object) {
    mx += e.point(i).x;
    my += e.point(i).y;
  }
  mx /= n;
  my /= n;
  double sxx = 0.0, syy = 0.0, sxy = 0.0;
  for (PixelIndex i : object) {
    const double dx = e.point(i).x - mx, dy = e.point(i).y - my;
    sxx += dx * dx;
    syy += dy * dy;
    sxy += dx * dy;
  }
  sxx = sxx / n + 1.0 / 12.0;
  syy = syy / n + 1.0 / 12.0;
  sxy /= n;
  const double half_trace = 0.5 * (sxx + syy);
  const double disc = std::sqrt(std::max(0.0, 0.25 * (sxx - syy) * (sxx - syy) + sxy * sxy));
  const double l1 = half_trace + disc, l2 = std::max(0.0, half_trace - disc);
  if (l1 <= 0.0) return 0.0;
  return std::sqrt(std::max(0.0, 1.0 - l2 / l1));
}

FeatureVector compute_features(const MitoObject& object, const StructureLabelRaster& labels, double pixel_size_um) {
  if (object.pixels.empty()) throw ValidationError("object", "object has no pixels");
  if (!(object.pixels.extent() == labels.extent()))
    throw ValidationError("object", "object lies outside the label raster");
  if (!(pixel_size_um > 0.0)) throw ValidationError("pixel_size_um", "must be > 0");
  const double n = static_cast<double>(object.pixels.size());
  FeatureVector f;
  f.area_um2 = n * pixel_size_um * pixel_size_um;
  const double perimeter = contour_perimeter(object.pixels);
  f.circularity = perimeter > 0.0 ? std::min(1.0, 4.0 * std::numbers::pi * n / (perimeter * perimeter)) : 1.0;
  f.eccentricity = eccentricity(object.pixels);
  f.length_um = geodesic_diameter(skeletonize(object.pixels)) * pixel_size_um;
  std::array<std::size_t, kStructureClassCount> votes{};
  for (PixelIndex i : object.pixels) ++votes[labels[i]];
  std::size_t best = 0;
  for (std::size_t c = 1; c < votes.size(); ++c)
    if (votes[c] > votes[best]) best = c;
  f.structure = static_cast<StructureClass>(best);
  return f;
}

std::vector<MeasuredObject> measure(const MitoState& state, const StructureLabelRaster& labels,
                                    double pixel_size_um) {
  std::vector<MeasuredObject> out;
  out.reserve(state.objects.size());
  for (const MitoObject& o : state.objects)
    out.push_back({o.id, compute_features(o, labels, pixel_size_um), o.pixels.size()});
  return out;
}

}  // namespace mitoviz
