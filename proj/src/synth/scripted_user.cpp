#include "mitoviz/synth/scripted_user.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "mitoviz/core/error.hpp"
#include "mitoviz/imgproc/components.hpp"
#include "mitoviz/imgproc/distance.hpp"

namespace mitoviz {

namespace {

PixelIndex nearest_to_centroid(const Extent& e, std::span<const PixelIndex> candidates, double cx, double cy) {
  PixelIndex best = candidates.front();
  double best_d = std::numeric_limits<double>::infinity();
  for (PixelIndex i : candidates) {
    const Point p = e.point(i);
    const double d = (p.x - cx) * (p.x - cx) + (p.y - cy) * (p.y - cy);
    if (d < best_d) {
      best_d = d;
      best = i;
    }
  }
  return best;
}

std::array<double, 2> xy(const Extent& e, PixelIndex i) {
  const Point p = e.point(i);
  return {double(p.x), double(p.y)};
}

// Chain of pixels inside the set between two far-apart members.
std::vector<std::array<double, 2>> spine(const PixelSet& s) {
  const Extent e = s.extent();
  auto bfs = [&](PixelIndex from, std::vector<PixelIndex>& parent) {
    parent.assign(e.size(), std::numeric_limits<PixelIndex>::max());
    std::deque<PixelIndex> q{from};
    parent[from] = from;
    PixelIndex last = from;
    while (!q.empty()) {
      const PixelIndex i = q.front();
      q.pop_front();
      last = i;
      const Point p = e.point(i);
      const int nb[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
      for (const auto& d : nb) {
        const int x = p.x + d[0], y = p.y + d[1];
        if (!e.in_bounds(x, y)) continue;
        const PixelIndex j = e.index(x, y);
        if (parent[j] == std::numeric_limits<PixelIndex>::max() && s.contains(j)) {
          parent[j] = i;
          q.push_back(j);
        }
      }
    }
    return last;
  };
  std::vector<PixelIndex> parent;
  const PixelIndex a = bfs(s.indices().front(), parent);
  const PixelIndex b = bfs(a, parent);
  std::vector<std::array<double, 2>> pts;
  for (PixelIndex i = b;; i = parent[i]) {
    pts.push_back(xy(e, i));
    if (i == a) break;
  }
  return pts;
}

void nearest_pair(const PixelSet& a, const PixelSet& b, PixelIndex& pa, PixelIndex& pb) {
  const Extent e = a.extent();
  double best = std::numeric_limits<double>::infinity();
  for (PixelIndex i : a) {
    const Point p = e.point(i);
    for (PixelIndex j : b) {
      const Point q = e.point(j);
      const double d = double(p.x - q.x) * (p.x - q.x) + double(p.y - q.y) * (p.y - q.y);
      if (d < best) {
        best = d;
        pa = i;
        pb = j;
      }
    }
  }
}

}  // namespace

StructureUserSession scripted_structure_user(const StructureLabelRaster& current, const StructureLabelRaster& truth,
                                             const ChannelRaster& venus, double sigma_s,
                                             const StructureUserBudget& budget) {
  const Extent e = truth.extent();
  if (!(current.extent() == e) || !(venus.extent() == e)) {
    throw ValidationError("labels", "labels, truth and channel dimensions differ");
  }
  StructureUserSession out;
  out.labels = current;

  std::array<std::vector<double>, kStructureClassCount> room;  // squared distance to another true class
  for (int c = 0; c < kStructureClassCount; ++c) {
    BinaryMask m(e.width, e.height);
    for (std::size_t i = 0; i < e.size(); ++i) m.bits[i] = truth[i] == c;
    room[c] = squared_distance_to_background(m);
  }

  std::vector<std::uint8_t> touched(e.size(), 0), ignored(e.size(), 0), addressed(e.size(), 0);
  auto mark_addressed = [&](PixelIndex c) {
    const Point p = e.point(c);
    const int r = static_cast<int>(std::ceil(budget.spacing));
    for (int dy = -r; dy <= r; ++dy)
      for (int dx = -r; dx <= r; ++dx)
        if (dx * dx + dy * dy < budget.spacing * budget.spacing && e.in_bounds(p.x + dx, p.y + dy))
          addressed[e.index(p.x + dx, p.y + dy)] = 1;
  };
  while (static_cast<int>(out.strokes.size()) < budget.max_strokes) {
    BinaryMask wrong(e.width, e.height);
    for (std::size_t i = 0; i < e.size(); ++i) wrong.bits[i] = out.labels[i] != truth[i] && !ignored[i] && !addressed[i];
    auto comps = label_components(wrong);
    if (comps.empty()) break;
    const auto largest = std::max_element(comps.begin(), comps.end(), [](const auto& a, const auto& b) {
      return a.size() < b.size();
    });
    const PixelSet& comp = *largest;

    std::vector<PixelIndex> qualifying;
    double cx = 0.0, cy = 0.0;
    for (PixelIndex i : comp) {
      const Point p = e.point(i);
      cx += p.x;
      cy += p.y;
      const bool bg = truth[i] == 0;
      if (passes(venus[i], bg ? Threshold::Below : Threshold::AtOrAbove, sigma_s)) qualifying.push_back(i);
    }
    if (qualifying.empty()) {
      for (PixelIndex i : comp) ignored[i] = 1;
      continue;
    }
    cx /= comp.size();
    cy /= comp.size();
    const PixelIndex seed = nearest_to_centroid(e, qualifying, cx, cy);
    const auto cls = static_cast<StructureClass>(truth[seed]);

    double radius = std::min(budget.max_radius, std::sqrt(room[truth[seed]][seed]));
    BrushResult result;
    std::size_t fresh = 0;
    while (true) {
      const BrushStroke stroke{seed, radius, cls, sigma_s};
      result = apply_brush(out.labels, venus, stroke);
      fresh = 0;
      for (PixelIndex i : result.affected) fresh += touched[i] ? 0 : 1;
      if (out.touched + fresh <= budget.max_touched || radius <= 1.0) break;
      radius = std::max(1.0, radius - 1.0);
    }
    if (out.touched + fresh > budget.max_touched) break;
    if (result.labels == out.labels) {
      ignored[seed] = 1;
      continue;
    }
    out.strokes.push_back({seed, radius, cls, sigma_s});
    if (budget.spacing > 0.0) mark_addressed(seed);
    for (PixelIndex i : result.affected) touched[i] = 1;
    out.touched += fresh;
    out.labels = std::move(result.labels);
  }
  return out;
}

void apply_mito_event(MitoEditor& editor, const MitoUserEvent& ev, const ChannelRaster& mito) {
  const Extent e = editor.state().extent;
  switch (ev.kind) {
    case MitoEditKind::Exclude: editor.exclude(ev.ids); break;
    case MitoEditKind::Split: editor.split(ev.target, rasterize_polyline(e, ev.points), mito); break;
    case MitoEditKind::Merge: editor.merge_or_include(rasterize_polyline(e, ev.points), mito); break;
    case MitoEditKind::Replace: throw ValidationError("kind", "replace is not a user event");
  }
}

std::vector<MitoUserEvent> scripted_mito_user(const MitoState& current, const std::vector<PixelSet>& truth,
                                              const ChannelRaster& mito, int max_events) {
  const Extent e = current.extent;
  MitoEditor work(current);
  std::vector<MitoUserEvent> events;
  // Errors that could not be fixed, keyed by their first pixel.
  std::vector<PixelIndex> given_up;
  auto abandoned = [&](PixelIndex i) { return std::find(given_up.begin(), given_up.end(), i) != given_up.end(); };

  while (static_cast<int>(events.size()) < max_events) {
    const MitoState& s = work.state();
    const auto ids = s.id_map();
    std::vector<std::int32_t> truth_of(e.size(), -1);
    for (std::size_t t = 0; t < truth.size(); ++t)
      for (PixelIndex i : truth[t]) truth_of[i] = static_cast<std::int32_t>(t);

    std::size_t best_size = 0;
    PixelIndex best_key = 0;
    MitoUserEvent best;
    auto consider = [&](std::size_t size, PixelIndex key, auto make) {
      if (size > best_size && !abandoned(key)) {
        best_size = size;
        best_key = key;
        best = make();
      }
    };

    for (const MitoObject& o : s.objects) {
      std::vector<std::int32_t> hit;
      for (PixelIndex i : o.pixels)
        if (truth_of[i] >= 0 && std::find(hit.begin(), hit.end(), truth_of[i]) == hit.end()) hit.push_back(truth_of[i]);
      if (hit.empty()) {
        consider(o.pixels.size(), o.pixels.indices().front(),
                 [&] { return MitoUserEvent{MitoEditKind::Exclude, {o.id}, 0, {}}; });
      } else if (hit.size() >= 2) {
        consider(o.pixels.size(), o.pixels.indices().front(), [&] {
          PixelIndex pa = 0, pb = 0;
          nearest_pair(truth[hit[0]], truth[hit[1]], pa, pb);
          const Point a = e.point(pa), b = e.point(pb);
          const double mx = 0.5 * (a.x + b.x), my = 0.5 * (a.y + b.y);
          const double len = std::hypot(b.x - a.x, b.y - a.y);
          const double nx = -(b.y - a.y) / len, ny = (b.x - a.x) / len;
          auto clamp_pt = [&](double x, double y) {
            return std::array<double, 2>{std::clamp(x, 0.0, e.width - 1.0), std::clamp(y, 0.0, e.height - 1.0)};
          };
          return MitoUserEvent{MitoEditKind::Split, {}, o.id, {clamp_pt(mx - 3 * nx, my - 3 * ny), clamp_pt(mx + 3 * nx, my + 3 * ny)}};
        });
      }
    }
    for (const PixelSet& t : truth) {
      std::vector<ObjectId> hit;
      for (PixelIndex i : t)
        if (ids[i] && std::find(hit.begin(), hit.end(), ids[i]) == hit.end()) hit.push_back(ids[i]);
      if (hit.empty()) {
        consider(t.size(), t.indices().front(), [&] { return MitoUserEvent{MitoEditKind::Merge, {}, 0, spine(t)}; });
      } else if (hit.size() >= 2) {
        consider(t.size(), t.indices().front(), [&] {
          PixelIndex pa = 0, pb = 0;
          nearest_pair(s.find(hit[0])->pixels, s.find(hit[1])->pixels, pa, pb);
          return MitoUserEvent{MitoEditKind::Merge, {}, 0, {xy(e, pa), xy(e, pb)}};
        });
      }
    }
    if (best_size == 0) break;
    const MitoState before = work.state();
    try {
      apply_mito_event(work, best, mito);
    } catch (const ValidationError&) {
      given_up.push_back(best_key);
      continue;
    }
    if (work.state() == before) {
      given_up.push_back(best_key);
      continue;
    }
    events.push_back(std::move(best));
  }
  return events;
}

}  // namespace mitoviz
