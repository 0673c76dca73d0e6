#include "mitoviz/mito/edits.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <string>

#include "mitoviz/core/error.hpp"

namespace mitoviz {
namespace {

struct EditOutcome {
  MitoState state;
  PixelSet touched;
};

void check_extent(const MitoState& state, const Polyline& line, const ChannelRaster& mito) {
  if (state.extent != mito.extent() || line.extent != mito.extent()) {
    throw ValidationError("extent", "object state, line and channel must share dimensions");
  }
}

EditOutcome split_impl(const MitoState& state, ObjectId id, const Polyline& line, const ChannelRaster& mito,
                       double sigma_m, double radius) {
  check_extent(state, line, mito);
  line.validate();
  const std::size_t pos = state.index_of(id);
  const MitoObject& obj = state.objects[pos];
  const bool crosses = std::any_of(line.pixels.begin(), line.pixels.end(), [&](PixelIndex p) {
    const Point q = state.extent.point(p);
    return obj.bbox.contains(q.x, q.y);
  });
  if (!crosses) throw ValidationError("line", "split line does not intersect the object's bounding box");

  const PixelSet pb = propagated_region(mito, line, Threshold::Below, sigma_m, radius);
  const PixelSet removed = set_intersection(obj.pixels, pb);
  const PixelSet remaining = set_difference(obj.pixels, removed);
  if (remaining.empty()) throw ValidationError("line", "split would remove every pixel of the object");

  MitoState next = state;
  next.objects.erase(next.objects.begin() + static_cast<std::ptrdiff_t>(pos));
  std::vector<MitoObject> parts;
  for (auto& comp : label_components(remaining.to_mask())) {
    parts.push_back(next.make_object(std::move(comp), Provenance::UserSplit));
  }
  next.objects.insert(next.objects.begin() + static_cast<std::ptrdiff_t>(pos), parts.begin(), parts.end());
  return {std::move(next), removed};
}

EditOutcome merge_impl(const MitoState& state, const Polyline& line, const ChannelRaster& mito, double sigma_m,
                       double radius) {
  check_extent(state, line, mito);
  line.validate();
  const Extent& e = state.extent;
  const PixelSet pf = propagated_region(mito, line, Threshold::AtOrAbove, sigma_m, radius);

  std::vector<std::uint8_t> grown(e.size(), 0);
  for (PixelIndex i : pf) grown[i] = 1;
  for (std::size_t k = 0; k < line.pixels.size(); ++k) {
    grown[line.pixels[k]] = 1;
    if (k > 0) {
      // Diagonal steps get the corner pixel so the line is 4-connected.
      const Point a = e.point(line.pixels[k - 1]), b = e.point(line.pixels[k]);
      if (a.x != b.x && a.y != b.y) grown[e.index(b.x, a.y)] = 1;
    }
  }
  PixelSet main = PixelSet::from_sorted(
      e, flood_fill(e, line.pixels, [&](PixelIndex i) { return grown[i] != 0; }));

  std::vector<int> owner(e.size(), -1);
  for (std::size_t k = 0; k < state.objects.size(); ++k)
    for (PixelIndex i : state.objects[k].pixels) owner[i] = static_cast<int>(k);

  std::set<int> touched;
  for (PixelIndex i : main) {
    const Point p = e.point(i);
    auto note = [&](int x, int y) {
      if (e.in_bounds(x, y) && owner[e.index(x, y)] >= 0) touched.insert(owner[e.index(x, y)]);
    };
    note(p.x, p.y);
    note(p.x - 1, p.y);
    note(p.x + 1, p.y);
    note(p.x, p.y - 1);
    note(p.x, p.y + 1);
  }

  PixelSet fused = main;
  std::size_t insert_at = state.objects.size();
  ObjectId smallest = 0;
  for (int k : touched) {
    fused = set_union(fused, state.objects[k].pixels);
    if (smallest == 0 || state.objects[k].id < smallest) {
      smallest = state.objects[k].id;
      insert_at = static_cast<std::size_t>(k);
    }
  }

  MitoState next = state;
  MitoObject merged = next.make_object(std::move(fused), touched.size() >= 2 ? Provenance::UserMerged
                                                                              : Provenance::UserIncluded);
  std::vector<MitoObject> kept;
  std::size_t position = 0;
  for (std::size_t k = 0; k < state.objects.size(); ++k) {
    if (k == insert_at) position = kept.size();
    if (!touched.count(static_cast<int>(k))) kept.push_back(state.objects[k]);
  }
  if (insert_at == state.objects.size()) position = kept.size();
  kept.insert(kept.begin() + static_cast<std::ptrdiff_t>(position), std::move(merged));
  next.objects = std::move(kept);
  return {std::move(next), std::move(main)};
}

}  // namespace

void Polyline::validate() const {
  if (pixels.empty()) throw ValidationError("line", "polyline is empty");
  for (std::size_t k = 0; k < pixels.size(); ++k) {
    if (pixels[k] >= extent.size()) throw ValidationError("line", "polyline pixel outside the raster");
    if (k > 0) {
      const Point a = extent.point(pixels[k - 1]), b = extent.point(pixels[k]);
      if (std::abs(a.x - b.x) > 1 || std::abs(a.y - b.y) > 1) {
        throw ValidationError("line", "consecutive polyline pixels must be 8-neighbours");
      }
    }
  }
}

Polyline rasterize_polyline(const Extent& extent, std::span<const std::array<double, 2>> points) {
  if (points.empty()) throw ValidationError("points", "polyline needs at least one point");
  Polyline line{extent, {}};
  auto to_pixel = [&](const std::array<double, 2>& p) {
    if (!std::isfinite(p[0]) || !std::isfinite(p[1])) throw ValidationError("points", "non-finite polyline point");
    const Point q{static_cast<int>(std::lround(p[0])), static_cast<int>(std::lround(p[1]))};
    if (!extent.in_bounds(q.x, q.y)) throw ValidationError("points", "polyline point outside the image");
    return q;
  };
  Point prev = to_pixel(points[0]);
  line.pixels.push_back(extent.index(prev.x, prev.y));
  for (std::size_t k = 1; k < points.size(); ++k) {
    const Point to = to_pixel(points[k]);
    int x = prev.x, y = prev.y;
    const int dx = std::abs(to.x - x), dy = -std::abs(to.y - y);
    const int sx = x < to.x ? 1 : -1, sy = y < to.y ? 1 : -1;
    int err = dx + dy;
    while (x != to.x || y != to.y) {
      const int e2 = 2 * err;
      if (e2 >= dy) {
        err += dy;
        x += sx;
      }
      if (e2 <= dx) {
        err += dx;
        y += sy;
      }
      line.pixels.push_back(extent.index(x, y));
    }
    prev = to;
  }
  return line;
}

PixelSet propagated_region(const ChannelRaster& mito, const Polyline& line, Threshold kind, double sigma,
                           double radius) {
  if (line.extent != mito.extent()) throw ValidationError("extent", "line and channel differ in size");
  line.validate();
  const Extent& e = mito.extent();
  const auto v = mito.values();
  // Component ids are assigned lazily: only components that contain a line pixel are flooded.
  std::vector<int> comp(e.size(), -1);
  int next_comp = 0;
  std::vector<PixelIndex> stack;
  std::vector<std::uint8_t> hit(e.size(), 0);
  const int reach = static_cast<int>(std::ceil(radius));
  const double r2 = radius * radius;
  for (PixelIndex j : line.pixels) {
    if (!passes(v[j], kind, sigma)) continue;
    if (comp[j] < 0) {
      const int id = next_comp++;
      comp[j] = id;
      stack.push_back(j);
      while (!stack.empty()) {
        const PixelIndex i = stack.back();
        stack.pop_back();
        const Point p = e.point(i);
        auto visit = [&](int x, int y) {
          if (!e.in_bounds(x, y)) return;
          const PixelIndex n = e.index(x, y);
          if (comp[n] < 0 && passes(v[n], kind, sigma)) {
            comp[n] = id;
            stack.push_back(n);
          }
        };
        visit(p.x - 1, p.y);
        visit(p.x + 1, p.y);
        visit(p.x, p.y - 1);
        visit(p.x, p.y + 1);
      }
    }
    const int cj = comp[j];
    const Point c = e.point(j);
    for (int dy = -reach; dy <= reach; ++dy) {
      for (int dx = -reach; dx <= reach; ++dx) {
        if (dx * dx + dy * dy >= r2 || !e.in_bounds(c.x + dx, c.y + dy)) continue;
        const PixelIndex i = e.index(c.x + dx, c.y + dy);
        if (comp[i] == cj) hit[i] = 1;
      }
    }
  }
  std::vector<PixelIndex> out;
  for (PixelIndex i = 0; i < e.size(); ++i)
    if (hit[i]) out.push_back(i);
  return PixelSet::from_sorted(e, std::move(out));
}

MitoState exclude(const MitoState& state, std::span<const ObjectId> ids) {
  for (ObjectId id : ids) state.index_of(id);
  MitoState next = state;
  std::erase_if(next.objects, [&](const MitoObject& o) { return std::find(ids.begin(), ids.end(), o.id) != ids.end(); });
  return next;
}

MitoState split(const MitoState& state, ObjectId id, const Polyline& line, const ChannelRaster& mito, double sigma_m,
                double radius) {
  return split_impl(state, id, line, mito, sigma_m, radius).state;
}

MitoState merge_or_include(const MitoState& state, const Polyline& line, const ChannelRaster& mito, double sigma_m,
                           double radius) {
  return merge_impl(state, line, mito, sigma_m, radius).state;
}

ForegroundDiff foreground_diff(const MitoState& before, const MitoState& after) {
  const BinaryMask a = before.foreground(), b = after.foreground();
  std::vector<PixelIndex> added, removed;
  for (std::size_t i = 0; i < a.bits.size(); ++i) {
    if (!a.bits[i] && b.bits[i]) added.push_back(static_cast<PixelIndex>(i));
    if (a.bits[i] && !b.bits[i]) removed.push_back(static_cast<PixelIndex>(i));
  }
  return {PixelSet::from_sorted(before.extent, std::move(added)), PixelSet::from_sorted(before.extent, std::move(removed))};
}

void MitoEditor::commit(MitoEditKind kind, MitoState next, PixelSet touched) {
  MitoEdit edit{kind, std::move(state_), {}, std::move(touched)};
  edit.diff = foreground_diff(edit.before, next);
  state_ = std::move(next);
  journal_.push_back(std::move(edit));
}

void MitoEditor::exclude(std::span<const ObjectId> ids) {
  MitoState next = mitoviz::exclude(state_, ids);
  PixelSet removed(state_.extent);
  for (ObjectId id : ids) removed = set_union(removed, state_.objects[state_.index_of(id)].pixels);
  commit(MitoEditKind::Exclude, std::move(next), std::move(removed));
}

void MitoEditor::split(ObjectId id, const Polyline& line, const ChannelRaster& mito) {
  auto out = split_impl(state_, id, line, mito, state_.sigma_m, kPropagationRadius);
  commit(MitoEditKind::Split, std::move(out.state), std::move(out.touched));
}

void MitoEditor::merge_or_include(const Polyline& line, const ChannelRaster& mito) {
  auto out = merge_impl(state_, line, mito, state_.sigma_m, kPropagationRadius);
  commit(MitoEditKind::Merge, std::move(out.state), std::move(out.touched));
}

void MitoEditor::replace(MitoState next) {
  if (next.extent != state_.extent) throw ValidationError("extent", "replacement object state differs in size");
  next.next_id = std::max(next.next_id, state_.next_id);
  commit(MitoEditKind::Replace, std::move(next), PixelSet(state_.extent));
}

bool MitoEditor::undo() {
  if (journal_.empty()) return false;
  const ObjectId next_id = state_.next_id;
  state_ = std::move(journal_.back().before);
  state_.next_id = next_id;  // ids stay retired across undo
  journal_.pop_back();
  return true;
}

void MitoEditor::set_thresholds(double sigma_m, double sigma_e) {
  if (!(sigma_m >= 0.0 && sigma_m <= 1.0)) throw ValidationError("sigma_m", "sigma_m must lie in [0,1]");
  if (!(sigma_e >= 0.0 && sigma_e <= 1.0)) throw ValidationError("sigma_e", "sigma_e must lie in [0,1]");
  state_.sigma_m = sigma_m;
  state_.sigma_e = sigma_e;
}

}  // namespace mitoviz
