#include "mitoviz/synth/corrupt.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <limits>

#include "mitoviz/core/error.hpp"
#include "mitoviz/core/rng.hpp"
#include "mitoviz/imgproc/components.hpp"
#include "mitoviz/mito/edits.hpp"

namespace mitoviz {

namespace {

StructureClass flipped(StructureClass c) {
  switch (c) {
    case StructureClass::Dendrite: return StructureClass::Axon;
    case StructureClass::Axon: return StructureClass::Dendrite;
    default: return StructureClass::Dendrite;
  }
}

void flip_regions(Corrupted& out, double fraction, SplitMix64& rng) {
  const Extent e = out.labels.extent();
  const StructureLabelRaster original = out.labels;
  std::vector<std::uint8_t> done(e.size(), 0);
  for (std::size_t s = 0; s < e.size(); ++s) {
    if (done[s] || original.at(s) == StructureClass::Background) continue;
    const StructureClass cls = original.at(s);
    const PixelIndex seed[] = {static_cast<PixelIndex>(s)};
    const auto comp = flood_fill(e, seed, [&](PixelIndex i) { return original.at(i) == cls; });
    for (PixelIndex i : comp) done[i] = 1;
    const auto quota = static_cast<std::size_t>(std::lround(fraction * comp.size()));
    if (quota == 0) continue;

    // Breadth-first chunk from a random member keeps the flipped region contiguous.
    std::vector<std::uint8_t> seen(e.size(), 0);
    std::deque<PixelIndex> queue{comp[rng.below(comp.size())]};
    seen[queue.front()] = 1;
    std::vector<PixelIndex> chunk;
    while (!queue.empty() && chunk.size() < quota) {
      const PixelIndex i = queue.front();
      queue.pop_front();
      chunk.push_back(i);
      const Point p = e.point(i);
      const int nb[4][2] = {{1, 0}, {-1, 0}, {0, 1}, {0, -1}};
      for (const auto& d : nb) {
        const int x = p.x + d[0], y = p.y + d[1];
        if (!e.in_bounds(x, y)) continue;
        const PixelIndex j = e.index(x, y);
        if (!seen[j] && original.at(j) == cls) {
          seen[j] = 1;
          queue.push_back(j);
        }
      }
    }
    for (PixelIndex i : chunk) out.labels.set(i, flipped(cls));
    out.manifest.push_back({CorruptionType::FlipRegion, "mislabeled", PixelSet(e, chunk).bbox(), chunk.size(), {}});
  }
}

double nearest_pair(const MitoObject& a, const MitoObject& b, const Extent& e, PixelIndex& pa, PixelIndex& pb) {
  double best = std::numeric_limits<double>::infinity();
  for (PixelIndex i : a.pixels) {
    const Point p = e.point(i);
    for (PixelIndex j : b.pixels) {
      const Point q = e.point(j);
      const double d = std::hypot(p.x - q.x, p.y - q.y);
      if (d < best) {
        best = d;
        pa = i;
        pb = j;
      }
    }
  }
  return best;
}

std::size_t pick(SplitMix64& rng, std::size_t n) { return static_cast<std::size_t>(rng.below(n)); }

void merge_blobs(Corrupted& out, SplitMix64& rng) {
  MitoState& s = out.objects;
  const Extent e = s.extent;
  struct Pair {
    std::size_t a, b;
    PixelIndex pa, pb;
  };
  std::vector<Pair> pairs;
  for (std::size_t a = 0; a < s.objects.size(); ++a) {
    for (std::size_t b = a + 1; b < s.objects.size(); ++b) {
      const Rect ra = s.objects[a].bbox, rb = s.objects[b].bbox;
      const Rect grown{ra.x - 8, ra.y - 8, ra.w + 16, ra.h + 16};
      if (!grown.overlaps(rb)) continue;
      PixelIndex pa = 0, pb = 0;
      if (nearest_pair(s.objects[a], s.objects[b], e, pa, pb) <= 8.0) pairs.push_back({a, b, pa, pb});
    }
  }
  const auto ids = s.id_map();
  while (!pairs.empty()) {
    const std::size_t k = pick(rng, pairs.size());
    const Pair p = pairs[k];
    pairs.erase(pairs.begin() + static_cast<std::ptrdiff_t>(k));
    const Point a = e.point(p.pa), b = e.point(p.pb);
    const std::array<double, 2> pts[] = {{double(a.x), double(a.y)}, {double(b.x), double(b.y)}};
    const Polyline line = rasterize_polyline(e, pts);
    // 4-connect the bridge by adding the corner of every diagonal step.
    std::vector<PixelIndex> bridge(line.pixels.begin(), line.pixels.end());
    for (std::size_t t = 0; t + 1 < line.pixels.size(); ++t) {
      const Point u = e.point(line.pixels[t]), v = e.point(line.pixels[t + 1]);
      if (u.x != v.x && u.y != v.y) bridge.push_back(e.index(v.x, u.y));
    }
    const ObjectId ida = s.objects[p.a].id, idb = s.objects[p.b].id;
    bool clear = true;
    for (PixelIndex i : bridge) clear = clear && (ids[i] == 0 || ids[i] == ida || ids[i] == idb);
    if (!clear) continue;
    PixelSet fused = set_union(set_union(s.objects[p.a].pixels, s.objects[p.b].pixels), PixelSet(e, bridge));
    const ObjectId merged_id = s.next_id;
    s.objects[p.a] = s.make_object(std::move(fused), Provenance::Detected);
    s.objects.erase(s.objects.begin() + static_cast<std::ptrdiff_t>(p.b));
    const MitoObject& m = *s.find(merged_id);
    out.manifest.push_back({CorruptionType::MergeBlobs, "merged", m.bbox, m.pixels.size(), {merged_id}});
    return;
  }
}

void split_blob(Corrupted& out, SplitMix64& rng) {
  MitoState& s = out.objects;
  const Extent e = s.extent;
  std::vector<std::size_t> order(s.objects.size());
  for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
  for (std::size_t k = order.size(); k > 1; --k) std::swap(order[k - 1], order[pick(rng, k)]);
  for (std::size_t k : order) {
    const MitoObject& o = s.objects[k];
    if (o.pixels.size() < 6) continue;
    // Cut across the longer bbox axis at the median coordinate.
    const bool horizontal = o.bbox.w >= o.bbox.h;
    std::vector<int> coord;
    for (PixelIndex i : o.pixels) coord.push_back(horizontal ? e.point(i).x : e.point(i).y);
    std::vector<int> sorted = coord;
    std::nth_element(sorted.begin(), sorted.begin() + sorted.size() / 2, sorted.end());
    const int cut = sorted[sorted.size() / 2];
    std::vector<PixelIndex> lo, hi;
    std::size_t n = 0;
    for (PixelIndex i : o.pixels) (coord[n++] < cut ? lo : hi).push_back(i);
    if (lo.empty() || hi.empty()) continue;
    PixelSet a(e, lo), b(e, hi);
    if (label_components(a.to_mask()).size() != 1 || label_components(b.to_mask()).size() != 1) continue;
    const ObjectId ia = s.next_id;
    s.objects[k] = s.make_object(std::move(a), Provenance::Detected);
    const ObjectId ib = s.next_id;
    s.objects.insert(s.objects.begin() + static_cast<std::ptrdiff_t>(k) + 1, s.make_object(std::move(b), Provenance::Detected));
    const Rect box = s.find(ia)->bbox.united(s.find(ib)->bbox);
    out.manifest.push_back({CorruptionType::SplitBlob, "split", box, s.find(ia)->pixels.size() + s.find(ib)->pixels.size(),
                            {ia, ib}});
    return;
  }
}

void add_noise_blob(Corrupted& out, SplitMix64& rng) {
  MitoState& s = out.objects;
  const Extent e = s.extent;
  if (e.width < 7 || e.height < 7) return;
  const auto ids = s.id_map();
  for (int attempt = 0; attempt < 200; ++attempt) {
    const int x0 = 2 + static_cast<int>(rng.below(static_cast<std::uint64_t>(e.width - 6)));
    const int y0 = 2 + static_cast<int>(rng.below(static_cast<std::uint64_t>(e.height - 6)));
    bool free = true;
    for (int y = y0 - 2; y < y0 + 5 && free; ++y)
      for (int x = x0 - 2; x < x0 + 5 && free; ++x) free = ids[e.index(x, y)] == 0;
    if (!free) continue;
    std::vector<PixelIndex> px;
    for (int y = y0; y < y0 + 3; ++y)
      for (int x = x0; x < x0 + 3; ++x) px.push_back(e.index(x, y));
    const ObjectId id = s.next_id;
    s.objects.push_back(s.make_object(PixelSet(e, px), Provenance::Detected));
    out.manifest.push_back({CorruptionType::AddNoiseBlob, "false-positive", Rect{x0, y0, 3, 3}, 9, {id}});
    return;
  }
}

void delete_blob(Corrupted& out, SplitMix64& rng) {
  MitoState& s = out.objects;
  if (s.objects.empty()) return;
  const std::size_t k = pick(rng, s.objects.size());
  out.manifest.push_back({CorruptionType::DeleteBlob, "missing", s.objects[k].bbox, s.objects[k].pixels.size(), {}});
  s.objects.erase(s.objects.begin() + static_cast<std::ptrdiff_t>(k));
}

}  // namespace

std::string to_string(CorruptionType t) {
  switch (t) {
    case CorruptionType::FlipRegion: return "flip-region";
    case CorruptionType::MergeBlobs: return "merge-blobs";
    case CorruptionType::SplitBlob: return "split-blob";
    case CorruptionType::AddNoiseBlob: return "add-noise-blob";
    case CorruptionType::DeleteBlob: return "delete-blob";
  }
  return "flip-region";
}

CorruptionType corruption_type_from_string(const std::string& s) {
  for (auto t : {CorruptionType::FlipRegion, CorruptionType::MergeBlobs, CorruptionType::SplitBlob,
                 CorruptionType::AddNoiseBlob, CorruptionType::DeleteBlob}) {
    if (to_string(t) == s) return t;
  }
  throw ValidationError("type", "unknown corruption type '" + s + "'");
}

void to_json(nlohmann::json& j, const ManifestEntry& m) {
  j = {{"type", to_string(m.type)},
       {"error", m.error},
       {"bbox", {{"x", m.bbox.x}, {"y", m.bbox.y}, {"w", m.bbox.w}, {"h", m.bbox.h}}},
       {"pixels", m.pixels},
       {"objects", m.objects}};
}

Corrupted corrupt(const GroundTruth& truth, std::span<const CorruptionOp> menu, std::uint64_t seed) {
  Corrupted out{truth.labels, truth.object_state(), {}};
  SplitMix64 rng(seed);
  for (const CorruptionOp& op : menu) {
    if (op.type == CorruptionType::FlipRegion) {
      if (!(op.fraction >= 0.0 && op.fraction <= 1.0)) throw ValidationError("fraction", "must be in [0, 1]");
      flip_regions(out, op.fraction, rng);
      continue;
    }
    if (op.count < 0) throw ValidationError("count", "must be >= 0");
    for (int k = 0; k < op.count; ++k) {
      switch (op.type) {
        case CorruptionType::MergeBlobs: merge_blobs(out, rng); break;
        case CorruptionType::SplitBlob: split_blob(out, rng); break;
        case CorruptionType::AddNoiseBlob: add_noise_blob(out, rng); break;
        case CorruptionType::DeleteBlob: delete_blob(out, rng); break;
        case CorruptionType::FlipRegion: break;
      }
    }
  }
  return out;
}

}  // namespace mitoviz
