#include "mitoviz/synth/phantom.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "mitoviz/core/error.hpp"
#include "mitoviz/core/rng.hpp"
#include "mitoviz/imgproc/components.hpp"

namespace mitoviz {

namespace {

using Pt = std::array<double, 2>;

double segment_distance_sq(double px, double py, const Pt& a, const Pt& b) {
  const double dx = b[0] - a[0], dy = b[1] - a[1];
  const double len2 = dx * dx + dy * dy;
  double t = len2 > 0.0 ? ((px - a[0]) * dx + (py - a[1]) * dy) / len2 : 0.0;
  t = std::clamp(t, 0.0, 1.0);
  const double ex = a[0] + t * dx - px, ey = a[1] + t * dy - py;
  return ex * ex + ey * ey;
}

// Calls fn(pixel) for each pixel within reach of the primitive, once per pixel.
template <typename Fn>
void rasterize(const Primitive& p, const Extent& e, double reach, Fn&& fn) {
  std::vector<std::uint8_t> hit(e.size(), 0);
  const double r2 = reach * reach;
  auto visit = [&](const Pt& a, const Pt& b) {
    const int x0 = std::max(0, static_cast<int>(std::floor(std::min(a[0], b[0]) - reach)));
    const int x1 = std::min(e.width - 1, static_cast<int>(std::ceil(std::max(a[0], b[0]) + reach)));
    const int y0 = std::max(0, static_cast<int>(std::floor(std::min(a[1], b[1]) - reach)));
    const int y1 = std::min(e.height - 1, static_cast<int>(std::ceil(std::max(a[1], b[1]) + reach)));
    for (int y = y0; y <= y1; ++y) {
      for (int x = x0; x <= x1; ++x) {
        const PixelIndex i = e.index(x, y);
        if (hit[i]) continue;
        if (segment_distance_sq(x, y, a, b) <= r2) {
          hit[i] = 1;
          fn(i);
        }
      }
    }
  };
  if (p.points.size() == 1) {
    visit(p.points[0], p.points[0]);
  } else {
    for (std::size_t k = 0; k + 1 < p.points.size(); ++k) visit(p.points[k], p.points[k + 1]);
  }
}

// Smooth random walk with unit steps until it leaves the image (plus margin).
std::vector<Pt> random_walk(SplitMix64& rng, const Extent& e, Pt start, double heading, double margin) {
  std::vector<Pt> pts{start};
  const int max_steps = 4 * (e.width + e.height);
  Pt p = start;
  for (int s = 0; s < max_steps; ++s) {
    heading += 0.06 * rng.normal();
    p = {p[0] + std::cos(heading), p[1] + std::sin(heading)};
    pts.push_back(p);
    if (p[0] < -margin || p[1] < -margin || p[0] > e.width - 1 + margin || p[1] > e.height - 1 + margin) break;
  }
  return pts;
}

Pt border_start(SplitMix64& rng, const Extent& e, double& heading) {
  const double w = e.width - 1.0, h = e.height - 1.0;
  Pt p;
  switch (rng.below(4)) {
    case 0: p = {rng.uniform(0, w), 0.0}; break;
    case 1: p = {rng.uniform(0, w), h}; break;
    case 2: p = {0.0, rng.uniform(0, h)}; break;
    default: p = {w, rng.uniform(0, h)}; break;
  }
  heading = std::atan2(h / 2 - p[1], w / 2 - p[0]) + rng.uniform(-0.6, 0.6);
  return p;
}

void check_range(std::vector<FieldError>& errs, const char* name, const ValueRange& r, double min) {
  if (!(r.lo >= min) || !(r.hi >= r.lo) || !std::isfinite(r.hi)) {
    errs.push_back({name, "range must satisfy " + std::to_string(min) + " <= lo <= hi"});
  }
}

void check_unit(std::vector<FieldError>& errs, const char* name, double v) {
  if (!(v >= 0.0 && v <= 1.0)) errs.push_back({name, "must be in [0, 1]"});
}

nlohmann::json range_json(const ValueRange& r) { return nlohmann::json::array({r.lo, r.hi}); }

ValueRange range_from(const nlohmann::json& j) {
  if (!j.is_array() || j.size() != 2) throw ValidationError("range", "range must be [lo, hi]");
  return {j[0].get<double>(), j[1].get<double>()};
}

// Places one mitochondrion along a random stretch of a host tube.
bool place_mito(SplitMix64& rng, const Primitive& host, const ValueRange& length_range, double radius,
                const StructureLabelRaster& labels, std::vector<std::uint8_t>& occupied, const Extent& e,
                PixelSet& out) {
  const int n = static_cast<int>(host.points.size());
  const int len = static_cast<int>(std::lround(rng.uniform(length_range.lo, length_range.hi)));
  if (n < 2) return false;
  const int start = static_cast<int>(rng.below(static_cast<std::uint64_t>(n)));
  Primitive m{host.cls, radius, {}};
  // Arc length of a unit-step path equals its point count minus one; the
  // end-cap radius is subtracted so the rendered length matches.
  const int steps = std::max(0, len - 1 - static_cast<int>(std::lround(2 * radius)));
  for (int k = start; k <= std::min(n - 1, start + steps); ++k) m.points.push_back(host.points[k]);
  if (m.points.empty()) return false;
  std::vector<PixelIndex> px;
  bool ok = true;
  rasterize(m, e, radius + kTubeMargin, [&](PixelIndex i) {
    if (labels.at(i) != host.cls || occupied[i]) ok = false;
    px.push_back(i);
  });
  if (!ok || px.size() < 2) return false;
  PixelSet set(e, std::move(px));
  // Keep a one-pixel gap to every other mitochondrion.
  for (PixelIndex i : set) {
    const Point p = e.point(i);
    for (int dy = -1; dy <= 1; ++dy)
      for (int dx = -1; dx <= 1; ++dx)
        if (e.in_bounds(p.x + dx, p.y + dy) && occupied[e.index(p.x + dx, p.y + dy)]) return false;
  }
  const PixelIndex seed[] = {set.indices().front()};
  if (flood_fill(e, seed, [&](PixelIndex i) { return set.contains(i); }).size() != set.size()) return false;
  for (PixelIndex i : set) occupied[i] = 1;
  out = std::move(set);
  return true;
}

}  // namespace

void PhantomSpec::validate() const {
  std::vector<FieldError> errs;
  if (width <= 0) errs.push_back({"width", "must be > 0"});
  if (height <= 0) errs.push_back({"height", "must be > 0"});
  for (auto [name, v] : {std::pair{"dendrite_count", dendrite_count}, {"axon_count", axon_count},
                         {"cell_body_count", cell_body_count}, {"dendrite_mito_count", dendrite_mito_count},
                         {"axon_mito_count", axon_mito_count}}) {
    if (v < 0) errs.push_back({name, "must be >= 0"});
  }
  check_range(errs, "dendrite_width", dendrite_width, 1.0);
  check_range(errs, "axon_width", axon_width, 1.0);
  check_range(errs, "cell_body_radius", cell_body_radius, 1.0);
  check_range(errs, "dendrite_mito_length", dendrite_mito_length, 1.0);
  check_range(errs, "axon_mito_length", axon_mito_length, 1.0);
  check_unit(errs, "background", background);
  check_unit(errs, "dendrite_intensity", dendrite_intensity);
  check_unit(errs, "axon_intensity", axon_intensity);
  check_unit(errs, "cell_body_intensity", cell_body_intensity);
  check_unit(errs, "mito_background", mito_background);
  check_unit(errs, "mito_intensity", mito_intensity);
  if (!(noise_sigma >= 0.0) || !std::isfinite(noise_sigma)) errs.push_back({"noise_sigma", "must be >= 0"});
  if (!errs.empty()) throw ValidationError("invalid phantom spec", std::move(errs));
}

void to_json(nlohmann::json& j, const PhantomSpec& s) {
  j = {{"seed", s.seed},
       {"width", s.width},
       {"height", s.height},
       {"dendrite_count", s.dendrite_count},
       {"dendrite_width", range_json(s.dendrite_width)},
       {"axon_count", s.axon_count},
       {"axon_width", range_json(s.axon_width)},
       {"cell_body_count", s.cell_body_count},
       {"cell_body_radius", range_json(s.cell_body_radius)},
       {"dendrite_mito_count", s.dendrite_mito_count},
       {"dendrite_mito_length", range_json(s.dendrite_mito_length)},
       {"axon_mito_count", s.axon_mito_count},
       {"axon_mito_length", range_json(s.axon_mito_length)},
       {"background", s.background},
       {"dendrite_intensity", s.dendrite_intensity},
       {"axon_intensity", s.axon_intensity},
       {"cell_body_intensity", s.cell_body_intensity},
       {"mito_background", s.mito_background},
       {"mito_intensity", s.mito_intensity},
       {"noise_sigma", s.noise_sigma}};
}

void from_json(const nlohmann::json& j, PhantomSpec& s) {
  if (!j.is_object()) throw ValidationError("phantom", "phantom spec must be a JSON object");
  PhantomSpec out = s;
  for (const auto& [key, v] : j.items()) {
    try {
      if (key == "seed") out.seed = v.get<std::uint64_t>();
      else if (key == "width") out.width = v.get<int>();
      else if (key == "height") out.height = v.get<int>();
      else if (key == "dendrite_count") out.dendrite_count = v.get<int>();
      else if (key == "dendrite_width") out.dendrite_width = range_from(v);
      else if (key == "axon_count") out.axon_count = v.get<int>();
      else if (key == "axon_width") out.axon_width = range_from(v);
      else if (key == "cell_body_count") out.cell_body_count = v.get<int>();
      else if (key == "cell_body_radius") out.cell_body_radius = range_from(v);
      else if (key == "dendrite_mito_count") out.dendrite_mito_count = v.get<int>();
      else if (key == "dendrite_mito_length") out.dendrite_mito_length = range_from(v);
      else if (key == "axon_mito_count") out.axon_mito_count = v.get<int>();
      else if (key == "axon_mito_length") out.axon_mito_length = range_from(v);
      else if (key == "background") out.background = v.get<double>();
      else if (key == "dendrite_intensity") out.dendrite_intensity = v.get<double>();
      else if (key == "axon_intensity") out.axon_intensity = v.get<double>();
      else if (key == "cell_body_intensity") out.cell_body_intensity = v.get<double>();
      else if (key == "mito_background") out.mito_background = v.get<double>();
      else if (key == "mito_intensity") out.mito_intensity = v.get<double>();
      else if (key == "noise_sigma") out.noise_sigma = v.get<double>();
      else throw ValidationError(key, "unknown phantom option");
    } catch (const nlohmann::json::exception&) {
      throw ValidationError(key, "wrong type for phantom option");
    }
  }
  out.validate();
  s = out;
}

MitoState GroundTruth::object_state() const {
  MitoState s;
  s.extent = labels.extent();
  for (const TruthObject& o : objects) s.objects.push_back(s.make_object(o.pixels, Provenance::Detected));
  return s;
}

Phantom generate_phantom(const PhantomSpec& spec) {
  spec.validate();
  const Extent e{spec.width, spec.height};
  SplitMix64 rng(spec.seed);
  GroundTruth truth;
  truth.labels = StructureLabelRaster(e.width, e.height);

  std::vector<Pt> somas;
  for (int k = 0; k < spec.cell_body_count; ++k) {
    somas.push_back({rng.uniform(0.25, 0.75) * (e.width - 1), rng.uniform(0.25, 0.75) * (e.height - 1)});
  }
  auto add_tubes = [&](int count, const ValueRange& width, StructureClass cls) {
    for (int k = 0; k < count; ++k) {
      const double radius = 0.5 * rng.uniform(width.lo, width.hi);
      double heading;
      Pt start;
      if (!somas.empty()) {
        start = somas[rng.below(somas.size())];
        heading = rng.uniform(0.0, 2.0 * std::numbers::pi);
      } else {
        start = border_start(rng, e, heading);
      }
      truth.primitives.push_back({cls, radius, random_walk(rng, e, start, heading, radius + 2.0)});
    }
  };
  add_tubes(spec.dendrite_count, spec.dendrite_width, StructureClass::Dendrite);
  add_tubes(spec.axon_count, spec.axon_width, StructureClass::Axon);
  for (const Pt& c : somas) {
    truth.primitives.push_back(
        {StructureClass::CellBody, rng.uniform(spec.cell_body_radius.lo, spec.cell_body_radius.hi), {c}});
  }
  for (const Primitive& p : truth.primitives) {
    rasterize(p, e, p.radius + kTubeMargin, [&](PixelIndex i) { truth.labels.set(i, p.cls); });
  }

  std::vector<std::uint8_t> occupied(e.size(), 0);
  auto add_mitos = [&](int count, StructureClass cls, const ValueRange& length, bool fill_width) {
    std::vector<const Primitive*> hosts;
    for (const Primitive& p : truth.primitives)
      if (p.cls == cls && p.points.size() > 1) hosts.push_back(&p);
    if (hosts.empty()) return;
    int placed = 0;
    for (int attempt = 0; placed < count && attempt < 60 * count; ++attempt) {
      const Primitive& host = *hosts[rng.below(hosts.size())];
      const double radius = fill_width ? host.radius : std::min(1.0, std::max(0.5, host.radius - 1.5));
      PixelSet px;
      if (place_mito(rng, host, length, radius, truth.labels, occupied, e, px)) {
        truth.objects.push_back({std::move(px), cls});
        ++placed;
      }
    }
  };
  add_mitos(spec.dendrite_mito_count, StructureClass::Dendrite, spec.dendrite_mito_length, false);
  add_mitos(spec.axon_mito_count, StructureClass::Axon, spec.axon_mito_length, true);
  std::sort(truth.objects.begin(), truth.objects.end(), [](const TruthObject& a, const TruthObject& b) {
    return a.pixels.indices().front() < b.pixels.indices().front();
  });

  std::vector<double> venus(e.size()), mito(e.size());
  for (std::size_t i = 0; i < e.size(); ++i) {
    switch (truth.labels.at(i)) {
      case StructureClass::Background: venus[i] = spec.background; break;
      case StructureClass::Dendrite: venus[i] = spec.dendrite_intensity; break;
      case StructureClass::Axon: venus[i] = spec.axon_intensity; break;
      case StructureClass::CellBody: venus[i] = spec.cell_body_intensity; break;
    }
    mito[i] = occupied[i] ? spec.mito_intensity : spec.mito_background;
  }
  if (spec.noise_sigma > 0.0) {
    for (auto* ch : {&venus, &mito}) {
      for (double& v : *ch) v = std::clamp(v + spec.noise_sigma * rng.normal(), 0.0, 1.0);
    }
  }
  return {ChannelRaster(e.width, e.height, std::move(venus)), ChannelRaster(e.width, e.height, std::move(mito)),
          std::move(truth)};
}

}  // namespace mitoviz
