#include <cmath>
#include <map>

#include "doctest.h"
#include "mitoviz/core/error.hpp"
#include "mitoviz/imgproc/components.hpp"
#include "mitoviz/imgproc/enhance.hpp"
#include "mitoviz/structure/brush.hpp"
#include "mitoviz/synth/corrupt.hpp"
#include "mitoviz/synth/phantom.hpp"
#include "mitoviz/synth/scripted_user.hpp"

using namespace mitoviz;

namespace {

// Class of each pixel from the primitives alone: last primitive whose centre
// line passes within radius + margin wins.
std::vector<std::uint8_t> recount(const GroundTruth& t, const Extent& e) {
  std::vector<std::uint8_t> out(e.size(), 0);
  for (const Primitive& p : t.primitives) {
    const double reach = p.radius + kTubeMargin;
    for (int y = 0; y < e.height; ++y)
      for (int x = 0; x < e.width; ++x) {
        double best = INFINITY;
        const std::size_t n = p.points.size();
        for (std::size_t k = 0; k < std::max<std::size_t>(1, n - 1); ++k) {
          const auto& a = p.points[k];
          const auto& b = p.points[std::min(k + 1, n - 1)];
          const double vx = b[0] - a[0], vy = b[1] - a[1];
          const double wx = x - a[0], wy = y - a[1];
          const double len2 = vx * vx + vy * vy;
          const double s = len2 == 0.0 ? 0.0 : std::clamp((wx * vx + wy * vy) / len2, 0.0, 1.0);
          best = std::min(best, std::hypot(wx - s * vx, wy - s * vy));
        }
        if (best * best <= reach * reach) out[e.index(x, y)] = static_cast<std::uint8_t>(p.cls);
      }
  }
  return out;
}

std::size_t disagreement(const StructureLabelRaster& a, const StructureLabelRaster& b) {
  std::size_t n = 0;
  for (std::size_t i = 0; i < a.size(); ++i) n += a[i] != b[i];
  return n;
}

std::vector<PixelSet> truth_sets(const GroundTruth& t) {
  std::vector<PixelSet> out;
  for (const auto& o : t.objects) out.push_back(o.pixels);
  return out;
}

PixelSet rect_set(const Extent& e, Rect r) {
  std::vector<PixelIndex> v;
  for (int y = r.y; y < r.bottom(); ++y)
    for (int x = r.x; x < r.right(); ++x) v.push_back(e.index(x, y));
  return PixelSet(e, v);
}

}  // namespace

TEST_CASE("phantom: no neurites and no mitochondria give blank channels") {
  PhantomSpec s;
  s.dendrite_count = s.axon_count = 0;
  s.dendrite_mito_count = s.axon_mito_count = 0;
  s.noise_sigma = 0.0;
  const auto p = generate_phantom(s);
  for (double v : p.venus.values()) CHECK(v == s.background);
  for (double v : p.mito.values()) CHECK(v == s.mito_background);
  CHECK(p.truth.objects.empty());
  CHECK(p.truth.labels == StructureLabelRaster(s.width, s.height));
}

TEST_CASE("phantom: same seed gives bit-identical output, different seeds differ") {
  PhantomSpec s;
  s.seed = 42;
  s.cell_body_count = 1;
  const auto a = generate_phantom(s);
  const auto b = generate_phantom(s);
  CHECK(a.venus == b.venus);
  CHECK(a.mito == b.mito);
  CHECK(a.truth.labels == b.truth.labels);
  REQUIRE(a.truth.objects.size() == b.truth.objects.size());
  for (std::size_t k = 0; k < a.truth.objects.size(); ++k) CHECK(a.truth.objects[k].pixels == b.truth.objects[k].pixels);
  s.seed = 43;
  CHECK(!(generate_phantom(s).venus == a.venus));
}

TEST_CASE("phantom: three dendrites and two axons match a recount of the primitives") {
  for (std::uint64_t seed : {1, 2, 3}) {
    PhantomSpec s;
    s.seed = seed;
    s.dendrite_count = 3;
    s.axon_count = 2;
    const auto p = generate_phantom(s);
    const auto expect = recount(p.truth, p.venus.extent());
    std::map<int, std::size_t> want, got;
    for (std::size_t i = 0; i < expect.size(); ++i) {
      ++want[expect[i]];
      ++got[p.truth.labels[i]];
    }
    CHECK(got == want);
    CHECK(got.size() == 3);
    CHECK(got.count(0) == 1);
    CHECK(got.count(1) == 1);
    CHECK(got.count(2) == 1);
    CHECK(std::equal(expect.begin(), expect.end(), p.truth.labels.codes().begin()));
  }
}

TEST_CASE("phantom: intensities and mitochondria follow the truth exactly without noise") {
  PhantomSpec s;
  s.seed = 9;
  s.cell_body_count = 1;
  s.noise_sigma = 0.0;
  const auto p = generate_phantom(s);
  REQUIRE(!p.truth.objects.empty());
  std::vector<std::uint8_t> in_object(p.mito.size(), 0);
  for (const auto& o : p.truth.objects) {
    CHECK(label_components(o.pixels.to_mask()).size() == 1);
    for (PixelIndex i : o.pixels) {
      CHECK(in_object[i] == 0);
      in_object[i] = 1;
      CHECK(p.truth.labels.at(i) == o.compartment);
    }
  }
  for (std::size_t i = 0; i < p.mito.size(); ++i)
    CHECK(p.mito[i] == (in_object[i] ? s.mito_intensity : s.mito_background));
  const auto state = p.truth.object_state();
  CHECK(state.satisfies_invariants());
  CHECK(state.objects.size() == p.truth.objects.size());
}

TEST_CASE("phantom: spec validation and JSON") {
  PhantomSpec s;
  s.width = 0;
  CHECK_THROWS_AS(generate_phantom(s), ValidationError);
  PhantomSpec t;
  t.seed = 77;
  t.axon_width = {1.5, 2.5};
  const nlohmann::json j = t;
  CHECK(j.at("axon_width") == nlohmann::json::array({1.5, 2.5}));
  CHECK(j.get<PhantomSpec>() == t);
  CHECK_THROWS_AS((nlohmann::json{{"radius", 3}}.get<PhantomSpec>()), ValidationError);
  CHECK_THROWS_AS((nlohmann::json{{"dendrite_width", {5, 2}}}.get<PhantomSpec>()), ValidationError);
}

TEST_CASE("corrupt: empty menu leaves everything unchanged") {
  const auto p = generate_phantom(PhantomSpec{});
  const auto c = corrupt(p.truth, {}, 3);
  CHECK(c.labels == p.truth.labels);
  CHECK(c.objects == p.truth.object_state());
  CHECK(c.manifest.empty());
}

TEST_CASE("corrupt: one delete-blob gives one missing entry") {
  const auto p = generate_phantom(PhantomSpec{});
  const CorruptionOp op{CorruptionType::DeleteBlob, 1};
  const auto c = corrupt(p.truth, std::span(&op, 1), 3);
  REQUIRE(c.manifest.size() == 1);
  CHECK(c.manifest[0].error == "missing");
  CHECK(c.objects.objects.size() + 1 == p.truth.objects.size());
  CHECK(c.labels == p.truth.labels);
}

TEST_CASE("corrupt: merge-blobs on adjacent mitochondria reduces the count by one") {
  PhantomSpec s;
  s.dendrite_mito_count = 12;
  const auto p = generate_phantom(s);
  const CorruptionOp op{CorruptionType::MergeBlobs, 1};
  const auto c = corrupt(p.truth, std::span(&op, 1), 3);
  REQUIRE(c.manifest.size() == 1);
  CHECK(c.manifest[0].error == "merged");
  CHECK(c.manifest[0].type == CorruptionType::MergeBlobs);
  CHECK(c.objects.objects.size() + 1 == p.truth.objects.size());
  CHECK(c.objects.satisfies_invariants());
  REQUIRE(c.manifest[0].objects.size() == 1);
  const auto* merged = c.objects.find(c.manifest[0].objects[0]);
  REQUIRE(merged != nullptr);
  std::size_t covered = 0;
  for (const auto& o : p.truth.objects) covered += set_intersection(o.pixels, merged->pixels) == o.pixels;
  CHECK(covered == 2);
}

TEST_CASE("corrupt: flip-region relabels the stated share and records it") {
  PhantomSpec s;
  s.cell_body_count = 1;
  const auto p = generate_phantom(s);
  const CorruptionOp op{CorruptionType::FlipRegion, 1, 0.3};
  const auto c = corrupt(p.truth, std::span(&op, 1), 4);
  REQUIRE(!c.manifest.empty());
  std::size_t listed = 0;
  for (const auto& m : c.manifest) {
    CHECK(m.error == "mislabeled");
    listed += m.pixels;
  }
  const std::size_t changed = disagreement(c.labels, p.truth.labels);
  CHECK(changed == listed);
  std::size_t fg = 0;
  for (std::size_t i = 0; i < c.labels.size(); ++i) {
    fg += p.truth.labels[i] != 0;
    if (c.labels[i] != p.truth.labels[i]) {
      CHECK(p.truth.labels[i] != 0);
      CHECK(c.labels[i] != 0);
    }
  }
  CHECK(static_cast<double>(changed) == doctest::Approx(0.3 * static_cast<double>(fg)).epsilon(0.05));
}

TEST_CASE("corrupt: deterministic per seed, every type, JSON manifest") {
  PhantomSpec s;
  s.dendrite_mito_count = 10;
  const auto p = generate_phantom(s);
  const std::vector<CorruptionOp> menu = {{CorruptionType::FlipRegion, 1, 0.2},
                                          {CorruptionType::MergeBlobs, 1},
                                          {CorruptionType::SplitBlob, 1},
                                          {CorruptionType::AddNoiseBlob, 2},
                                          {CorruptionType::DeleteBlob, 1}};
  const auto a = corrupt(p.truth, menu, 8);
  const auto b = corrupt(p.truth, menu, 8);
  CHECK(a.labels == b.labels);
  CHECK(a.objects == b.objects);
  REQUIRE(a.manifest.size() == b.manifest.size());
  std::map<std::string, int> kinds;
  for (std::size_t k = 0; k < a.manifest.size(); ++k) {
    CHECK(nlohmann::json(a.manifest[k]) == nlohmann::json(b.manifest[k]));
    ++kinds[a.manifest[k].error];
  }
  CHECK(kinds["merged"] == 1);
  CHECK(kinds["split"] == 1);
  CHECK(kinds["false-positive"] == 2);
  CHECK(kinds["missing"] == 1);
  CHECK(kinds["mislabeled"] >= 1);
  CHECK(a.objects.satisfies_invariants());
  const nlohmann::json j = a.manifest[0];
  CHECK(j.at("type") == to_string(a.manifest[0].type));
  CHECK(corruption_type_from_string("split-blob") == CorruptionType::SplitBlob);
  CHECK_THROWS_AS(corruption_type_from_string("smudge"), ValidationError);
}

TEST_CASE("scripted structure user: labels equal to truth need no strokes") {
  const auto p = generate_phantom(PhantomSpec{});
  const auto venus = enhance(p.venus, EnhancementParams{});
  const auto u = scripted_structure_user(p.truth.labels, p.truth.labels, venus, 0.5);
  CHECK(u.strokes.empty());
  CHECK(u.labels == p.truth.labels);
}

TEST_CASE("scripted structure user: a single flipped disc takes one stroke inside it") {
  const int w = 40, h = 40;
  ChannelRaster venus(w, h, 0.05);
  std::vector<std::uint8_t> truth(w * h, 0), current;
  for (int y = 5; y < 35; ++y)
    for (int x = 5; x < 35; ++x) {
      venus.set(y * w + x, 0.9);
      truth[y * w + x] = 1;
    }
  current = truth;
  std::vector<PixelIndex> disc;
  for (int y = 0; y < h; ++y)
    for (int x = 0; x < w; ++x)
      if ((x - 17) * (x - 17) + (y - 21) * (y - 21) < 9) {
        current[y * w + x] = 2;
        disc.push_back(y * w + x);
      }
  const StructureLabelRaster t(w, h, truth), c(w, h, current);
  const auto u = scripted_structure_user(c, t, venus, 0.5);
  REQUIRE(u.strokes.size() == 1);
  CHECK(std::find(disc.begin(), disc.end(), u.strokes[0].center) != disc.end());
  CHECK(u.strokes[0].label == StructureClass::Dendrite);
  CHECK(u.labels == t);
}

TEST_CASE("scripted structure user: budget limits touched pixels") {
  PhantomSpec s;
  s.cell_body_count = 1;
  const auto p = generate_phantom(s);
  const CorruptionOp op{CorruptionType::FlipRegion, 1, 0.3};
  const auto c = corrupt(p.truth, std::span(&op, 1), 2);
  const auto venus = enhance(p.venus, EnhancementParams{});
  StructureUserBudget b;
  b.max_touched = disagreement(c.labels, p.truth.labels) / 20;
  b.max_radius = 1.0;
  b.spacing = 6.0;
  const auto u = scripted_structure_user(c.labels, p.truth.labels, venus, 0.5, b);
  CHECK(!u.strokes.empty());
  CHECK(u.touched <= b.max_touched);
  for (std::size_t k = 0; k < u.strokes.size(); ++k)
    for (std::size_t l = k + 1; l < u.strokes.size(); ++l) {
      const Point a = p.venus.extent().point(u.strokes[k].center), q = p.venus.extent().point(u.strokes[l].center);
      CHECK(std::hypot(a.x - q.x, a.y - q.y) >= b.spacing);
    }
  CHECK(disagreement(u.labels, p.truth.labels) < disagreement(c.labels, p.truth.labels));
}

TEST_CASE("scripted structure user: unlimited budget leaves under 0.5% disagreement") {
  for (std::uint64_t seed : {1, 2, 3, 4}) {
    PhantomSpec s;
    s.seed = seed;
    s.cell_body_count = seed % 2;
    s.dendrite_count = 3;
    const auto p = generate_phantom(s);
    const CorruptionOp op{CorruptionType::FlipRegion, 1, 0.4};
    const auto c = corrupt(p.truth, std::span(&op, 1), seed);
    const auto venus = enhance(p.venus, EnhancementParams{});
    const auto u = scripted_structure_user(c.labels, p.truth.labels, venus, 0.5);
    // Replaying the strokes through the public brush gives the same labels.
    auto replay = c.labels;
    for (const auto& st : u.strokes)
      for (PixelIndex i : brush_region(venus, st)) replay.set(i, st.label);
    CHECK(replay == u.labels);
    CHECK(static_cast<double>(disagreement(u.labels, p.truth.labels)) < 0.005 * static_cast<double>(c.labels.size()));
  }
}

TEST_CASE("scripted mito user: one merged pair gives one split crossing the true boundary") {
  const Extent e{24, 12};
  ChannelRaster mito(e.width, e.height, 0.05);
  const PixelSet left = rect_set(e, {3, 3, 6, 5}), right = rect_set(e, {10, 3, 6, 5});
  for (PixelIndex i : set_union(left, right)) mito.set(i, 0.9);
  const auto enhanced = enhance(mito, EnhancementParams{});
  MitoState merged;
  merged.extent = e;
  merged.objects.push_back(merged.make_object(rect_set(e, {3, 3, 13, 5}), Provenance::Detected));
  const auto events = scripted_mito_user(merged, {left, right}, enhanced);
  REQUIRE(events.size() == 1);
  CHECK(events[0].kind == MitoEditKind::Split);
  for (const auto& pt : events[0].points) {
    CHECK(pt[0] >= 8.0);
    CHECK(pt[0] <= 10.0);
  }
  MitoEditor ed(merged);
  apply_mito_event(ed, events[0], enhanced);
  REQUIRE(ed.state().objects.size() == 2);
  for (const auto& o : ed.state().objects)
    CHECK((intersection_size(o.pixels, left) > 0) != (intersection_size(o.pixels, right) > 0));
}

TEST_CASE("scripted mito user: inverse edits restore object counts for each corruption type") {
  for (auto type : {CorruptionType::MergeBlobs, CorruptionType::SplitBlob, CorruptionType::AddNoiseBlob,
                    CorruptionType::DeleteBlob}) {
    CAPTURE(to_string(type));
    PhantomSpec s;
    s.seed = 5;
    s.dendrite_mito_count = 10;
    const auto p = generate_phantom(s);
    const CorruptionOp op{type, 1};
    const auto c = corrupt(p.truth, std::span(&op, 1), 6);
    REQUIRE(c.manifest.size() == 1);
    // Noise blobs must be bright for an exclusion to make sense.
    auto mito = p.mito;
    if (type == CorruptionType::AddNoiseBlob)
      for (const auto& o : c.objects.objects)
        for (PixelIndex i : o.pixels) mito.set(i, std::max(mito[i], 0.8));
    const auto enhanced = enhance(mito, EnhancementParams{});
    const auto events = scripted_mito_user(c.objects, truth_sets(p.truth), enhanced);
    MitoEditor ed(c.objects);
    for (const auto& ev : events) apply_mito_event(ed, ev, enhanced);
    CHECK(ed.state().objects.size() == p.truth.objects.size());
    CHECK(ed.state().satisfies_invariants());
  }
}
