#include <algorithm>
#include <cmath>
#include <functional>
#include <numbers>
#include <set>

#include "doctest.h"
#include "mitoviz/core/error.hpp"
#include "mitoviz/core/rng.hpp"
#include "mitoviz/morpho/features.hpp"
#include "mitoviz/morpho/stats.hpp"
#include "mitoviz/morpho/subset.hpp"
#include "mitoviz/synth/phantom.hpp"

using namespace mitoviz;

namespace {

PixelSet pixels_where(const Extent& e, const std::function<bool(int, int)>& in) {
  std::vector<PixelIndex> v;
  for (int y = 0; y < e.height; ++y)
    for (int x = 0; x < e.width; ++x)
      if (in(x, y)) v.push_back(e.index(x, y));
  return PixelSet(e, std::move(v));
}

PixelSet rect_pixels(const Extent& e, int x0, int y0, int w, int h) {
  return pixels_where(e, [&](int x, int y) { return x >= x0 && x < x0 + w && y >= y0 && y < y0 + h; });
}

PixelSet disc_pixels(const Extent& e, double cx, double cy, double r) {
  return pixels_where(e, [&](int x, int y) { return (x - cx) * (x - cx) + (y - cy) * (y - cy) <= r * r; });
}

MitoObject object_of(PixelSet p) {
  MitoObject o;
  o.id = 1;
  o.bbox = p.bbox();
  o.pixels = std::move(p);
  return o;
}

MitoState state_of(const Extent& e, std::vector<PixelSet> objects) {
  MitoState s;
  s.extent = e;
  for (auto& p : objects) s.objects.push_back(s.make_object(std::move(p), Provenance::Detected));
  return s;
}

MeasuredObject measured(ObjectId id, double area, double circ, double ecc, double len,
                        StructureClass cls = StructureClass::Dendrite, std::size_t px = 1) {
  MeasuredObject m;
  m.id = id;
  m.features = {area, circ, ecc, len, cls};
  m.pixel_count = px;
  return m;
}

// Cyclic Jacobi rotations on a symmetric 4x4 matrix; returns eigenvalues and column eigenvectors.
void jacobi4(double a[4][4], double val[4], double vec[4][4]) {
  for (int i = 0; i < 4; ++i)
    for (int j = 0; j < 4; ++j) vec[i][j] = i == j;
  for (int sweep = 0; sweep < 100; ++sweep) {
    double off = 0.0;
    for (int p = 0; p < 4; ++p)
      for (int q = p + 1; q < 4; ++q) off += a[p][q] * a[p][q];
    if (off < 1e-30) break;
    for (int p = 0; p < 4; ++p) {
      for (int q = p + 1; q < 4; ++q) {
        if (std::fabs(a[p][q]) < 1e-300) continue;
        const double theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
        const double t = (theta >= 0 ? 1.0 : -1.0) / (std::fabs(theta) + std::sqrt(theta * theta + 1.0));
        const double c = 1.0 / std::sqrt(t * t + 1.0), s = t * c;
        for (int k = 0; k < 4; ++k) {
          const double akp = a[k][p], akq = a[k][q];
          a[k][p] = c * akp - s * akq;
          a[k][q] = s * akp + c * akq;
        }
        for (int k = 0; k < 4; ++k) {
          const double apk = a[p][k], aqk = a[q][k];
          a[p][k] = c * apk - s * aqk;
          a[q][k] = s * apk + c * aqk;
        }
        for (int k = 0; k < 4; ++k) {
          const double vkp = vec[k][p], vkq = vec[k][q];
          vec[k][p] = c * vkp - s * vkq;
          vec[k][q] = s * vkp + c * vkq;
        }
      }
    }
  }
  for (int i = 0; i < 4; ++i) val[i] = a[i][i];
}

std::vector<Coord> oracle_pca(const std::vector<FeatureVector>& f) {
  const std::size_t n = f.size();
  std::vector<std::array<double, 4>> z(n);
  for (int k = 0; k < 4; ++k) {
    double m = 0.0, v = 0.0;
    for (const auto& x : f) m += x.value(kNumericFeatures[k]);
    m /= static_cast<double>(n);
    for (const auto& x : f) v += std::pow(x.value(kNumericFeatures[k]) - m, 2);
    const double sd = std::sqrt(v / static_cast<double>(n));
    for (std::size_t i = 0; i < n; ++i) z[i][k] = sd > 0 ? (f[i].value(kNumericFeatures[k]) - m) / sd : 0.0;
  }
  double c[4][4] = {};
  for (int a = 0; a < 4; ++a)
    for (int b = 0; b < 4; ++b) {
      for (std::size_t i = 0; i < n; ++i) c[a][b] += z[i][a] * z[i][b];
      c[a][b] /= static_cast<double>(n);
    }
  double val[4], vec[4][4];
  jacobi4(c, val, vec);
  int order[4] = {0, 1, 2, 3};
  std::sort(order, order + 4, [&](int a, int b) { return val[a] > val[b]; });
  std::vector<Coord> out(n, Coord{0.0, 0.0});
  for (int axis = 0; axis < 2; ++axis) {
    const int col = order[axis];
    int big = 0;
    for (int k = 1; k < 4; ++k)
      if (std::fabs(vec[k][col]) > std::fabs(vec[big][col])) big = k;
    const double sign = vec[big][col] < 0 ? -1.0 : 1.0;
    for (std::size_t i = 0; i < n; ++i) {
      double s = 0.0;
      for (int k = 0; k < 4; ++k) s += z[i][k] * vec[k][col] * sign;
      out[i][axis] = s;
    }
  }
  return out;
}

}  // namespace

TEST_CASE("area is pixel count times squared pixel size") {
  const Extent e{20, 20};
  const StructureLabelRaster labels(20, 20, StructureClass::Dendrite);
  const auto f = compute_features(object_of(rect_pixels(e, 2, 3, 4, 5)), labels, 0.5);
  CHECK(f.area_um2 == doctest::Approx(20 * 0.25).epsilon(1e-12));
}

TEST_CASE("perimeters of squares and single pixels") {
  const Extent e{20, 20};
  for (int k : {2, 3, 7}) {
    const auto sq = rect_pixels(e, 3, 3, k, k);
    CHECK(contour_perimeter(sq) == doctest::Approx(4.0 * (k - 1)));
    CHECK(crack_perimeter(sq) == static_cast<std::size_t>(4 * k));
  }
  CHECK(contour_perimeter(rect_pixels(e, 5, 5, 1, 1)) == 0.0);
  CHECK(crack_perimeter(rect_pixels(e, 5, 5, 1, 1)) == 4u);
  // A one-pixel line is walked out and back.
  CHECK(contour_perimeter(rect_pixels(e, 2, 4, 6, 1)) == doctest::Approx(10.0));
  // Diagonal staircase of three pixels.
  const PixelSet diag(e, {e.index(1, 1), e.index(2, 2), e.index(3, 3)});
  CHECK(contour_perimeter(diag) == doctest::Approx(4.0 * std::numbers::sqrt2));
}

TEST_CASE("discs have circularity in [0.85, 1]") {
  const Extent e{64, 64};
  const StructureLabelRaster labels(64, 64, StructureClass::Dendrite);
  for (double r : {5.0, 10.0, 15.0, 20.0}) {
    const auto f = compute_features(object_of(disc_pixels(e, 32, 32, r)), labels, 1.0);
    CAPTURE(r);
    CHECK(f.circularity >= 0.85);
    CHECK(f.circularity <= 1.0);
    CHECK(f.eccentricity < 0.1);
  }
  const auto bar = compute_features(object_of(rect_pixels(e, 2, 30, 40, 3)), labels, 1.0);
  CHECK(bar.circularity < 0.5);
}

TEST_CASE("eccentricity of bars matches the closed form") {
  const Extent e{64, 8};
  for (int n : {1, 2, 5, 30}) {
    // Second moments of an n x 1 bar of unit squares: n^2 / 12 and 1 / 12.
    CHECK(eccentricity(rect_pixels(e, 1, 3, n, 1)) == doctest::Approx(std::sqrt(1.0 - 1.0 / (n * n))).epsilon(1e-12));
  }
  CHECK(eccentricity(rect_pixels(e, 1, 1, 4, 4)) == doctest::Approx(0.0));
  // Rotating by transposition leaves eccentricity unchanged.
  const Extent t{8, 64};
  CHECK(eccentricity(rect_pixels(t, 2, 1, 3, 20)) == doctest::Approx(eccentricity(rect_pixels(e, 1, 2, 20, 3))));
}

TEST_CASE("a 10-pixel bar at 0.21 um per pixel has length 1.89 um") {
  const Extent e{16, 5};
  const StructureLabelRaster labels(16, 5, StructureClass::Axon);
  const auto f = compute_features(object_of(rect_pixels(e, 3, 2, 10, 1)), labels, 0.21);
  CHECK(f.length_um == doctest::Approx(1.89).epsilon(1e-9));
}

TEST_CASE("skeleton is a thin subset and its diameter tracks the long axis") {
  const Extent e{60, 20};
  const auto bar = rect_pixels(e, 5, 6, 40, 5);
  const auto sk = skeletonize(bar);
  REQUIRE_FALSE(sk.empty());
  for (PixelIndex i : sk) CHECK(bar.contains(i));
  CHECK(sk.size() < bar.size() / 3);
  const double len = geodesic_diameter(sk);
  CHECK(len > 30.0);
  CHECK(len <= 40.0);
  // Thinning never empties an object.
  CHECK(skeletonize(rect_pixels(e, 1, 1, 2, 2)).size() >= 1);
}

TEST_CASE("geodesic diameter follows the shape, not the chord") {
  const Extent e{20, 20};
  // L: 8 pixels down then 8 pixels right sharing the corner.
  std::vector<PixelIndex> v;
  for (int y = 2; y < 10; ++y) v.push_back(e.index(2, y));
  for (int x = 3; x < 10; ++x) v.push_back(e.index(x, 9));
  const PixelSet l(e, v);
  // Shortest path uses one diagonal across the corner.
  CHECK(geodesic_diameter(l) == doctest::Approx(12.0 + std::numbers::sqrt2));
  CHECK(geodesic_diameter(rect_pixels(e, 4, 4, 1, 1)) == 0.0);
}

TEST_CASE("structure is the majority class with ties to the lower code") {
  const Extent e{10, 4};
  std::vector<std::uint8_t> codes(40, 0);
  for (int x = 0; x < 5; ++x) codes[x] = 2;
  for (int x = 5; x < 10; ++x) codes[x] = 1;
  const StructureLabelRaster labels(10, 4, codes);
  CHECK(compute_features(object_of(rect_pixels(e, 0, 0, 10, 1)), labels, 1).structure == StructureClass::Dendrite);
  CHECK(compute_features(object_of(rect_pixels(e, 0, 0, 7, 1)), labels, 1).structure == StructureClass::Axon);
  CHECK(compute_features(object_of(rect_pixels(e, 0, 0, 3, 3)), labels, 1).structure == StructureClass::Background);
}

TEST_CASE("compute_features rejects bad input") {
  const StructureLabelRaster labels(10, 10);
  CHECK_THROWS_AS(compute_features(object_of(PixelSet(Extent{10, 10})), labels, 1.0), ValidationError);
  CHECK_THROWS_AS(compute_features(object_of(rect_pixels({12, 10}, 0, 0, 2, 2)), labels, 1.0), ValidationError);
  CHECK_THROWS_AS(compute_features(object_of(rect_pixels({10, 10}, 0, 0, 2, 2)), labels, 0.0), ValidationError);
}

TEST_CASE("density over the structures the members lie in") {
  std::vector<std::uint8_t> codes(100, 0);
  for (int i = 0; i < 30; ++i) codes[i] = 1;
  for (int i = 30; i < 50; ++i) codes[i] = 2;
  const StructureLabelRaster labels(10, 10, codes);
  const std::vector<MeasuredObject> dend = {measured(1, 0, 0, 0, 0, StructureClass::Dendrite, 6),
                                            measured(2, 0, 0, 0, 0, StructureClass::Dendrite, 3)};
  CHECK(density(dend, labels) == doctest::Approx(9.0 / 30.0));
  const std::vector<MeasuredObject> both = {dend[0], measured(3, 0, 0, 0, 0, StructureClass::Axon, 4)};
  CHECK(density(both, labels) == doctest::Approx(10.0 / 50.0));
  CHECK(density(std::vector<MeasuredObject>{}, labels) == 0.0);
  const std::vector<MeasuredObject> body = {measured(4, 0, 0, 0, 0, StructureClass::CellBody, 5)};
  CHECK_THROWS_AS(density(body, labels), ValidationError);
}

TEST_CASE("range filters are closed unless strict") {
  const std::vector<MeasuredObject> objs = {measured(1, 1, 0.5, 0.1, 1.0), measured(2, 2, 0.6, 0.2, 2.0),
                                            measured(3, 3, 0.7, 0.3, 3.0, StructureClass::Axon)};
  RangeFilter r{Feature::Length, 1.0, 2.0};
  CHECK(filter_by_ranges(objs, {{r}, std::nullopt}) == std::vector<ObjectId>{1, 2});
  r.min_strict = true;
  CHECK(filter_by_ranges(objs, {{r}, std::nullopt}) == std::vector<ObjectId>{2});
  r.max_strict = true;
  CHECK(filter_by_ranges(objs, {{r}, std::nullopt}).empty());
  CHECK(filter_by_ranges(objs, {{RangeFilter{Feature::Area, 2.0, std::nullopt}}, std::nullopt}) ==
        std::vector<ObjectId>{2, 3});
  CHECK(filter_by_ranges(objs, {{}, std::vector<StructureClass>{StructureClass::Axon}}) == std::vector<ObjectId>{3});
  CHECK_THROWS_AS(filter_by_ranges(objs, {{RangeFilter{Feature::Area, 3.0, 1.0}}, std::nullopt}), ValidationError);
}

TEST_CASE("conjunction of ranges is the intersection of the single filters") {
  SplitMix64 rng(11);
  std::vector<MeasuredObject> objs;
  for (ObjectId id = 1; id <= 200; ++id)
    objs.push_back(measured(id, rng.uniform() * 5, rng.uniform(), rng.uniform(), rng.uniform() * 10));
  const std::vector<RangeFilter> ranges = {{Feature::Area, 1.0, 4.0}, {Feature::Circularity, 0.2, std::nullopt},
                                           {Feature::Length, std::nullopt, 6.5}};
  std::set<ObjectId> expect;
  for (const auto& o : objs) expect.insert(o.id);
  for (const auto& r : ranges) {
    const auto one = filter_by_ranges(objs, {{r}, std::nullopt});
    std::set<ObjectId> next;
    for (ObjectId id : one)
      if (expect.count(id)) next.insert(id);
    expect = next;
  }
  const auto both = filter_by_ranges(objs, {ranges, std::nullopt});
  CHECK(both == std::vector<ObjectId>(expect.begin(), expect.end()));
  CHECK_FALSE(both.empty());
}

TEST_CASE("PCA matches a Jacobi eigen oracle on five hand-made vectors") {
  const std::vector<FeatureVector> f = {{1.0, 0.9, 0.2, 2.0},
                                        {2.5, 0.7, 0.5, 4.0},
                                        {0.7, 0.95, 0.1, 1.1},
                                        {4.0, 0.3, 0.9, 9.0},
                                        {1.8, 0.6, 0.4, 3.3}};
  const auto got = pca(f);
  const auto want = oracle_pca(f);
  REQUIRE(got.coords.size() == 5);
  for (std::size_t i = 0; i < 5; ++i) {
    CHECK(std::fabs(got.coords[i][1] - want[i][1]) < 1e-8);
    CHECK(std::fabs(got.coords[i][0] - want[i][0]) < 1e-8);
  }
  for (std::size_t k = 1; k < 4; ++k) CHECK(got.eigenvalues[k - 1] >= got.eigenvalues[k]);
  CHECK(got.eigenvalues[0] + got.eigenvalues[1] + got.eigenvalues[2] + got.eigenvalues[3] == doctest::Approx(4.0));
}

TEST_CASE("collinear features project onto one axis") {
  std::vector<FeatureVector> f;
  for (int i = 0; i < 6; ++i) {
    const double t = i * 0.7;
    f.push_back({1.0 + 2.0 * t, 0.9 - 0.1 * t, 0.1 + 0.05 * t, 3.0 * t});
  }
  const auto r = pca(f);
  for (const auto& c : r.coords) CHECK(c[1] == 0.0);
  CHECK(r.coords.front()[0] != doctest::Approx(r.coords.back()[0]));
  CHECK_THROWS_AS(pca({f[0]}), ValidationError);
}

TEST_CASE("half-plane rectangle in the length-area plane selects short objects") {
  std::vector<MeasuredObject> objs;
  for (ObjectId id = 1; id <= 10; ++id) objs.push_back(measured(id, id * 0.3, 0.5, 0.5, id * 1.0));
  const ProjectionParams params{ProjectionMethod::FeaturePair, Feature::Length, Feature::Area};
  const auto coords = project(objs, params);
  std::vector<ObjectId> ids;
  for (const auto& o : objs) ids.push_back(o.id);
  const double cut = 4.0;
  const auto sel = select_in_projection(ids, coords, Region::rectangle(-1e9, -1e9, cut, 1e9));
  CHECK(sel == std::vector<ObjectId>{1, 2, 3, 4});  // boundary included
}

TEST_CASE("polygon regions include their boundary") {
  const auto tri = Region::from_polygon({{0, 0}, {4, 0}, {0, 4}});
  CHECK(tri.contains({1, 1}));
  CHECK(tri.contains({2, 2}));
  CHECK(tri.contains({0, 0}));
  CHECK(tri.contains({2, 0}));
  CHECK_FALSE(tri.contains({3, 3}));
  CHECK_FALSE(Region::rectangle(3, 3, 1, 1).contains({2, 2}));
}

TEST_CASE("an apical mask selects the objects planted under it") {
  PhantomSpec spec;
  spec.seed = 5;
  const auto ph = generate_phantom(spec);
  const MitoState state = ph.truth.object_state();
  const Extent e = state.extent;
  const auto mask = pixels_where(e, [&](int, int y) { return y < e.height / 2; });
  std::vector<ObjectId> expect;
  for (const auto& o : state.objects) {
    const bool any = std::any_of(o.pixels.begin(), o.pixels.end(),
                                 [&](PixelIndex i) { return e.point(i).y < e.height / 2; });
    if (any) expect.push_back(o.id);
  }
  REQUIRE_FALSE(expect.empty());
  CHECK(select_in_image(state, mask) == expect);
  CHECK_THROWS_AS(select_in_image(state, PixelSet(Extent{3, 3})), ValidationError);
}

TEST_CASE("predicates compose like set algebra and survive JSON") {
  const Extent e{30, 10};
  auto state = state_of(e, {rect_pixels(e, 0, 0, 4, 1), rect_pixels(e, 6, 0, 10, 1), rect_pixels(e, 0, 5, 20, 3),
                            disc_pixels(e, 25, 5, 3)});
  std::vector<std::uint8_t> codes(e.size(), 1);
  for (int x = 0; x < 30; ++x) codes[e.index(x, 0)] = 2;
  const StructureLabelRaster labels(30, 10, codes);
  const auto m = measure(state, labels, 0.1);
  const auto short_ = Predicate::in_range({Feature::Length, std::nullopt, 1.0});
  const auto axonal = Predicate::in_structures({StructureClass::Axon});
  const auto left = Predicate::in_image(rect_pixels(e, 0, 0, 5, 10));
  CHECK(evaluate(Predicate::all(), state, m) == std::vector<ObjectId>{1, 2, 3, 4});
  CHECK(evaluate(axonal, state, m) == std::vector<ObjectId>{1, 2});
  CHECK(evaluate(left, state, m) == std::vector<ObjectId>{1, 3});
  CHECK(evaluate(Predicate::conjunction({axonal, left}), state, m) == std::vector<ObjectId>{1});
  CHECK(evaluate(Predicate::disjunction({axonal, left}), state, m) == std::vector<ObjectId>{1, 2, 3});
  CHECK(evaluate(Predicate::negation(axonal), state, m) == std::vector<ObjectId>{3, 4});
  const auto pair = Predicate::in_projection({ProjectionMethod::FeaturePair, Feature::Length, Feature::Area},
                                             Region::rectangle(0, 0, 1.0, 10));
  CHECK(evaluate(pair, state, m) == evaluate(short_, state, m));
  const auto tree = Predicate::conjunction(
      {Predicate::negation(left), Predicate::disjunction({axonal, short_}),
       Predicate::in_projection({}, Region::from_polygon({{-10, -10}, {10, -10}, {10, 10}, {-10, 10}}))});
  const Predicate back = predicate_from_json(to_json(tree), e);
  CHECK(back == tree);
  CHECK(evaluate(back, state, m) == evaluate(tree, state, m));
  // PCA needs two objects; a single-object image selects nothing.
  auto one = state_of(e, {rect_pixels(e, 0, 0, 4, 1)});
  CHECK(evaluate(Predicate::in_projection({}, Region::rectangle(-9, -9, 9, 9)), one, measure(one, labels, 0.1)).empty());
  CHECK_THROWS_AS(predicate_from_json({{"op", "xor"}}, e), ValidationError);
  CHECK_THROWS_AS(predicate_from_json(nlohmann::json::array(), e), ValidationError);
}

TEST_CASE("snapshot statistics are reproducible from the stored members") {
  PhantomSpec spec;
  spec.seed = 9;
  const auto ph = generate_phantom(spec);
  const auto state = ph.truth.object_state();
  const auto m = measure(state, ph.truth.labels, 0.2);
  std::vector<MeasuredObject> dend;
  for (const auto& o : m)
    if (o.features.structure == StructureClass::Dendrite) dend.push_back(o);
  REQUIRE(dend.size() >= 2);
  const SnapshotPart part{"a.tif", dend, &ph.truth.labels};
  const Snapshot s = record_snapshot(std::span(&part, 1), "dendrites");
  CHECK(s.count == dend.size());
  CHECK(s.density == doctest::Approx(density(dend, ph.truth.labels)));
  double len = 0.0;
  for (const auto& f : s.features[0]) len += f.length_um;
  CHECK(*s.mean_length_um == doctest::Approx(len / static_cast<double>(s.count)));
  for (std::size_t i = 0; i < dend.size(); ++i) {
    CHECK(s.members[0][i] == dend[i].id);
    CHECK(s.features[0][i] == compute_features(*state.find(dend[i].id), ph.truth.labels, 0.2));
  }
  nlohmann::json j = s;
  CHECK(j.get<Snapshot>() == s);
}

TEST_CASE("group snapshots concatenate members across images") {
  const StructureLabelRaster labels(10, 10, StructureClass::Dendrite);
  const std::vector<MeasuredObject> a = {measured(1, 1, 0.5, 0.2, 1.0, StructureClass::Dendrite, 10)};
  const std::vector<MeasuredObject> b = {measured(1, 3, 0.7, 0.4, 2.0, StructureClass::Dendrite, 20),
                                         measured(2, 5, 0.9, 0.6, 6.0, StructureClass::Dendrite, 30)};
  const SnapshotPart parts[] = {{"a", a, &labels}, {"b", b, &labels}};
  const auto s = record_snapshot(parts, "pooled", "WT");
  CHECK(s.count == 3);
  CHECK(*s.mean_length_um == doctest::Approx(3.0));
  CHECK(*s.mean_area_um2 == doctest::Approx(3.0));
  CHECK(s.density == doctest::Approx(60.0 / 200.0));
  CHECK(s.images == std::vector<std::string>{"a", "b"});
  CHECK(s.members == std::vector<std::vector<ObjectId>>{{1}, {1, 2}});
}

TEST_CASE("empty snapshots have no means and empty CSV fields") {
  const SnapshotPart part{"x", {}, nullptr};
  const auto s = record_snapshot(std::span(&part, 1), "nothing");
  CHECK(s.count == 0);
  CHECK(s.density == 0.0);
  CHECK_FALSE(s.mean_length_um.has_value());
  const std::string csv = snapshots_csv(std::span(&s, 1));
  CHECK(csv == std::string(kSnapshotCsvHeader) + "\r\n0,nothing,,x,0,0.000000,,,,\r\n");
}

TEST_CASE("snapshot CSV quotes fields and is byte-stable") {
  const StructureLabelRaster labels(4, 4, StructureClass::Axon);
  const std::vector<MeasuredObject> a = {measured(7, 0.5, 0.25, 0.75, 1.5, StructureClass::Axon, 4)};
  const SnapshotPart part{"img,1", a, &labels};
  SnapshotStore store;
  Snapshot s = record_snapshot(std::span(&part, 1), "say \"hi\", ok");
  s.created_at = "2020-01-01T00:00:00Z";
  const auto& stored = store.add(s);
  CHECK(stored.id == 1);
  CHECK(store.add(record_snapshot(std::span(&part, 1), "second")).id == 2);
  CHECK_FALSE(store.find(2)->created_at.empty());
  CHECK_FALSE(store.find(3).has_value());
  const std::string csv = store.csv();
  CHECK(csv.rfind(std::string(kSnapshotCsvHeader) + "\r\n", 0) == 0);
  CHECK(csv.find("1,\"say \"\"hi\"\", ok\",,\"img,1\",1,0.250000,0.500000,1.500000,0.750000,0.250000\r\n") !=
        std::string::npos);
  CHECK(csv == store.csv());
  SnapshotStore other;
  other.add(s);
  other.add(record_snapshot(std::span(&part, 1), "second"));
  CHECK(other.csv() == csv);
}

TEST_CASE("percent difference and accuracy examples") {
  CHECK(percent_difference(3.65, 1.28) == doctest::Approx(64.93).epsilon(1e-3));
  CHECK(accuracy(1.28, 2.17) == doctest::Approx(30.47).epsilon(1e-3));
  CHECK(accuracy(3.65, 3.89) == doctest::Approx(93.42).epsilon(1e-3));
  CHECK(accuracy(2.0, 2.0) == 100.0);
  CHECK_THROWS_AS(accuracy(0.0, 1.0), ValidationError);
  CHECK_THROWS_AS(percent_difference(0.0, 1.0), ValidationError);
}

TEST_CASE("Welch test matches scipy reference values") {
  // scipy.stats.ttest_ind(..., equal_var=False)
  const double a[] = {1, 2, 3}, b[] = {1.1, 2.1, 3.1};
  const auto r = welch_t_test(a, b);
  CHECK(std::fabs(r.t - -0.12247448713915901) < 1e-9);
  CHECK(std::fabs(r.p - 0.9084300584902192) < 1e-6);
  CHECK(r.df == doctest::Approx(4.0));
  const double c[] = {1.0, 2.5, 3.0, 4.2}, d[] = {2.0, 2.2, 2.9};
  const auto r2 = welch_t_test(c, d);
  CHECK(std::fabs(r2.t - 0.430319841161526) < 1e-9);
  CHECK(std::fabs(r2.p - 0.6894859897989306) < 1e-6);
  const double same[] = {2, 2, 2}, other[] = {3, 3};
  CHECK(welch_t_test(same, same).p == 1.0);
  CHECK(welch_t_test(same, other).p == 0.0);
  CHECK_THROWS_AS(welch_t_test(std::span(a, 1), b), ValidationError);
}

TEST_CASE("compare reports means, percent differences and tests per feature") {
  const std::vector<FeatureVector> a = {{1, 0.5, 0.1, 2.0}, {3, 0.7, 0.3, 4.0}};
  const std::vector<FeatureVector> b = {{1, 0.6, 0.2, 1.0}};
  const auto c = compare(a, b);
  REQUIRE(c.size() == 4);
  CHECK(c[3].feature == Feature::Length);
  CHECK(c[3].mean_a == doctest::Approx(3.0));
  CHECK(c[3].percent_difference == doctest::Approx(100.0 * 2.0 / 3.0));
  CHECK_FALSE(c[3].test.has_value());
  const auto c2 = compare(a, a);
  REQUIRE(c2[0].test.has_value());
  CHECK(c2[0].test->p == doctest::Approx(1.0));
  CHECK_THROWS_AS(compare(a, std::vector<FeatureVector>{}), ValidationError);
}

TEST_CASE("filter grammar builds the same predicates as the API") {
  const auto p = parse_filter("length>0.5 & structure=dendrite");
  const auto want = Predicate::conjunction({Predicate::in_range({Feature::Length, 0.5, std::nullopt, true, false}),
                                            Predicate::in_structures({StructureClass::Dendrite})});
  CHECK(p == want);
  CHECK(parse_filter("  ") == Predicate::all());
  CHECK(parse_filter("area<=2") == Predicate::in_range({Feature::Area, std::nullopt, 2.0, false, false}));
  CHECK(parse_filter("circularity=0.25") == Predicate::in_range({Feature::Circularity, 0.25, 0.25}));
  CHECK_THROWS_AS(parse_filter("length>>1"), ValidationError);
  CHECK_THROWS_AS(parse_filter("width>1"), ValidationError);
  CHECK_THROWS_AS(parse_filter("structure<axon"), ValidationError);
  CHECK_THROWS_AS(parse_filter("length>"), ValidationError);
}
