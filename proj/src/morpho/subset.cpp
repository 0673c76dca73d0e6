#include "mitoviz/morpho/subset.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>

#include <Eigen/Eigenvalues>

#include "mitoviz/core/error.hpp"

namespace mitoviz {
namespace {

std::vector<ObjectId> sorted(std::vector<ObjectId> v) {
  std::sort(v.begin(), v.end());
  return v;
}

std::vector<ObjectId> all_ids(const std::vector<MeasuredObject>& m) {
  std::vector<ObjectId> ids;
  for (const auto& o : m) ids.push_back(o.id);
  return sorted(ids);
}

bool on_segment(const Coord& p, const Coord& a, const Coord& b) {
  const double cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0]);
  const double scale = std::max({1.0, std::abs(b[0] - a[0]), std::abs(b[1] - a[1])});
  if (std::abs(cross) > 1e-12 * scale) return false;
  return p[0] >= std::min(a[0], b[0]) && p[0] <= std::max(a[0], b[0]) && p[1] >= std::min(a[1], b[1]) &&
         p[1] <= std::max(a[1], b[1]);
}

std::string method_name(ProjectionMethod m) { return m == ProjectionMethod::Pca ? "pca" : "feature-pair"; }

ProjectionMethod method_from_string(const std::string& s) {
  if (s == "pca") return ProjectionMethod::Pca;
  if (s == "feature-pair") return ProjectionMethod::FeaturePair;
  throw ValidationError("method", "unknown projection method '" + s + "'");
}

}  // namespace

bool RangeFilter::accepts(double v) const {
  if (min && (min_strict ? !(v > *min) : !(v >= *min))) return false;
  if (max && (max_strict ? !(v < *max) : !(v <= *max))) return false;
  return true;
}

void RangeFilter::validate() const {
  if ((min && !std::isfinite(*min)) || (max && !std::isfinite(*max)))
    throw ValidationError("range", "range bounds must be finite");
  if (min && max && *min > *max) throw ValidationError("range", "range minimum exceeds maximum");
}

std::vector<ObjectId> filter_by_ranges(const std::vector<MeasuredObject>& objects, const RangeQuery& query) {
  for (const auto& r : query.ranges) r.validate();
  std::vector<ObjectId> out;
  for (const auto& o : objects) {
    bool ok = std::all_of(query.ranges.begin(), query.ranges.end(),
                          [&](const RangeFilter& r) { return r.accepts(o.features.value(r.feature)); });
    if (ok && query.structures)
      ok = std::find(query.structures->begin(), query.structures->end(), o.features.structure) !=
           query.structures->end();
    if (ok) out.push_back(o.id);
  }
  return sorted(out);
}

PcaResult pca(const std::vector<FeatureVector>& features) {
  const std::size_t n = features.size();
  if (n < 2) throw ValidationError("objects", "PCA needs at least two objects");
  Eigen::MatrixXd z(n, 4);
  for (std::size_t i = 0; i < n; ++i)
    for (int k = 0; k < 4; ++k) z(i, k) = features[i].value(kNumericFeatures[k]);
  for (int k = 0; k < 4; ++k) {
    const double mean = z.col(k).mean();
    z.col(k).array() -= mean;
    const double sd = std::sqrt(z.col(k).squaredNorm() / static_cast<double>(n));
    if (sd > 1e-12 * std::max(1.0, std::abs(mean))) {
      z.col(k) /= sd;
    } else {
      z.col(k).setZero();
    }
  }
  const Eigen::Matrix4d cov = (z.transpose() * z) / static_cast<double>(n);
  const Eigen::SelfAdjointEigenSolver<Eigen::Matrix4d> solver(cov);
  PcaResult out;
  for (int k = 0; k < 4; ++k) out.eigenvalues[k] = std::max(0.0, solver.eigenvalues()(3 - k));
  const double tol = 1e-10 * std::max(1.0, out.eigenvalues[0]);
  Eigen::Matrix<double, 4, 2> axes = Eigen::Matrix<double, 4, 2>::Zero();
  for (int a = 0; a < 2; ++a) {
    if (out.eigenvalues[a] <= tol) continue;
    Eigen::Vector4d v = solver.eigenvectors().col(3 - a);
    int lead = 0;
    for (int k = 1; k < 4; ++k)
      if (std::abs(v(k)) > std::abs(v(lead)) + 1e-12) lead = k;
    if (v(lead) < 0) v = -v;
    axes.col(a) = v;
  }
  for (int a = 0; a < 2; ++a)
    for (int k = 0; k < 4; ++k) out.axes[a][k] = axes(k, a);
  const Eigen::MatrixXd proj = z * axes;
  out.coords.resize(n);
  for (std::size_t i = 0; i < n; ++i) out.coords[i] = {proj(i, 0), proj(i, 1)};
  return out;
}

std::vector<Coord> project(const std::vector<MeasuredObject>& objects, const ProjectionParams& params) {
  if (params.method == ProjectionMethod::FeaturePair) {
    std::vector<Coord> out;
    for (const auto& o : objects) out.push_back({o.features.value(params.x), o.features.value(params.y)});
    return out;
  }
  std::vector<FeatureVector> f;
  for (const auto& o : objects) f.push_back(o.features);
  return pca(f).coords;
}

Region Region::rectangle(double x0, double y0, double x1, double y1) {
  Region r;
  r.kind = Kind::Rectangle;
  r.x0 = x0;
  r.y0 = y0;
  r.x1 = x1;
  r.y1 = y1;
  return r;
}

Region Region::from_polygon(std::vector<Coord> vertices) {
  Region r;
  r.kind = Kind::Polygon;
  r.polygon = std::move(vertices);
  return r;
}

bool Region::contains(const Coord& p) const {
  if (kind == Kind::Rectangle) return p[0] >= x0 && p[0] <= x1 && p[1] >= y0 && p[1] <= y1;
  const std::size_t n = polygon.size();
  if (n < 3) return false;
  for (std::size_t i = 0; i < n; ++i)
    if (on_segment(p, polygon[i], polygon[(i + 1) % n])) return true;
  bool inside = false;
  for (std::size_t i = 0, j = n - 1; i < n; j = i++) {
    const Coord& a = polygon[i];
    const Coord& b = polygon[j];
    if ((a[1] > p[1]) != (b[1] > p[1]) && p[0] < (b[0] - a[0]) * (p[1] - a[1]) / (b[1] - a[1]) + a[0])
      inside = !inside;
  }
  return inside;
}

std::vector<ObjectId> select_in_projection(const std::vector<ObjectId>& ids, const std::vector<Coord>& coords,
                                           const Region& region) {
  if (ids.size() != coords.size()) throw ValidationError("coords", "one coordinate per object is required");
  std::vector<ObjectId> out;
  for (std::size_t i = 0; i < ids.size(); ++i)
    if (region.contains(coords[i])) out.push_back(ids[i]);
  return sorted(out);
}

std::vector<ObjectId> select_in_image(const MitoState& state, const PixelSet& mask) {
  if (!(mask.extent() == state.extent)) throw ValidationError("mask", "mask dimensions differ from the image");
  std::vector<ObjectId> out;
  for (const auto& o : state.objects)
    if (intersection_size(o.pixels, mask) > 0) out.push_back(o.id);
  return sorted(out);
}

Predicate Predicate::all() { return {}; }

Predicate Predicate::conjunction(std::vector<Predicate> c) {
  Predicate p;
  p.kind = Kind::And;
  p.children = std::move(c);
  return p;
}

Predicate Predicate::disjunction(std::vector<Predicate> c) {
  Predicate p;
  p.kind = Kind::Or;
  p.children = std::move(c);
  return p;
}

Predicate Predicate::negation(Predicate c) {
  Predicate p;
  p.kind = Kind::Not;
  p.children.push_back(std::move(c));
  return p;
}

Predicate Predicate::in_range(RangeFilter r) {
  r.validate();
  Predicate p;
  p.kind = Kind::Range;
  p.range = r;
  return p;
}

Predicate Predicate::in_structures(std::vector<StructureClass> s) {
  Predicate p;
  p.kind = Kind::Structure;
  p.structures = std::move(s);
  return p;
}

Predicate Predicate::in_projection(ProjectionParams params, Region r) {
  Predicate p;
  p.kind = Kind::Projection;
  p.projection = params;
  p.region = std::move(r);
  return p;
}

Predicate Predicate::in_image(PixelSet m) {
  Predicate p;
  p.kind = Kind::Image;
  p.mask = std::move(m);
  return p;
}

std::vector<ObjectId> evaluate(const Predicate& p, const MitoState& state,
                               const std::vector<MeasuredObject>& measured) {
  const std::vector<ObjectId> everyone = all_ids(measured);
  switch (p.kind) {
    case Predicate::Kind::All: return everyone;
    case Predicate::Kind::And: {
      std::vector<ObjectId> acc = everyone;
      for (const auto& c : p.children) {
        const auto m = evaluate(c, state, measured);
        std::vector<ObjectId> next;
        std::set_intersection(acc.begin(), acc.end(), m.begin(), m.end(), std::back_inserter(next));
        acc = std::move(next);
      }
      return acc;
    }
    case Predicate::Kind::Or: {
      std::vector<ObjectId> acc;
      for (const auto& c : p.children) {
        const auto m = evaluate(c, state, measured);
        std::vector<ObjectId> next;
        std::set_union(acc.begin(), acc.end(), m.begin(), m.end(), std::back_inserter(next));
        acc = std::move(next);
      }
      return acc;
    }
    case Predicate::Kind::Not: {
      if (p.children.size() != 1) throw ValidationError("not", "negation takes exactly one operand");
      const auto m = evaluate(p.children[0], state, measured);
      std::vector<ObjectId> out;
      std::set_difference(everyone.begin(), everyone.end(), m.begin(), m.end(), std::back_inserter(out));
      return out;
    }
    case Predicate::Kind::Range: return filter_by_ranges(measured, {{p.range}, std::nullopt});
    case Predicate::Kind::Structure: return filter_by_ranges(measured, {{}, p.structures});
    case Predicate::Kind::Projection: {
      if (p.projection.method == ProjectionMethod::Pca && measured.size() < 2) return {};
      std::vector<ObjectId> ids;
      for (const auto& o : measured) ids.push_back(o.id);
      return select_in_projection(ids, project(measured, p.projection), p.region);
    }
    case Predicate::Kind::Image: return select_in_image(state, p.mask);
  }
  return {};
}

nlohmann::json to_json(const Predicate& p) {
  using nlohmann::json;
  switch (p.kind) {
    case Predicate::Kind::All: return {{"op", "all"}};
    case Predicate::Kind::And:
    case Predicate::Kind::Or: {
      json c = json::array();
      for (const auto& ch : p.children) c.push_back(to_json(ch));
      return {{"op", p.kind == Predicate::Kind::And ? "and" : "or"}, {"children", c}};
    }
    case Predicate::Kind::Not: return {{"op", "not"}, {"child", to_json(p.children.at(0))}};
    case Predicate::Kind::Range: {
      json j = {{"op", "range"}, {"feature", to_string(p.range.feature)}};
      if (p.range.min) j["min"] = *p.range.min;
      if (p.range.max) j["max"] = *p.range.max;
      if (p.range.min_strict) j["min_strict"] = true;
      if (p.range.max_strict) j["max_strict"] = true;
      return j;
    }
    case Predicate::Kind::Structure: {
      json c = json::array();
      for (auto s : p.structures) c.push_back(to_string(s));
      return {{"op", "structure"}, {"classes", c}};
    }
    case Predicate::Kind::Projection: {
      json j = {{"op", "projection"}, {"method", method_name(p.projection.method)}};
      if (p.projection.method == ProjectionMethod::FeaturePair) {
        j["x"] = to_string(p.projection.x);
        j["y"] = to_string(p.projection.y);
      }
      if (p.region.kind == Region::Kind::Rectangle) {
        j["region"] = {{"rect", {p.region.x0, p.region.y0, p.region.x1, p.region.y1}}};
      } else {
        json poly = json::array();
        for (const auto& v : p.region.polygon) poly.push_back({v[0], v[1]});
        j["region"] = {{"polygon", poly}};
      }
      return j;
    }
    case Predicate::Kind::Image: return {{"op", "image"}, {"rle", encode_rle(p.mask)}};
  }
  return {};
}

Predicate predicate_from_json(const nlohmann::json& j, const Extent& extent) {
  if (!j.is_object() || !j.contains("op") || !j["op"].is_string())
    throw ValidationError("definition", "predicate must be an object with an \"op\"");
  const std::string op = j["op"];
  try {
    if (op == "all") return Predicate::all();
    if (op == "and" || op == "or") {
      std::vector<Predicate> c;
      for (const auto& ch : j.at("children")) c.push_back(predicate_from_json(ch, extent));
      return op == "and" ? Predicate::conjunction(std::move(c)) : Predicate::disjunction(std::move(c));
    }
    if (op == "not") return Predicate::negation(predicate_from_json(j.at("child"), extent));
    if (op == "range") {
      RangeFilter r;
      r.feature = feature_from_string(j.at("feature").get<std::string>());
      if (j.contains("min") && !j["min"].is_null()) r.min = j["min"].get<double>();
      if (j.contains("max") && !j["max"].is_null()) r.max = j["max"].get<double>();
      r.min_strict = j.value("min_strict", false);
      r.max_strict = j.value("max_strict", false);
      return Predicate::in_range(r);
    }
    if (op == "structure") {
      std::vector<StructureClass> s;
      for (const auto& c : j.at("classes")) s.push_back(structure_class_from_string(c.get<std::string>()));
      return Predicate::in_structures(std::move(s));
    }
    if (op == "projection") {
      ProjectionParams params;
      params.method = method_from_string(j.at("method").get<std::string>());
      if (j.contains("x")) params.x = feature_from_string(j["x"].get<std::string>());
      if (j.contains("y")) params.y = feature_from_string(j["y"].get<std::string>());
      const auto& reg = j.at("region");
      Region r;
      if (reg.contains("rect")) {
        const auto& b = reg["rect"];
        if (!b.is_array() || b.size() != 4) throw ValidationError("region", "rect needs [x0, y0, x1, y1]");
        r = Region::rectangle(b[0].get<double>(), b[1].get<double>(), b[2].get<double>(), b[3].get<double>());
      } else if (reg.contains("polygon")) {
        std::vector<Coord> v;
        for (const auto& pt : reg["polygon"]) v.push_back({pt.at(0).get<double>(), pt.at(1).get<double>()});
        r = Region::from_polygon(std::move(v));
      } else {
        throw ValidationError("region", "region needs \"rect\" or \"polygon\"");
      }
      return Predicate::in_projection(params, std::move(r));
    }
    if (op == "image") return Predicate::in_image(decode_rle(extent, j.at("rle")));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("definition", std::string("malformed predicate: ") + e.what());
  }
  throw ValidationError("op", "unknown predicate op '" + op + "'");
}

}  // namespace mitoviz

namespace mitoviz {
namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t");
  if (b == std::string::npos) return "";
  return s.substr(b, s.find_last_not_of(" \t") - b + 1);
}

Predicate parse_term(const std::string& term) {
  static const char* ops[] = {"<=", ">=", "<", ">", "="};
  for (const char* op : ops) {
    const auto at = term.find(op);
    if (at == std::string::npos) continue;
    const std::string name = trim(term.substr(0, at));
    const std::string value = trim(term.substr(at + std::strlen(op)));
    if (name.empty() || value.empty()) break;
    const std::string o = op;
    if (name == "structure") {
      if (o != "=") throw ValidationError("filter", "structure only supports '='");
      return Predicate::in_structures({structure_class_from_string(value)});
    }
    const Feature f = feature_from_string(name);
    double v = 0.0;
    std::size_t used = 0;
    try {
      v = std::stod(value, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != value.size()) throw ValidationError("filter", "'" + value + "' is not a number");
    RangeFilter r;
    r.feature = f;
    if (o == "<" || o == "<=") r.max = v, r.max_strict = o == "<";
    if (o == ">" || o == ">=") r.min = v, r.min_strict = o == ">";
    if (o == "=") r.min = r.max = v;
    return Predicate::in_range(r);
  }
  throw ValidationError("filter", "cannot parse term '" + term + "'");
}

}  // namespace

Predicate parse_filter(const std::string& text) {
  if (trim(text).empty()) return Predicate::all();
  std::vector<Predicate> terms;
  std::size_t start = 0;
  while (true) {
    const auto amp = text.find('&', start);
    terms.push_back(parse_term(trim(text.substr(start, amp == std::string::npos ? std::string::npos : amp - start))));
    if (amp == std::string::npos) break;
    start = amp + 1;
  }
  return terms.size() == 1 ? terms.front() : Predicate::conjunction(std::move(terms));
}

}  // namespace mitoviz
