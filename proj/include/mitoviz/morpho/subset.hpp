#pragma once

#include <array>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mitoviz/morpho/features.hpp"

namespace mitoviz {

// Closed interval unless a bound is flagged strict; an absent bound is unbounded.
struct RangeFilter {
  Feature feature = Feature::Length;
  std::optional<double> min;
  std::optional<double> max;
  bool min_strict = false;
  bool max_strict = false;

  bool accepts(double v) const;
  void validate() const;
  friend bool operator==(const RangeFilter&, const RangeFilter&) = default;
};

struct RangeQuery {
  std::vector<RangeFilter> ranges;
  std::optional<std::vector<StructureClass>> structures;  // allowed codes; absent = any
};

std::vector<ObjectId> filter_by_ranges(const std::vector<MeasuredObject>& objects, const RangeQuery& query);

enum class ProjectionMethod { Pca, FeaturePair };

struct ProjectionParams {
  ProjectionMethod method = ProjectionMethod::Pca;
  Feature x = Feature::Length;  // feature-pair axes
  Feature y = Feature::Area;
  friend bool operator==(const ProjectionParams&, const ProjectionParams&) = default;
};

using Coord = std::array<double, 2>;

struct PcaResult {
  std::vector<Coord> coords;
  std::array<double, 4> eigenvalues{};  // descending, of the standardized covariance
  std::array<std::array<double, 4>, 2> axes{};
};

// Standardizes the four numeric features (population moments; constant features
// become 0) and projects onto the two leading eigenvectors, each signed so its
// largest-magnitude loading is positive. Directions with a negligible eigenvalue
// give zero coordinates. Throws ValidationError for fewer than two objects.
PcaResult pca(const std::vector<FeatureVector>& features);

std::vector<Coord> project(const std::vector<MeasuredObject>& objects, const ProjectionParams& params);

// Axis-aligned rectangle (inverted bounds make it empty) or a simple polygon;
// boundaries are inside.
struct Region {
  enum class Kind { Rectangle, Polygon } kind = Kind::Rectangle;
  double x0 = 0.0, y0 = 0.0, x1 = 0.0, y1 = 0.0;
  std::vector<Coord> polygon;

  static Region rectangle(double x0, double y0, double x1, double y1);
  static Region from_polygon(std::vector<Coord> vertices);
  bool contains(const Coord& p) const;
  friend bool operator==(const Region&, const Region&) = default;
};

std::vector<ObjectId> select_in_projection(const std::vector<ObjectId>& ids, const std::vector<Coord>& coords,
                                           const Region& region);

// Objects with at least one pixel in the mask.
std::vector<ObjectId> select_in_image(const MitoState& state, const PixelSet& mask);

// Composable subset definition.
struct Predicate {
  enum class Kind { All, And, Or, Not, Range, Structure, Projection, Image };
  Kind kind = Kind::All;
  std::vector<Predicate> children;          // And, Or, Not (exactly one)
  RangeFilter range;                        // Range
  std::vector<StructureClass> structures;   // Structure
  ProjectionParams projection;              // Projection
  Region region;                            // Projection
  PixelSet mask;                            // Image

  static Predicate all();
  static Predicate conjunction(std::vector<Predicate> c);
  static Predicate disjunction(std::vector<Predicate> c);
  static Predicate negation(Predicate c);
  static Predicate in_range(RangeFilter r);
  static Predicate in_structures(std::vector<StructureClass> s);
  static Predicate in_projection(ProjectionParams p, Region r);
  static Predicate in_image(PixelSet m);

  friend bool operator==(const Predicate&, const Predicate&) = default;
};

// Projection nodes project the full object list before selecting. Result is
// sorted by id.
std::vector<ObjectId> evaluate(const Predicate& p, const MitoState& state,
                               const std::vector<MeasuredObject>& measured);

nlohmann::json to_json(const Predicate& p);
// Image masks are stored as run-length rows and need the raster extent.
Predicate predicate_from_json(const nlohmann::json& j, const Extent& extent);

// "feature op value" terms joined by '&', ops <, <=, >, >=, =. The structure
// term takes a class name and only '='. Blank input selects everything.
Predicate parse_filter(const std::string& text);

struct Subset {
  std::uint64_t id = 0;
  std::string name;
  std::vector<ObjectId> members;
  Predicate definition;

  friend bool operator==(const Subset&, const Subset&) = default;
};

}  // namespace mitoviz
