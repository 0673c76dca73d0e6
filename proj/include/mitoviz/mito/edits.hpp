#pragma once

#include <array>
#include <span>
#include <vector>

#include "mitoviz/imgproc/components.hpp"
#include "mitoviz/imgproc/raster.hpp"
#include "mitoviz/mito/objects.hpp"

namespace mitoviz {

// A user-drawn line as an ordered chain of pixels; consecutive pixels are
// 8-neighbours (or repeats).
struct Polyline {
  Extent extent;
  std::vector<PixelIndex> pixels;

  // Throws ValidationError when empty, out of bounds or not a chain.
  void validate() const;
};

// Bresenham walk between consecutive (x, y) points rounded to pixel centres.
// Points outside the raster are rejected.
Polyline rasterize_polyline(const Extent& extent, std::span<const std::array<double, 2>> points);

// Distance bound used by split/merge propagation, in pixels.
inline constexpr double kPropagationRadius = 5.0;

// P(u_l) = { i | exists j on the line: i in CC(j, kind sigma) and |i - j| < radius }.
PixelSet propagated_region(const ChannelRaster& mito_enhanced, const Polyline& line, Threshold kind, double sigma,
                           double radius = kPropagationRadius);

// Removes the listed objects. Unknown ids throw NotFoundError, state unchanged.
MitoState exclude(const MitoState& state, std::span<const ObjectId> ids);

// Removes P_b (below-threshold propagation) from the object and re-partitions
// what is left; every resulting component is a new user-split object placed
// where the original was. Throws ValidationError if the line misses the
// object's bbox or if nothing would remain.
MitoState split(const MitoState& state, ObjectId id, const Polyline& line, const ChannelRaster& mito_enhanced,
                double sigma_m, double radius = kPropagationRadius);

// Grows the foreground by P_f plus the line and fuses it with every object it
// overlaps or 4-touches. Only the part of P_f connected to the line is added.
MitoState merge_or_include(const MitoState& state, const Polyline& line, const ChannelRaster& mito_enhanced,
                           double sigma_m, double radius = kPropagationRadius);

// Foreground pixels that differ between two states.
struct ForegroundDiff {
  PixelSet added;
  PixelSet removed;
};
ForegroundDiff foreground_diff(const MitoState& before, const MitoState& after);

enum class MitoEditKind { Exclude, Split, Merge, Replace };

struct MitoEdit {
  MitoEditKind kind;
  MitoState before;
  ForegroundDiff diff;
  // Pixels the user edit explicitly addressed (P_b for split, P_f and the
  // line for merge, removed objects for exclude); these become training input.
  PixelSet touched;
};

// Session-owned object state with an unbounded undo journal.
class MitoEditor {
 public:
  MitoEditor() = default;
  explicit MitoEditor(MitoState initial) : state_(std::move(initial)) {}

  const MitoState& state() const { return state_; }
  const std::vector<MitoEdit>& journal() const { return journal_; }

  void exclude(std::span<const ObjectId> ids);
  void split(ObjectId id, const Polyline& line, const ChannelRaster& mito_enhanced);
  void merge_or_include(const Polyline& line, const ChannelRaster& mito_enhanced);
  void replace(MitoState next);
  bool undo();

  void set_thresholds(double sigma_m, double sigma_e);

 private:
  void commit(MitoEditKind kind, MitoState next, PixelSet touched);

  MitoState state_;
  std::vector<MitoEdit> journal_;
};

}  // namespace mitoviz
