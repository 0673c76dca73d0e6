#include "mitoviz/structure/brush.hpp"

#include <cmath>

#include "mitoviz/core/error.hpp"
#include "mitoviz/imgproc/components.hpp"

namespace mitoviz {

void BrushStroke::validate() const {
  if (!(radius > 0.0) || !std::isfinite(radius)) throw ValidationError("radius", "brush radius must be positive");
  if (!(sigma_s >= 0.0 && sigma_s <= 1.0)) throw ValidationError("sigma_s", "sigma_s must lie in [0,1]");
  if (static_cast<int>(label) >= kStructureClassCount) throw ValidationError("label", "brush label outside 0..3");
}

PixelSet brush_region(const ChannelRaster& venus, const BrushStroke& stroke) {
  stroke.validate();
  if (stroke.center >= venus.size()) throw ValidationError("center", "brush centre outside the raster");
  const Threshold kind = stroke.label == StructureClass::Background ? Threshold::Below : Threshold::AtOrAbove;
  const PixelSet cc = connected_component(venus, stroke.center, kind, stroke.sigma_s);
  const Extent& e = venus.extent();
  const Point u = e.point(stroke.center);
  const double r2 = stroke.radius * stroke.radius;
  std::vector<PixelIndex> out;
  for (PixelIndex i : cc) {
    const Point p = e.point(i);
    const double dx = p.x - u.x, dy = p.y - u.y;
    if (dx * dx + dy * dy < r2) out.push_back(i);
  }
  return PixelSet::from_sorted(e, std::move(out));
}

BrushResult apply_brush(const StructureLabelRaster& labels, const ChannelRaster& venus, const BrushStroke& stroke) {
  if (labels.extent() != venus.extent()) throw ValidationError("extent", "label raster and Venus channel differ in size");
  BrushResult r{labels, brush_region(venus, stroke)};
  for (PixelIndex i : r.affected) r.labels.set(i, stroke.label);
  return r;
}

PixelSet LabelEditor::brush(const ChannelRaster& venus, const BrushStroke& stroke) {
  if (labels_.extent() != venus.extent()) throw ValidationError("extent", "label raster and Venus channel differ in size");
  PixelSet b = brush_region(venus, stroke);
  LabelEdit edit{EditSource::Brush, {}};
  edit.changes.reserve(b.size());
  const auto code = static_cast<std::uint8_t>(stroke.label);
  for (PixelIndex i : b) {
    edit.changes.push_back({i, labels_[i], code});
    labels_.set(i, stroke.label);
  }
  journal_.push_back(std::move(edit));
  return b;
}

std::size_t LabelEditor::replace(const StructureLabelRaster& next) {
  if (next.extent() != labels_.extent()) throw ValidationError("extent", "replacement label raster differs in size");
  LabelEdit edit{EditSource::Replace, {}};
  for (std::size_t i = 0; i < next.size(); ++i) {
    if (next[i] != labels_[i]) edit.changes.push_back({static_cast<PixelIndex>(i), labels_[i], next[i]});
  }
  labels_ = next;
  const std::size_t n = edit.changes.size();
  journal_.push_back(std::move(edit));
  return n;
}

bool LabelEditor::undo() {
  if (journal_.empty()) return false;
  const LabelEdit& last = journal_.back();
  for (auto it = last.changes.rbegin(); it != last.changes.rend(); ++it) {
    labels_.set(it->pixel, static_cast<StructureClass>(it->before));
  }
  journal_.pop_back();
  return true;
}

}  // namespace mitoviz
