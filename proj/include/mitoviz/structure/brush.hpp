#pragma once

#include <vector>

#include "mitoviz/imgproc/raster.hpp"
#include "mitoviz/structure/labels.hpp"

namespace mitoviz {

struct BrushStroke {
  PixelIndex center = 0;
  double radius = 1.0;
  StructureClass label = StructureClass::Dendrite;
  double sigma_s = 0.5;

  void validate() const;
  friend bool operator==(const BrushStroke&, const BrushStroke&) = default;
};

// Pixels i with |i - u| < r that lie in the connected component of u on the
// enhanced Venus channel: below sigma_s for background brushes, at or above
// otherwise. Throws ValidationError when the centre is outside the raster.
PixelSet brush_region(const ChannelRaster& venus_enhanced, const BrushStroke& stroke);

struct BrushResult {
  StructureLabelRaster labels;
  PixelSet affected;
};

BrushResult apply_brush(const StructureLabelRaster& labels, const ChannelRaster& venus_enhanced,
                        const BrushStroke& stroke);

struct LabelChange {
  PixelIndex pixel;
  std::uint8_t before;
  std::uint8_t after;
  friend bool operator==(const LabelChange&, const LabelChange&) = default;
};

enum class EditSource { Brush, Replace };

// One undoable step. Brush records keep every pixel of B(u), including those
// that already held the brush label, so they double as user-input masks.
struct LabelEdit {
  EditSource source = EditSource::Brush;
  std::vector<LabelChange> changes;
};

// Session-owned label raster with an unbounded undo journal.
class LabelEditor {
 public:
  LabelEditor() = default;
  explicit LabelEditor(StructureLabelRaster initial) : labels_(std::move(initial)) {}

  const StructureLabelRaster& labels() const { return labels_; }
  const std::vector<LabelEdit>& journal() const { return journal_; }

  PixelSet brush(const ChannelRaster& venus_enhanced, const BrushStroke& stroke);
  // Wholesale replacement (e.g. a re-segmentation); journaled as a diff.
  std::size_t replace(const StructureLabelRaster& next);
  bool undo();

 private:
  StructureLabelRaster labels_;
  std::vector<LabelEdit> journal_;
};

}  // namespace mitoviz
