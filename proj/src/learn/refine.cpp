#include "mitoviz/learn/refine.hpp"

#include "mitoviz/core/error.hpp"

namespace mitoviz {

TrainSignal structure_signal(const LabelEditor& editor) {
  const StructureLabelRaster& labels = editor.labels();
  TrainSignal s(labels.extent(), kStructureClassCount, {labels.codes().begin(), labels.codes().end()});
  for (const LabelEdit& edit : editor.journal()) {
    if (edit.source != EditSource::Brush) continue;
    for (const LabelChange& c : edit.changes) s.mark(c.pixel, c.after);
  }
  return s;
}

TrainSignal mito_signal(const MitoEditor& editor) {
  const BinaryMask fg = editor.state().foreground();
  TrainSignal s(fg.extent, 2, fg.bits);
  for (const MitoEdit& edit : editor.journal()) {
    if (edit.kind == MitoEditKind::Replace) continue;
    for (PixelIndex i : edit.touched) s.mark(i, fg.bits[i]);
  }
  return s;
}

std::vector<std::uint8_t> refined_codes(const Prediction& prediction, const TrainSignal& signal) {
  if (!(prediction.extent == signal.extent) || prediction.classes != signal.classes)
    throw ValidationError("prediction", "prediction does not match the training signal");
  std::vector<std::uint8_t> out = prediction.labels;
  for (std::size_t i = 0; i < out.size(); ++i)
    if (signal.mask[i]) out[i] = signal.target[i];
  return out;
}

}  // namespace mitoviz
