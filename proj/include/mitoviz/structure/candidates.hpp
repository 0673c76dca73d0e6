#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "mitoviz/imgproc/raster.hpp"
#include "mitoviz/structure/labels.hpp"

namespace mitoviz {

enum class CandidateKind { MixedStructure, MitoObjectError, MitoBackgroundError };

std::string to_string(CandidateKind k);
CandidateKind candidate_kind_from_string(const std::string& s);

// Rectangle highlighted to the user as a probable error.
struct CandidateBox {
  Rect rect;
  CandidateKind kind = CandidateKind::MixedStructure;
  double score = 0.0;
  bool resolved = false;
  friend bool operator==(const CandidateBox&, const CandidateBox&) = default;
};

void to_json(nlohmann::json& j, const CandidateBox& box);
void from_json(const nlohmann::json& j, CandidateBox& box);

struct MixedLabelOptions {
  int window = 32;
  int min_count = 20;
};

// Sliding window (stride window/2) over the label raster. A window qualifies
// when at least two non-background classes each have min_count pixels in it.
// Overlapping qualifying windows merge into their bounding rectangle. Score is
// the second most frequent non-background class count over box area.
std::vector<CandidateBox> find_mixed_label_candidates(const StructureLabelRaster& labels,
                                                      const MixedLabelOptions& options = {});

}  // namespace mitoviz
