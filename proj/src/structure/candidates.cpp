#include "mitoviz/structure/candidates.hpp"

#include <algorithm>
#include <array>

#include "mitoviz/core/error.hpp"

namespace mitoviz {
namespace {

constexpr std::array<const char*, 3> kKindNames = {"mixed-structure", "mito-object-error", "mito-background-error"};

// Per-class summed-area tables for O(1) window counts.
class ClassIntegrals {
 public:
  explicit ClassIntegrals(const StructureLabelRaster& labels)
      : w_(labels.width()), h_(labels.height()), sums_(kStructureClassCount,
                                                        std::vector<int>(static_cast<std::size_t>(w_ + 1) * (h_ + 1), 0)) {
    for (int c = 1; c < kStructureClassCount; ++c) {
      auto& s = sums_[c];
      for (int y = 0; y < h_; ++y) {
        int row = 0;
        for (int x = 0; x < w_; ++x) {
          row += labels[static_cast<std::size_t>(y) * w_ + x] == c;
          s[at(x + 1, y + 1)] = s[at(x + 1, y)] + row;
        }
      }
    }
  }

  int count(int c, const Rect& r) const {
    const auto& s = sums_[c];
    return s[at(r.right(), r.bottom())] - s[at(r.x, r.bottom())] - s[at(r.right(), r.y)] + s[at(r.x, r.y)];
  }

 private:
  std::size_t at(int x, int y) const { return static_cast<std::size_t>(y) * (w_ + 1) + x; }
  int w_, h_;
  std::vector<std::vector<int>> sums_;
};

std::vector<int> window_starts(int extent, int window, int stride) {
  if (extent <= window) return {0};
  std::vector<int> starts;
  for (int s = 0; s + window <= extent; s += stride) starts.push_back(s);
  if (starts.back() + window < extent) starts.push_back(extent - window);
  return starts;
}

}  // namespace

std::string to_string(CandidateKind k) { return kKindNames.at(static_cast<std::size_t>(k)); }

CandidateKind candidate_kind_from_string(const std::string& s) {
  for (std::size_t i = 0; i < kKindNames.size(); ++i) {
    if (s == kKindNames[i]) return static_cast<CandidateKind>(i);
  }
  throw ValidationError("kind", "unknown candidate kind '" + s + "'");
}

void to_json(nlohmann::json& j, const CandidateBox& b) {
  j = {{"x", b.rect.x}, {"y", b.rect.y}, {"w", b.rect.w}, {"h", b.rect.h},
       {"kind", to_string(b.kind)}, {"score", b.score}, {"resolved", b.resolved}};
}

void from_json(const nlohmann::json& j, CandidateBox& b) {
  b.rect = {j.at("x").get<int>(), j.at("y").get<int>(), j.at("w").get<int>(), j.at("h").get<int>()};
  b.kind = candidate_kind_from_string(j.at("kind").get<std::string>());
  b.score = j.at("score").get<double>();
  b.resolved = j.value("resolved", false);
}

std::vector<CandidateBox> find_mixed_label_candidates(const StructureLabelRaster& labels,
                                                      const MixedLabelOptions& opt) {
  if (opt.window < 2) throw ValidationError("window", "window must be at least 2 pixels");
  if (opt.min_count < 1) throw ValidationError("min_count", "min_count must be positive");
  const ClassIntegrals integrals(labels);
  const int stride = std::max(1, opt.window / 2);

  std::vector<Rect> boxes;
  for (int y : window_starts(labels.height(), opt.window, stride)) {
    for (int x : window_starts(labels.width(), opt.window, stride)) {
      const Rect r{x, y, std::min(opt.window, labels.width() - x), std::min(opt.window, labels.height() - y)};
      int qualifying = 0;
      for (int c = 1; c < kStructureClassCount; ++c) qualifying += integrals.count(c, r) >= opt.min_count;
      if (qualifying >= 2) boxes.push_back(r);
    }
  }

  // Merge until no two boxes overlap; a merged box may swallow further boxes.
  bool merged = true;
  while (merged) {
    merged = false;
    for (std::size_t i = 0; i < boxes.size() && !merged; ++i) {
      for (std::size_t j = i + 1; j < boxes.size(); ++j) {
        if (boxes[i].overlaps(boxes[j])) {
          boxes[i] = boxes[i].united(boxes[j]);
          boxes.erase(boxes.begin() + static_cast<std::ptrdiff_t>(j));
          merged = true;
          break;
        }
      }
    }
  }
  std::sort(boxes.begin(), boxes.end(), [](const Rect& a, const Rect& b) { return std::tie(a.y, a.x) < std::tie(b.y, b.x); });

  std::vector<CandidateBox> out;
  out.reserve(boxes.size());
  for (const Rect& r : boxes) {
    std::array<int, kStructureClassCount - 1> counts{};
    for (int c = 1; c < kStructureClassCount; ++c) counts[c - 1] = integrals.count(c, r);
    std::sort(counts.begin(), counts.end(), std::greater<>());
    out.push_back({r, CandidateKind::MixedStructure, static_cast<double>(counts[1]) / r.area(), false});
  }
  return out;
}

}  // namespace mitoviz
