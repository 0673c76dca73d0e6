#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "mitoviz/mito/objects.hpp"
#include "mitoviz/structure/labels.hpp"
#include "mitoviz/synth/phantom.hpp"

namespace mitoviz {

enum class CorruptionType { FlipRegion, MergeBlobs, SplitBlob, AddNoiseBlob, DeleteBlob };

std::string to_string(CorruptionType t);
CorruptionType corruption_type_from_string(const std::string& s);

struct CorruptionOp {
  CorruptionType type = CorruptionType::FlipRegion;
  int count = 1;          // object edits to inject; flip-region ignores it
  double fraction = 0.3;  // flip-region: share of every labelled component to relabel
};

struct ManifestEntry {
  CorruptionType type;
  std::string error;  // "mislabeled", "merged", "split", "false-positive" or "missing"
  Rect bbox;
  std::size_t pixels = 0;
  std::vector<ObjectId> objects;  // ids in the corrupted state (empty for deletions)
};

void to_json(nlohmann::json& j, const ManifestEntry& m);

struct Corrupted {
  StructureLabelRaster labels;
  MitoState objects;
  std::vector<ManifestEntry> manifest;
};

// Deterministic per seed. Object operations start from truth.object_state().
Corrupted corrupt(const GroundTruth& truth, std::span<const CorruptionOp> menu, std::uint64_t seed);

}  // namespace mitoviz
