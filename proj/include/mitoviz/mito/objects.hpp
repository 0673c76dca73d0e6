#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "mitoviz/imgproc/raster.hpp"

namespace mitoviz {

using ObjectId = std::uint32_t;

enum class Provenance { Detected, UserSplit, UserMerged, UserIncluded };

std::string to_string(Provenance p);
Provenance provenance_from_string(const std::string& s);

struct MitoObject {
  ObjectId id = 0;
  PixelSet pixels;
  Rect bbox;
  Provenance provenance = Provenance::Detected;

  friend bool operator==(const MitoObject&, const MitoObject&) = default;
};

// The detected mitochondria of one image. Object pixel sets are pairwise
// disjoint and ids are never reused; next_id is the id the next new object gets.
struct MitoState {
  Extent extent;
  std::vector<MitoObject> objects;
  double sigma_m = 0.5;
  double sigma_e = 0.5;
  ObjectId next_id = 1;

  const MitoObject* find(ObjectId id) const;
  std::size_t index_of(ObjectId id) const;  // throws NotFoundError
  BinaryMask foreground() const;
  // 0 = background, otherwise the object id.
  std::vector<std::uint32_t> id_map() const;

  MitoObject make_object(PixelSet pixels, Provenance provenance);

  // Disjointness, non-empty 4-connected pixel sets, tight bboxes, unique ids.
  bool satisfies_invariants() const;

  friend bool operator==(const MitoState&, const MitoState&) = default;
};

// One object per 4-connected component of the mask, in component order.
MitoState detect_objects(const BinaryMask& foreground, double sigma_m = 0.5, double sigma_e = 0.5);

// Row-wise run-length encoding: [row, first column, run length] triples.
nlohmann::json encode_rle(const PixelSet& pixels);
PixelSet decode_rle(const Extent& extent, const nlohmann::json& runs);

nlohmann::json to_json(const MitoState& state);
MitoState mito_state_from_json(const nlohmann::json& j);

// 16-bit PNG where each pixel holds its object id (0 = background).
void export_id_map(const MitoState& state, const std::filesystem::path& path);
// Objects are the 4-connected components of each id; ids are re-assigned.
MitoState import_id_map(const std::filesystem::path& path);

}  // namespace mitoviz
