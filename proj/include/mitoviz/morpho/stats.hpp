#pragma once

#include <cstdint>
#include <mutex>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "mitoviz/morpho/features.hpp"

namespace mitoviz {

// Member pixels over the pixels of every non-background structure class some
// member lies in. Empty subset gives 0; throws ValidationError when that
// structure area is zero.
double density(std::span<const MeasuredObject> members, const StructureLabelRaster& labels);

// Members of one image, used to build image and group snapshots.
struct SnapshotPart {
  std::string image;
  std::vector<MeasuredObject> members;
  const StructureLabelRaster* labels = nullptr;
};

struct Snapshot {
  std::uint64_t id = 0;
  std::string comment;
  std::string group;
  std::vector<std::string> images;
  std::size_t count = 0;
  double density = 0.0;
  std::optional<double> mean_area_um2;
  std::optional<double> mean_length_um;
  std::optional<double> mean_eccentricity;
  std::optional<double> mean_circularity;
  std::string created_at;  // ISO 8601 UTC; not part of the CSV
  std::vector<std::vector<ObjectId>> members;  // per image, in parts order
  std::vector<std::vector<FeatureVector>> features;  // per image, parallel to members

  friend bool operator==(const Snapshot&, const Snapshot&) = default;
};

// Statistics over the concatenated members of all parts. Density pools the
// structure areas of the parts.
Snapshot record_snapshot(std::span<const SnapshotPart> parts, std::string comment, std::string group = "");

void to_json(nlohmann::json& j, const Snapshot& s);
void from_json(const nlohmann::json& j, Snapshot& s);

inline constexpr const char* kSnapshotCsvHeader =
    "snapshot_id,comment,group,image,count,density,mean_area_um2,mean_length_um,mean_eccentricity,mean_circularity";

// Header plus one row per snapshot; absent means are empty fields, images are
// joined with ';'.
std::string snapshots_csv(std::span<const Snapshot> snapshots);

// Append-only; ids count from 1.
class SnapshotStore {
 public:
  // Assigns the id and, when empty, the creation time.
  const Snapshot& add(Snapshot s);
  std::vector<Snapshot> list() const;
  std::optional<Snapshot> find(std::uint64_t id) const;
  std::string csv() const;

 private:
  mutable std::mutex mu_;
  std::vector<Snapshot> items_;
};

// (fv1 - fv2) / fv1 * 100. Throws ValidationError when fv1 is zero.
double percent_difference(double fv1, double fv2);

struct WelchResult {
  double t = 0.0;
  double df = 0.0;
  double p = 1.0;  // two-sided
};

// Throws ValidationError when a side has fewer than two values.
WelchResult welch_t_test(std::span<const double> a, std::span<const double> b);

struct FeatureComparison {
  Feature feature = Feature::Length;
  double mean_a = 0.0;
  double mean_b = 0.0;
  double percent_difference = 0.0;
  std::optional<WelchResult> test;  // present when both sides have >= 2 values
};

std::vector<FeatureComparison> compare(std::span<const FeatureVector> a, std::span<const FeatureVector> b);
std::vector<FeatureComparison> compare(const Snapshot& a, const Snapshot& b);

// (1 - |len_c - len_m| / len_c) * 100. Throws ValidationError when len_c <= 0.
double accuracy(double len_c, double len_m);

}  // namespace mitoviz
