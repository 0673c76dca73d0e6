#pragma once

#include <filesystem>
#include <map>
#include <mutex>
#include <string>
#include <vector>

#include "json.hpp"
#include "mitoviz/morpho/stats.hpp"

namespace mitoviz {

inline constexpr int kProjectSchemaVersion = 1;

struct DatasetRecord {
  std::string id;
  std::string name;
  std::filesystem::path venus;
  std::filesystem::path mito;
  double pixel_size_um = 0.21;
  friend bool operator==(const DatasetRecord&, const DatasetRecord&) = default;
};

struct GroupRecord {
  std::string id;
  std::string name;
  std::vector<DatasetRecord> datasets;
  friend bool operator==(const GroupRecord&, const GroupRecord&) = default;
};

struct Project {
  int schema_version = kProjectSchemaVersion;
  std::string id;
  std::string name;
  std::vector<GroupRecord> groups;
  friend bool operator==(const Project&, const Project&) = default;
};

void to_json(nlohmann::json& j, const DatasetRecord& d);
void to_json(nlohmann::json& j, const GroupRecord& g);
void to_json(nlohmann::json& j, const Project& p);
// Throws ValidationError on an unknown schema version or missing fields.
Project project_from_json(const nlohmann::json& j);

struct DatasetLocation {
  std::string project_id;
  std::string group_id;
  std::string group_name;
  DatasetRecord dataset;
};

// Directory per project under root/projects/<id>: project.json plus one
// snapshots/<group>.json per group. Writes go through a temporary file and a rename.
class ProjectStore {
 public:
  // Loads every project found under root. Throws IoError when a referenced
  // image file is missing.
  explicit ProjectStore(std::filesystem::path root);

  Project create(const std::string& name);
  Project get(const std::string& id) const;  // NotFoundError
  std::vector<Project> list() const;
  // Only the name may change; other keys are rejected.
  Project update(const std::string& id, const nlohmann::json& patch);

  GroupRecord add_group(const std::string& project_id, const std::string& name);
  // Both images must exist and share dimensions.
  DatasetRecord add_dataset(const std::string& group_id, const std::string& name, const std::filesystem::path& venus,
                            const std::filesystem::path& mito, double pixel_size_um);
  DatasetLocation locate_dataset(const std::string& dataset_id) const;
  GroupRecord group(const std::string& group_id) const;

  Snapshot add_snapshot(const std::string& group_id, Snapshot s);
  std::vector<Snapshot> snapshots(const std::string& group_id) const;
  std::string snapshots_csv(const std::string& group_id) const;

 private:
  std::filesystem::path dir(const std::string& project_id) const;
  void save(const Project& p) const;
  void save_snapshots(const std::string& project_id, const std::string& group_id) const;
  const Project& find_project(const std::string& id) const;
  Project& find_project(const std::string& id);
  std::pair<const Project*, const GroupRecord*> find_group(const std::string& group_id) const;
  std::pair<Project*, GroupRecord*> find_group(const std::string& group_id);

  std::filesystem::path root_;
  mutable std::mutex mu_;
  std::map<std::string, Project> projects_;
  std::map<std::string, std::unique_ptr<SnapshotStore>> snapshots_;  // by group id
  std::uint64_t next_project_ = 1, next_group_ = 1, next_dataset_ = 1;
};

// Writes data to path through a sibling temporary file and a rename.
void write_file_atomic(const std::filesystem::path& path, const std::string& data);
std::string read_file(const std::filesystem::path& path);

}  // namespace mitoviz
