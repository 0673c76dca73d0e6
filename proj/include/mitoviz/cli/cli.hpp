#pragma once

#include <filesystem>
#include <ostream>
#include <string>
#include <vector>

#include "mitoviz/mito/objects.hpp"
#include "mitoviz/structure/labels.hpp"

namespace mitoviz::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitValidation = 2;
inline constexpr int kExitIo = 3;

// A segmentation result on disk, as written by `segment` and `phantom`:
// labels.png, objects.json, objects.png (id map) and meta.json.
struct DatasetDir {
  std::string name;
  StructureLabelRaster labels;
  MitoState objects;
  double pixel_size_um = kDefaultPixelSizeUm;
};

void write_dataset_dir(const std::filesystem::path& dir, const StructureLabelRaster& labels, const MitoState& objects,
                       double pixel_size_um, const nlohmann::json& extra_meta = nlohmann::json::object());
DatasetDir read_dataset_dir(const std::filesystem::path& dir);

// Dataset directories of a project, grouped. A project.json of the form
// {"groups": {"name": ["relative/dir", ...]}} names them explicitly; otherwise
// the directory itself (when it holds objects.json) or its subdirectories
// holding objects.json, in name order, form the group "default".
std::vector<std::pair<std::string, std::vector<std::filesystem::path>>> project_groups(
    const std::filesystem::path& project);

// Parses argv and runs one subcommand; returns the process exit code.
int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

}  // namespace mitoviz::cli
