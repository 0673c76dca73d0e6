#include "mitoviz/server/project.hpp"

#include <fstream>
#include <sstream>
#include <utility>

#include "mitoviz/core/error.hpp"
#include "mitoviz/imgproc/image_io.hpp"

namespace mitoviz {
namespace {

std::uint64_t suffix(const std::string& id) {
  try {
    return std::stoull(id.substr(1));
  } catch (const std::exception&) {
    return 0;
  }
}

DatasetRecord dataset_from_json(const nlohmann::json& j) {
  return {j.at("id").get<std::string>(), j.at("name").get<std::string>(), j.at("venus").get<std::string>(),
          j.at("mito").get<std::string>(), j.at("pixel_size_um").get<double>()};
}

}  // namespace

void write_file_atomic(const std::filesystem::path& path, const std::string& data) {
  std::filesystem::create_directories(path.parent_path());
  const std::filesystem::path tmp = path.string() + ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + tmp.string());
    out << data;
    if (!out.flush()) throw IoError("cannot write " + tmp.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  if (ec) throw IoError("cannot replace " + path.string() + ": " + ec.message());
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot read " + path.string());
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

void to_json(nlohmann::json& j, const DatasetRecord& d) {
  j = {{"id", d.id},
       {"name", d.name},
       {"venus", d.venus.string()},
       {"mito", d.mito.string()},
       {"pixel_size_um", d.pixel_size_um}};
}

void to_json(nlohmann::json& j, const GroupRecord& g) {
  j = {{"id", g.id}, {"name", g.name}, {"datasets", g.datasets}};
}

void to_json(nlohmann::json& j, const Project& p) {
  j = {{"schema_version", p.schema_version}, {"id", p.id}, {"name", p.name}, {"groups", p.groups}};
}

Project project_from_json(const nlohmann::json& j) {
  try {
    Project p;
    p.schema_version = j.at("schema_version").get<int>();
    if (p.schema_version != kProjectSchemaVersion)
      throw ValidationError("schema_version", "unsupported schema version " + std::to_string(p.schema_version));
    p.id = j.at("id").get<std::string>();
    p.name = j.at("name").get<std::string>();
    for (const auto& g : j.at("groups")) {
      GroupRecord rec{g.at("id").get<std::string>(), g.at("name").get<std::string>(), {}};
      for (const auto& d : g.at("datasets")) rec.datasets.push_back(dataset_from_json(d));
      p.groups.push_back(std::move(rec));
    }
    return p;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("project", std::string("malformed project manifest: ") + e.what());
  }
}

ProjectStore::ProjectStore(std::filesystem::path root) : root_(std::move(root)) {
  const auto base = root_ / "projects";
  if (!std::filesystem::exists(base)) return;
  for (const auto& entry : std::filesystem::directory_iterator(base)) {
    const auto manifest = entry.path() / "project.json";
    if (!std::filesystem::exists(manifest)) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(read_file(manifest));
    } catch (const nlohmann::json::exception& e) {
      throw ValidationError("project", manifest.string() + ": " + e.what());
    }
    Project p = project_from_json(j);
    next_project_ = std::max(next_project_, suffix(p.id) + 1);
    for (const auto& g : p.groups) {
      next_group_ = std::max(next_group_, suffix(g.id) + 1);
      auto store = std::make_unique<SnapshotStore>();
      const auto snaps = dir(p.id) / "snapshots" / (g.id + ".json");
      if (std::filesystem::exists(snaps))
        for (const auto& s : nlohmann::json::parse(read_file(snaps))) store->add(s.get<Snapshot>());
      snapshots_[g.id] = std::move(store);
      for (const auto& d : g.datasets) {
        next_dataset_ = std::max(next_dataset_, suffix(d.id) + 1);
        for (const auto& f : {d.venus, d.mito})
          if (!std::filesystem::exists(f)) throw IoError("dataset " + d.id + " references missing file " + f.string());
      }
    }
    projects_[p.id] = std::move(p);
  }
}

std::filesystem::path ProjectStore::dir(const std::string& project_id) const { return root_ / "projects" / project_id; }

void ProjectStore::save(const Project& p) const {
  write_file_atomic(dir(p.id) / "project.json", nlohmann::json(p).dump(2) + "\n");
}

void ProjectStore::save_snapshots(const std::string& project_id, const std::string& group_id) const {
  nlohmann::json arr = nlohmann::json::array();
  for (const auto& s : snapshots_.at(group_id)->list()) arr.push_back(s);
  write_file_atomic(dir(project_id) / "snapshots" / (group_id + ".json"), arr.dump(2) + "\n");
}

const Project& ProjectStore::find_project(const std::string& id) const {
  auto it = projects_.find(id);
  if (it == projects_.end()) throw NotFoundError("unknown project '" + id + "'");
  return it->second;
}

Project& ProjectStore::find_project(const std::string& id) {
  return const_cast<Project&>(std::as_const(*this).find_project(id));
}

std::pair<const Project*, const GroupRecord*> ProjectStore::find_group(const std::string& group_id) const {
  for (const auto& [id, p] : projects_)
    for (const auto& g : p.groups)
      if (g.id == group_id) return {&p, &g};
  throw NotFoundError("unknown group '" + group_id + "'");
}

std::pair<Project*, GroupRecord*> ProjectStore::find_group(const std::string& group_id) {
  const auto [p, g] = std::as_const(*this).find_group(group_id);
  return {const_cast<Project*>(p), const_cast<GroupRecord*>(g)};
}

Project ProjectStore::create(const std::string& name) {
  if (name.empty()) throw ValidationError("name", "must not be empty");
  std::lock_guard lock(mu_);
  Project p;
  p.id = "p" + std::to_string(next_project_++);
  p.name = name;
  save(p);
  projects_[p.id] = p;
  return p;
}

Project ProjectStore::get(const std::string& id) const {
  std::lock_guard lock(mu_);
  return find_project(id);
}

std::vector<Project> ProjectStore::list() const {
  std::lock_guard lock(mu_);
  std::vector<Project> out;
  for (const auto& [id, p] : projects_) out.push_back(p);
  return out;
}

Project ProjectStore::update(const std::string& id, const nlohmann::json& patch) {
  if (!patch.is_object()) throw ValidationError("body", "must be an object");
  std::lock_guard lock(mu_);
  Project p = find_project(id);
  for (const auto& [key, value] : patch.items()) {
    if (key == "name" && value.is_string() && !value.get<std::string>().empty()) p.name = value.get<std::string>();
    else if (key == "name") throw ValidationError("name", "must be a non-empty string");
    else if (key == "id" && value == p.id) continue;
    else throw ValidationError(key, "field cannot be updated");
  }
  save(p);
  projects_[id] = p;
  return p;
}

GroupRecord ProjectStore::add_group(const std::string& project_id, const std::string& name) {
  if (name.empty()) throw ValidationError("name", "must not be empty");
  std::lock_guard lock(mu_);
  Project& p = find_project(project_id);
  GroupRecord g{"g" + std::to_string(next_group_++), name, {}};
  p.groups.push_back(g);
  snapshots_[g.id] = std::make_unique<SnapshotStore>();
  save(p);
  return g;
}

DatasetRecord ProjectStore::add_dataset(const std::string& group_id, const std::string& name,
                                        const std::filesystem::path& venus, const std::filesystem::path& mito,
                                        double pixel_size_um) {
  if (!(pixel_size_um > 0.0)) throw ValidationError("pixel_size_um", "must be > 0");
  std::vector<FieldError> bad;
  if (!std::filesystem::is_regular_file(venus)) bad.push_back({"venus", "file not found: " + venus.string()});
  if (!std::filesystem::is_regular_file(mito)) bad.push_back({"mito", "file not found: " + mito.string()});
  if (!bad.empty()) throw ValidationError("dataset images missing", bad);
  const GrayImage v = read_gray_image(venus), m = read_gray_image(mito);
  if (v.width != m.width || v.height != m.height) throw ValidationError("mito", "channel dimensions differ");
  std::lock_guard lock(mu_);
  auto [p, g] = find_group(group_id);
  DatasetRecord d{"d" + std::to_string(next_dataset_++), name.empty() ? venus.stem().string() : name,
                  std::filesystem::absolute(venus), std::filesystem::absolute(mito), pixel_size_um};
  g->datasets.push_back(d);
  save(*p);
  return d;
}

DatasetLocation ProjectStore::locate_dataset(const std::string& dataset_id) const {
  std::lock_guard lock(mu_);
  for (const auto& [id, p] : projects_)
    for (const auto& g : p.groups)
      for (const auto& d : g.datasets)
        if (d.id == dataset_id) return {p.id, g.id, g.name, d};
  throw NotFoundError("unknown dataset '" + dataset_id + "'");
}

GroupRecord ProjectStore::group(const std::string& group_id) const {
  std::lock_guard lock(mu_);
  return *find_group(group_id).second;
}

Snapshot ProjectStore::add_snapshot(const std::string& group_id, Snapshot s) {
  std::lock_guard lock(mu_);
  auto [p, g] = find_group(group_id);
  s.group = g->name;
  Snapshot stored = snapshots_.at(group_id)->add(std::move(s));
  save_snapshots(p->id, group_id);
  return stored;
}

std::vector<Snapshot> ProjectStore::snapshots(const std::string& group_id) const {
  std::lock_guard lock(mu_);
  find_group(group_id);
  return snapshots_.at(group_id)->list();
}

std::string ProjectStore::snapshots_csv(const std::string& group_id) const {
  std::lock_guard lock(mu_);
  find_group(group_id);
  return snapshots_.at(group_id)->csv();
}

}  // namespace mitoviz
