#include "mitoviz/cli/cli.hpp"

#include <spdlog/spdlog.h>

#include <CLI11.hpp>
#include <algorithm>
#include <cstdio>
#include <fstream>
#include <optional>

#include "mitoviz/core/error.hpp"
#include "mitoviz/imgproc/image_io.hpp"
#include "mitoviz/learn/bootstrap.hpp"
#include "mitoviz/mito/scoring.hpp"
#include "mitoviz/morpho/features.hpp"
#include "mitoviz/morpho/stats.hpp"
#include "mitoviz/morpho/subset.hpp"
#include "mitoviz/server/app.hpp"
#include "mitoviz/server/project.hpp"
#include "mitoviz/synth/phantom.hpp"

namespace mitoviz::cli {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

constexpr const char* kLabelsFile = "labels.png";
constexpr const char* kObjectsFile = "objects.json";
constexpr const char* kIdMapFile = "objects.png";
constexpr const char* kMetaFile = "meta.json";

json read_json_file(const fs::path& path) {
  const std::string text = read_file(path);
  try {
    return json::parse(text);
  } catch (const json::parse_error& e) {
    throw ValidationError(path.string(), std::string("invalid JSON: ") + e.what());
  }
}

void write_json_file(const fs::path& path, const json& j) { write_file_atomic(path, j.dump(2) + "\n"); }

std::string fmt(double v, const char* spec = "%.6f") {
  char buf[64];
  std::snprintf(buf, sizeof buf, spec, v);
  return buf;
}

struct Globals {
  std::uint64_t seed = 1;
  int threads = 1;
  std::string log_level = "warn";
  bool json_output = false;
};

// -- subcommands --

struct SegmentArgs {
  std::string venus, mito, labels, objects, out;
  double pixel_size_um = kDefaultPixelSizeUm;
  int bootstrap_steps = BootstrapOptions::default_train().max_steps;
};

json do_segment(const SegmentArgs& a, const Globals& g) {
  const ChannelRaster venus = load_channel(a.venus, a.pixel_size_um);
  const ChannelRaster mito = load_channel(a.mito, a.pixel_size_um);
  if (!(venus.extent() == mito.extent())) throw ValidationError("mito", "channel dimensions differ");
  BootstrapOptions o;
  o.seed = g.seed;
  o.train.max_steps = a.bootstrap_steps;
  o.train.validate();
  std::optional<StructureLabelRaster> labels;
  std::optional<BinaryMask> fg;
  if (!a.labels.empty()) labels = import_labels(a.labels);
  if (!a.objects.empty()) fg = import_id_map(a.objects).foreground();
  spdlog::info("segmenting {} x {}", venus.width(), venus.height());
  const BootstrapResult boot = bootstrap_initial(venus, mito, o, labels, fg);
  const MitoState objects = detect_objects(boot.mito_foreground);
  const fs::path out(a.out);
  write_dataset_dir(out, boot.labels, objects, a.pixel_size_um,
                    {{"venus", fs::absolute(a.venus).string()}, {"mito", fs::absolute(a.mito).string()}, {"seed", g.seed}});
  fs::create_directories(out / "models");
  save_checkpoint(boot.structure_model, out / "models" / "structure.mvcl");
  save_checkpoint(boot.mito_model, out / "models" / "mito.mvcl");
  return {{"out", out.string()}, {"objects", objects.objects.size()}};
}

struct PhantomArgs {
  std::string spec, out;
  std::optional<std::uint64_t> seed;
};

json do_phantom(const PhantomArgs& a) {
  PhantomSpec spec;
  if (!a.spec.empty()) spec = read_json_file(a.spec).get<PhantomSpec>();
  if (a.seed) spec.seed = *a.seed;
  spec.validate();
  const Phantom p = generate_phantom(spec);
  const fs::path out(a.out);
  fs::create_directories(out);
  save_channel(p.venus, out / "venus.tif");
  save_channel(p.mito, out / "mito.tif");
  const MitoState objects = p.truth.object_state();
  json meta = {{"venus", fs::absolute(out / "venus.tif").string()},
               {"mito", fs::absolute(out / "mito.tif").string()},
               {"seed", spec.seed}};
  write_dataset_dir(out, p.truth.labels, objects, p.venus.pixel_size_um(), meta);
  write_json_file(out / "spec.json", json(spec));
  return {{"out", out.string()}, {"objects", objects.objects.size()}};
}

struct ScoreArgs {
  std::string pred, truth;
  double min_iou = 0.5;
};

std::optional<double> mean_length(const DatasetDir& d) {
  const auto m = measure(d.objects, d.labels, d.pixel_size_um);
  if (m.empty()) return std::nullopt;
  const SnapshotPart part{d.name, m, &d.labels};
  return record_snapshot(std::span(&part, 1), "").mean_length_um;
}

json do_score(const ScoreArgs& a) {
  const DatasetDir pred = read_dataset_dir(a.pred);
  const DatasetDir truth = read_dataset_dir(a.truth);
  std::vector<PixelSet> truth_sets;
  for (const auto& o : truth.objects.objects) truth_sets.push_back(o.pixels);
  const DetectionScore det = detection_score(pred.objects, truth_sets, a.min_iou);
  const auto len_p = mean_length(pred);
  const auto len_t = mean_length(truth);
  json r = {{"pixel_accuracy", label_agreement(pred.labels, truth.labels) * 100.0},
            {"mito_pixel_accuracy", mask_agreement(pred.objects.foreground(), truth.objects.foreground()) * 100.0},
            {"objects_predicted", det.predicted},
            {"objects_truth", det.truth},
            {"objects_matched", det.matched},
            {"precision", det.precision},
            {"recall", det.recall},
            {"mean_length_pred_um", len_p ? json(*len_p) : json(nullptr)},
            {"mean_length_truth_um", len_t ? json(*len_t) : json(nullptr)},
            {"length_accuracy", nullptr}};
  if (len_p && len_t) r["length_accuracy"] = accuracy(*len_t, *len_p);
  return r;
}

struct AnalyzeArgs {
  std::string project, filter, snapshot;
};

json do_analyze(const AnalyzeArgs& a) {
  const fs::path root(a.project);
  const Predicate pred = parse_filter(a.filter);
  const fs::path store_path = root / "snapshots.json";
  std::vector<Snapshot> existing;
  if (fs::exists(store_path)) existing = read_json_file(store_path).get<std::vector<Snapshot>>();
  SnapshotStore store;
  for (auto& s : existing) store.add(std::move(s));

  json created = json::array();
  for (const auto& [group, dirs] : project_groups(root)) {
    std::vector<DatasetDir> data;
    for (const auto& d : dirs) data.push_back(read_dataset_dir(d));
    std::vector<SnapshotPart> parts;
    for (const auto& d : data) {
      const auto measured = measure(d.objects, d.labels, d.pixel_size_um);
      const auto ids = evaluate(pred, d.objects, measured);
      SnapshotPart part{d.name, {}, &d.labels};
      for (const auto& m : measured)
        if (std::binary_search(ids.begin(), ids.end(), m.id)) part.members.push_back(m);
      parts.push_back(std::move(part));
    }
    const Snapshot& s = store.add(record_snapshot(parts, a.snapshot, group));
    spdlog::info("snapshot {} of group {}: {} objects", s.id, group, s.count);
    created.push_back({{"id", s.id}, {"group", group}, {"count", s.count}, {"density", s.density}});
  }
  write_json_file(store_path, json(store.list()));
  write_file_atomic(root / "snapshots.csv", store.csv());
  return {{"snapshots", created}, {"csv", (root / "snapshots.csv").string()}};
}

// FILE or FILE#ID; without an id the last snapshot in the file is used.
Snapshot load_snapshot(const std::string& ref) {
  std::string path = ref;
  std::optional<std::uint64_t> id;
  if (const auto hash = ref.rfind('#'); hash != std::string::npos) {
    path = ref.substr(0, hash);
    try {
      std::size_t used = 0;
      id = std::stoull(ref.substr(hash + 1), &used);
      if (used != ref.size() - hash - 1) throw std::invalid_argument("trailing");
    } catch (const std::logic_error&) {
      throw ValidationError("snapshot", "bad snapshot id in '" + ref + "'");
    }
  }
  const json j = read_json_file(path);
  std::vector<Snapshot> all = j.is_array() ? j.get<std::vector<Snapshot>>() : std::vector<Snapshot>{j.get<Snapshot>()};
  if (all.empty()) throw ValidationError("snapshot", path + " holds no snapshots");
  if (!id) return all.back();
  for (auto& s : all)
    if (s.id == *id) return s;
  throw ValidationError("snapshot", "no snapshot " + std::to_string(*id) + " in " + path);
}

json do_compare(const std::string& a, const std::string& b) {
  const Snapshot sa = load_snapshot(a), sb = load_snapshot(b);
  json rows = json::array();
  for (const auto& c : compare(sa, sb)) {
    json row = {{"feature", to_string(c.feature)},
                {"mean_a", c.mean_a},
                {"mean_b", c.mean_b},
                {"percent_difference", std::isfinite(c.percent_difference) ? json(c.percent_difference) : json(nullptr)}};
    if (c.test) {
      row["t"] = c.test->t;
      row["df"] = c.test->df;
      row["p"] = c.test->p;
    } else {
      row["t"] = row["df"] = row["p"] = nullptr;
    }
    rows.push_back(row);
  }
  return {{"a", {{"id", sa.id}, {"count", sa.count}}}, {"b", {{"id", sb.id}, {"count", sb.count}}}, {"features", rows}};
}

std::string num(const json& v) { return v.is_null() ? "-" : fmt(v.get<double>()); }

void print_text(const std::string& command, const json& r, std::ostream& out) {
  if (command == "score") {
    out << "pixel accuracy      " << fmt(r["pixel_accuracy"], "%.2f") << " %\n"
        << "mito pixel accuracy " << fmt(r["mito_pixel_accuracy"], "%.2f") << " %\n"
        << "objects             " << r["objects_matched"] << " matched of " << r["objects_predicted"] << " predicted, "
        << r["objects_truth"] << " true\n"
        << "precision           " << fmt(r["precision"], "%.4f") << "\n"
        << "recall              " << fmt(r["recall"], "%.4f") << "\n"
        << "length accuracy     " << (r["length_accuracy"].is_null() ? "-" : fmt(r["length_accuracy"], "%.2f"))
        << " %\n";
  } else if (command == "compare") {
    out << "feature        mean_a       mean_b       diff_%       t            p\n";
    for (const auto& row : r["features"]) {
      std::string name = row["feature"];
      name.resize(14, ' ');
      out << name << num(row["mean_a"]) << "  " << num(row["mean_b"]) << "  " << num(row["percent_difference"]) << "  "
          << num(row["t"]) << "  " << num(row["p"]) << "\n";
    }
  } else if (command == "analyze") {
    for (const auto& s : r["snapshots"])
      out << "snapshot " << s["id"] << " group " << s["group"].get<std::string>() << ": " << s["count"]
          << " objects, density " << fmt(s["density"]) << "\n";
    out << "wrote " << r["csv"].get<std::string>() << "\n";
  } else {
    out << "wrote " << r["out"].get<std::string>() << " (" << r["objects"] << " objects)\n";
  }
}

}  // namespace

void write_dataset_dir(const fs::path& dir, const StructureLabelRaster& labels, const MitoState& objects,
                       double pixel_size_um, const json& extra_meta) {
  if (!(labels.extent() == objects.extent)) throw ValidationError("objects", "labels and objects differ in size");
  fs::create_directories(dir);
  export_labels(labels, dir / kLabelsFile);
  write_json_file(dir / kObjectsFile, to_json(objects));
  export_id_map(objects, dir / kIdMapFile);
  json meta = extra_meta;
  meta["pixel_size_um"] = pixel_size_um;
  write_json_file(dir / kMetaFile, meta);
}

DatasetDir read_dataset_dir(const fs::path& dir) {
  DatasetDir d;
  d.name = dir.filename().empty() ? dir.parent_path().filename().string() : dir.filename().string();
  d.labels = import_labels(dir / kLabelsFile);
  d.objects = mito_state_from_json(read_json_file(dir / kObjectsFile));
  if (fs::exists(dir / kMetaFile)) {
    const json meta = read_json_file(dir / kMetaFile);
    d.pixel_size_um = meta.value("pixel_size_um", kDefaultPixelSizeUm);
  }
  if (!(d.pixel_size_um > 0.0)) throw ValidationError("pixel_size_um", "must be positive");
  if (!(d.labels.extent() == d.objects.extent))
    throw ValidationError(dir.string(), "labels and objects differ in size");
  return d;
}

std::vector<std::pair<std::string, std::vector<fs::path>>> project_groups(const fs::path& project) {
  if (!fs::is_directory(project)) throw IoError("project directory " + project.string() + " not found");
  std::vector<std::pair<std::string, std::vector<fs::path>>> groups;
  if (fs::exists(project / "project.json")) {
    const json j = read_json_file(project / "project.json");
    if (!j.is_object() || !j.contains("groups") || !j["groups"].is_object())
      throw ValidationError("groups", "project.json needs a 'groups' object");
    for (const auto& [name, dirs] : j["groups"].items()) {
      std::vector<fs::path> paths;
      for (const auto& d : dirs) paths.push_back(project / d.get<std::string>());
      groups.emplace_back(name, std::move(paths));
    }
    return groups;
  }
  std::vector<fs::path> dirs;
  if (fs::exists(project / kObjectsFile)) {
    dirs.push_back(project);
  } else {
    for (const auto& e : fs::directory_iterator(project))
      if (e.is_directory() && fs::exists(e.path() / kObjectsFile)) dirs.push_back(e.path());
    std::sort(dirs.begin(), dirs.end());
  }
  if (dirs.empty()) throw ValidationError("project", "no dataset directories under " + project.string());
  groups.emplace_back("default", std::move(dirs));
  return groups;
}

int run(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"mitoviz: mitochondria segmentation proofreading and morphology analysis"};
  app.require_subcommand(1);
  app.fallthrough();
  Globals g;
  app.add_option("--seed", g.seed, "Random seed")->capture_default_str();
  app.add_option("--threads", g.threads, "Worker threads for serve")->check(CLI::PositiveNumber);
  app.add_option("--log-level", g.log_level, "trace, debug, info, warn, error or off")
      ->check(CLI::IsMember({"trace", "debug", "info", "warn", "error", "critical", "off"}))
      ->capture_default_str();
  app.add_flag("--json", g.json_output, "Print results as JSON");

  SegmentArgs seg;
  auto* segment = app.add_subcommand("segment", "Bootstrap or import labels and detect objects");
  segment->add_option("--venus", seg.venus, "Neurite channel image")->required();
  segment->add_option("--mito", seg.mito, "Mitochondria channel image")->required();
  segment->add_option("--labels", seg.labels, "Structure label PNG to import");
  segment->add_option("--objects", seg.objects, "Object id-map PNG to import");
  segment->add_option("--pixel-size", seg.pixel_size_um, "Micrometres per pixel")->check(CLI::PositiveNumber);
  segment->add_option("--bootstrap-steps", seg.bootstrap_steps, "Training steps per bootstrap model")
      ->check(CLI::PositiveNumber);
  segment->add_option("--out", seg.out, "Output directory")->required();

  AnalyzeArgs ana;
  auto* analyze = app.add_subcommand("analyze", "Select objects and record group snapshots");
  analyze->add_option("--project", ana.project, "Project directory")->required();
  analyze->add_option("--filter", ana.filter, "e.g. 'length>0.5&structure=dendrite'");
  analyze->add_option("--snapshot", ana.snapshot, "Snapshot comment")->required();

  std::string cmp_a, cmp_b;
  auto* comparison = app.add_subcommand("compare", "Percent differences and Welch tests between snapshots");
  comparison->add_option("--a", cmp_a, "FILE or FILE#ID")->required();
  comparison->add_option("--b", cmp_b, "FILE or FILE#ID")->required();

  PhantomArgs ph;
  auto* phantom = app.add_subcommand("phantom", "Generate a synthetic dataset with ground truth");
  phantom->add_option("--spec", ph.spec, "Phantom spec JSON");
  phantom->add_option("--out", ph.out, "Output directory")->required();

  ScoreArgs sc;
  auto* score = app.add_subcommand("score", "Score a segmentation against ground truth");
  score->add_option("--pred", sc.pred, "Predicted dataset directory")->required();
  score->add_option("--truth", sc.truth, "Ground-truth dataset directory")->required();
  score->add_option("--min-iou", sc.min_iou, "IoU needed for an object match")->check(CLI::Range(0.0, 1.0));

  std::string cfg_path;
  std::optional<int> port;
  auto* serve = app.add_subcommand("serve", "Start the HTTP server");
  serve->add_option("--config", cfg_path, "Server config JSON");
  serve->add_option("--port", port, "Overrides the configured port");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return kExitOk;
  } catch (const CLI::CallForAllHelp&) {
    out << app.help("", CLI::AppFormatMode::All);
    return kExitOk;
  } catch (const CLI::ParseError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  }

  spdlog::set_level(spdlog::level::from_str(g.log_level));
  std::string command;
  try {
    json result;
    if (*segment) {
      command = "segment";
      result = do_segment(seg, g);
    } else if (*analyze) {
      command = "analyze";
      result = do_analyze(ana);
    } else if (*comparison) {
      command = "compare";
      result = do_compare(cmp_a, cmp_b);
    } else if (*phantom) {
      command = "phantom";
      if (app.get_option("--seed")->count() > 0) ph.seed = g.seed;
      result = do_phantom(ph);
    } else if (*score) {
      command = "score";
      result = do_score(sc);
    } else {
      ServerConfig config = cfg_path.empty() ? ServerConfig{} : load_server_config(cfg_path);
      if (port) config.port = *port;
      if (app.get_option("--seed")->count() > 0) config.seed = g.seed;
      if (app.get_option("--threads")->count() > 0) config.http_threads = g.threads;
      config.validate();
      App server(config);
      server.run();
      return kExitOk;
    }
    if (g.json_output)
      out << result.dump(2) << "\n";
    else
      print_text(command, result, out);
    return kExitOk;
  } catch (const ValidationError& e) {
    err << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const NotFoundError& e) {
    err << "validation error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const IoError& e) {
    err << "I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const fs::filesystem_error& e) {
    err << "I/O error: " << e.what() << "\n";
    return kExitIo;
  } catch (const json::exception& e) {
    err << "validation error: " << e.what() << "\n";
    return kExitValidation;
  }
}

}  // namespace mitoviz::cli
