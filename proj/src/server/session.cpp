#include "mitoviz/server/session.hpp"

#include <fstream>

#include "mitoviz/core/error.hpp"
#include "mitoviz/imgproc/components.hpp"
#include "mitoviz/imgproc/image_io.hpp"
#include "mitoviz/learn/bootstrap.hpp"
#include "mitoviz/learn/refine.hpp"
#include "mitoviz/mito/scoring.hpp"
#include "mitoviz/morpho/features.hpp"

namespace mitoviz {
namespace {

constexpr const char* kJournal = "journal.jsonl";
constexpr const char* kManifest = "session.json";
constexpr const char* kInitialLabels = "initial_labels.png";
constexpr const char* kInitialObjects = "initial_objects.json";

nlohmann::json location_json(const DatasetLocation& d) {
  return {{"project_id", d.project_id}, {"group_id", d.group_id}, {"group_name", d.group_name}, {"dataset", d.dataset}};
}

DatasetLocation location_from_json(const nlohmann::json& j) {
  const auto& d = j.at("dataset");
  return {j.at("project_id").get<std::string>(), j.at("group_id").get<std::string>(),
          j.at("group_name").get<std::string>(),
          DatasetRecord{d.at("id").get<std::string>(), d.at("name").get<std::string>(),
                        d.at("venus").get<std::string>(), d.at("mito").get<std::string>(),
                        d.at("pixel_size_um").get<double>()}};
}

template <typename T>
T field(const nlohmann::json& j, const std::string& key) {
  if (!j.is_object() || !j.contains(key)) throw ValidationError(key, "missing field '" + key + "'");
  try {
    return j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ValidationError(key, "wrong type for '" + key + "'");
  }
}

StructureClass label_of(const nlohmann::json& v) {
  if (v.is_string()) return structure_class_from_string(v.get<std::string>());
  if (v.is_number_integer() && v.get<int>() >= 0 && v.get<int>() < kStructureClassCount)
    return static_cast<StructureClass>(v.get<int>());
  throw ValidationError("label", "label must be a class name or code 0..3");
}

std::vector<std::array<double, 2>> points_of(const nlohmann::json& edit) {
  const auto pts = field<std::vector<std::array<double, 2>>>(edit, "points");
  if (pts.empty()) throw ValidationError("points", "polyline needs at least one point");
  return pts;
}

// Foreground components become objects numbered after every id used so far.
MitoState state_from_mask(const BinaryMask& mask, const MitoState& previous) {
  MitoState next;
  next.extent = previous.extent;
  next.sigma_m = previous.sigma_m;
  next.sigma_e = previous.sigma_e;
  next.next_id = previous.next_id;
  for (auto& comp : label_components(mask)) next.objects.push_back(next.make_object(std::move(comp), Provenance::Detected));
  return next;
}

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  write_file_atomic(path, j.dump(2) + "\n");
}

}  // namespace

std::string to_string(TrainTarget t) { return t == TrainTarget::Structure ? "structure" : "mito"; }

TrainTarget train_target_from_string(const std::string& s) {
  if (s == "structure") return TrainTarget::Structure;
  if (s == "mito") return TrainTarget::Mito;
  throw ValidationError("target", "target must be 'structure' or 'mito'");
}

void Session::load_channels() {
  venus_ = load_channel(dataset_.dataset.venus, dataset_.dataset.pixel_size_um);
  mito_ = load_channel(dataset_.dataset.mito, dataset_.dataset.pixel_size_um);
  if (!(venus_.extent() == mito_.extent())) throw ValidationError("mito", "channel dimensions differ");
}

std::unique_ptr<Session> Session::create(const std::string& id, const std::filesystem::path& dir,
                                         const DatasetLocation& dataset, const nlohmann::json& request,
                                         const ServerConfig& config) {
  std::unique_ptr<Session> s(new Session());
  s->id_ = id;
  s->dir_ = dir;
  s->dataset_ = dataset;
  s->load_channels();
  if (request.contains("params")) from_json(request.at("params"), s->params_);

  BootstrapOptions o;
  o.seed = request.value("seed", config.seed);
  o.venus_enhancement = s->params_.venus;
  o.mito_enhancement = s->params_.mito;
  o.train.max_steps = request.value("bootstrap_max_steps", config.bootstrap_max_steps);
  o.train.validate();
  std::optional<StructureLabelRaster> labels;
  std::optional<BinaryMask> mito;
  if (request.contains("labels")) labels = import_labels(field<std::string>(request, "labels"));
  if (request.contains("objects")) mito = import_id_map(field<std::string>(request, "objects")).foreground();
  BootstrapResult boot = bootstrap_initial(s->venus_, s->mito_, o, labels, mito);

  MitoState initial = detect_objects(boot.mito_foreground, s->params_.sigma_m, s->params_.sigma_e);
  std::filesystem::create_directories(dir / "models");
  export_labels(boot.labels, dir / kInitialLabels);
  write_json(dir / kInitialObjects, to_json(initial));
  save_checkpoint(boot.structure_model, dir / "models" / "structure_0.mvcl");
  save_checkpoint(boot.mito_model, dir / "models" / "mito_0.mvcl");
  write_json(dir / kManifest, {{"id", id},
                               {"dataset", location_json(dataset)},
                               {"params", s->params_},
                               {"structure_model", "models/structure_0.mvcl"},
                               {"mito_model", "models/mito_0.mvcl"}});
  write_file_atomic(dir / kJournal, "");

  s->labels_ = LabelEditor(boot.labels);
  s->objects_ = MitoEditor(std::move(initial));
  s->structure_model_ = std::move(boot.structure_model);
  s->mito_model_ = std::move(boot.mito_model);
  s->refresh_enhanced();
  return s;
}

std::unique_ptr<Session> Session::restore(const std::filesystem::path& dir) {
  std::unique_ptr<Session> s(new Session());
  s->dir_ = dir;
  nlohmann::json manifest;
  try {
    manifest = nlohmann::json::parse(read_file(dir / kManifest));
    s->id_ = manifest.at("id").get<std::string>();
    s->dataset_ = location_from_json(manifest.at("dataset"));
    from_json(manifest.at("params"), s->params_);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("session", dir.string() + ": " + e.what());
  }
  s->load_channels();
  s->labels_ = LabelEditor(import_labels(dir / kInitialLabels));
  s->objects_ = MitoEditor(mito_state_from_json(nlohmann::json::parse(read_file(dir / kInitialObjects))));
  s->structure_model_ = load_checkpoint(dir / manifest.at("structure_model").get<std::string>());
  s->mito_model_ = load_checkpoint(dir / manifest.at("mito_model").get<std::string>());
  s->refresh_enhanced();
  std::ifstream in(dir / kJournal);
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const auto event = nlohmann::json::parse(line, nullptr, false);
    // A torn final line from a crash mid-write is dropped.
    if (event.is_discarded()) break;
    s->apply_event(event, true);
    s->seq_ = event.at("seq").get<std::size_t>();
  }
  return s;
}

void Session::append(nlohmann::json event) {
  event["seq"] = ++seq_;
  std::ofstream out(dir_ / kJournal, std::ios::app);
  out << event.dump() << "\n";
  if (!out.flush()) throw IoError("cannot append to the session journal");
}

void Session::refresh_enhanced() {
  venus_enhanced_ = enhance(venus_, params_.venus);
  mito_enhanced_ = enhance(mito_, params_.mito);
  objects_.set_thresholds(params_.sigma_m, params_.sigma_e);
}

void Session::apply_event(const nlohmann::json& event, bool replaying) {
  const std::string type = event.at("type").get<std::string>();
  if (type == "params") {
    ViewParams p;
    from_json(event.at("params"), p);
    do_params(p);
  } else if (type == "edits") {
    do_edits(event.at("edits"));
  } else if (type == "undo") {
    do_undo();
  } else if (type == "subset") {
    do_subset(event.at("subset"));
  } else if (type == "train") {
    do_train_result(train_target_from_string(event.at("target").get<std::string>()), event);
  } else if (!replaying) {
    throw ValidationError("type", "unknown journal event '" + type + "'");
  }
}

nlohmann::json Session::summary() const {
  std::lock_guard lock(mu_);
  return {{"id", id_},
          {"dataset_id", dataset_.dataset.id},
          {"group_id", dataset_.group_id},
          {"project_id", dataset_.project_id},
          {"width", venus_.width()},
          {"height", venus_.height()},
          {"params", params_},
          {"journal_length", seq_},
          {"object_count", objects_.state().objects.size()},
          {"training_job", job_ ? nlohmann::json(*job_) : nlohmann::json(nullptr)}};
}

ViewParams Session::params() const {
  std::lock_guard lock(mu_);
  return params_;
}

void Session::do_params(const ViewParams& p) {
  params_ = p;
  refresh_enhanced();
}

ViewParams Session::set_params(const nlohmann::json& patch) {
  std::lock_guard lock(mu_);
  ViewParams next = params_;
  from_json(patch, next);
  do_params(next);
  append({{"type", "params"}, {"params", params_}});
  return params_;
}

nlohmann::json Session::do_edits(const nlohmann::json& edits) {
  if (!edits.is_array() || edits.empty()) throw ValidationError("edits", "edits must be a non-empty array");
  LabelEditor labels = labels_;
  MitoEditor objects = objects_;
  std::vector<char> stack = undo_stack_;
  std::size_t brushed = 0;
  for (std::size_t k = 0; k < edits.size(); ++k) {
    const auto& e = edits[k];
    const std::string op = field<std::string>(e, "op");
    try {
      if (op == "brush") {
        const int x = field<int>(e, "x"), y = field<int>(e, "y");
        if (!venus_.extent().in_bounds(x, y)) throw ValidationError("x", "brush centre outside the image");
        BrushStroke stroke;
        stroke.center = venus_.extent().index(x, y);
        stroke.radius = field<double>(e, "radius");
        stroke.label = label_of(e.contains("label") ? e.at("label") : nlohmann::json());
        stroke.sigma_s = params_.sigma_s;
        brushed += labels.brush(venus_enhanced_, stroke).size();
        stack.push_back('s');
      } else if (op == "exclude") {
        const auto ids = field<std::vector<ObjectId>>(e, "ids");
        objects.exclude(ids);
        stack.push_back('m');
      } else if (op == "split") {
        const auto pts = points_of(e);
        objects.split(field<ObjectId>(e, "id"), rasterize_polyline(venus_.extent(), pts), mito_enhanced_);
        stack.push_back('m');
      } else if (op == "merge" || op == "include") {
        const auto pts = points_of(e);
        objects.merge_or_include(rasterize_polyline(venus_.extent(), pts), mito_enhanced_);
        stack.push_back('m');
      } else {
        throw ValidationError("op", "unknown edit '" + op + "'");
      }
    } catch (const ValidationError& err) {
      std::vector<FieldError> fields;
      for (const auto& f : err.fields()) fields.push_back({"edits[" + std::to_string(k) + "]." + f.field, f.message});
      throw ValidationError(err.what(), fields);
    } catch (const NotFoundError& err) {
      throw ValidationError("edits[" + std::to_string(k) + "]", err.what());
    }
  }
  std::size_t changed = 0;
  Rect box{};
  auto grow = [&](PixelIndex i) {
    const Point p = venus_.extent().point(i);
    const Rect r{p.x, p.y, 1, 1};
    box = box.empty() ? r : box.united(r);
  };
  for (std::size_t i = 0; i < labels.labels().size(); ++i) {
    if (labels.labels()[i] != labels_.labels()[i]) {
      ++changed;
      grow(static_cast<PixelIndex>(i));
    }
  }
  const ForegroundDiff diff = foreground_diff(objects_.state(), objects.state());
  for (PixelIndex i : diff.added) grow(i);
  for (PixelIndex i : diff.removed) grow(i);
  labels_ = std::move(labels);
  objects_ = std::move(objects);
  undo_stack_ = std::move(stack);
  return {{"structure_pixels_changed", changed},
          {"structure_pixels_brushed", brushed},
          {"mito_pixels_added", diff.added.size()},
          {"mito_pixels_removed", diff.removed.size()},
          {"object_count", objects_.state().objects.size()},
          {"bbox", box.empty() ? nlohmann::json(nullptr) : nlohmann::json{box.x, box.y, box.w, box.h}}};
}

nlohmann::json Session::apply_edits(const nlohmann::json& request) {
  std::lock_guard lock(mu_);
  const auto& edits = request.is_object() && request.contains("edits") ? request.at("edits") : request;
  nlohmann::json out = do_edits(edits);
  append({{"type", "edits"}, {"edits", edits}});
  out["journal_length"] = seq_;
  return out;
}

void Session::do_undo() {
  if (undo_stack_.empty()) throw ValidationError("undo", "nothing to undo");
  const char which = undo_stack_.back();
  if (which == 's') labels_.undo();
  else objects_.undo();
  undo_stack_.pop_back();
}

nlohmann::json Session::undo() {
  std::lock_guard lock(mu_);
  const char which = undo_stack_.empty() ? ' ' : undo_stack_.back();
  do_undo();
  append({{"type", "undo"}});
  return {{"undone", which == 's' ? "structure" : "mito"}, {"journal_length", seq_}};
}

std::vector<std::uint8_t> Session::render(std::optional<Rect> viewport) const {
  std::lock_guard lock(mu_);
  const Extent e = venus_.extent();
  if (viewport && (viewport->empty() || viewport->x < 0 || viewport->y < 0 || viewport->right() > e.width ||
                   viewport->bottom() > e.height))
    throw ValidationError("viewport", "viewport must be a non-empty rectangle inside the image");
  const auto ids = objects_.state().id_map();
  BlendLayers layers{e, &venus_enhanced_, &mito_enhanced_, labels_.labels().codes(), ids};
  return encode_png_rgb(blend(layers, params_.blend, viewport));
}

StructureLabelRaster Session::labels() const {
  std::lock_guard lock(mu_);
  return labels_.labels();
}

MitoState Session::mito_state() const {
  std::lock_guard lock(mu_);
  return objects_.state();
}

std::vector<CandidateBox> Session::candidates(CandidateKind kind) const {
  std::lock_guard lock(mu_);
  if (kind == CandidateKind::MixedStructure) return find_mixed_label_candidates(labels_.labels());
  auto all = error_candidates(objects_.state(), mito_enhanced_, params_.sigma_m, params_.sigma_e);
  std::erase_if(all, [&](const CandidateBox& b) { return b.kind != kind; });
  return all;
}

std::vector<MeasuredObject> Session::measured() const {
  return measure(objects_.state(), labels_.labels(), dataset_.dataset.pixel_size_um);
}

Predicate Session::selection(const nlohmann::json& request) const {
  if (request.contains("subset_id")) return subset(field<std::uint64_t>(request, "subset_id")).definition;
  if (request.contains("definition")) return predicate_from_json(request.at("definition"), venus_.extent());
  if (request.contains("filter")) return parse_filter(field<std::string>(request, "filter"));
  return Predicate::all();
}

Subset Session::do_subset(const nlohmann::json& request) {
  Subset s;
  s.id = subsets_.size() + 1;
  s.name = request.value("name", "subset " + std::to_string(s.id));
  s.definition = request.contains("definition") ? predicate_from_json(request.at("definition"), venus_.extent())
                                                : parse_filter(request.value("filter", std::string()));
  s.members = evaluate(s.definition, objects_.state(), measured());
  subsets_.push_back(s);
  return s;
}

Subset Session::add_subset(const nlohmann::json& request) {
  std::lock_guard lock(mu_);
  if (!request.is_object()) throw ValidationError("body", "must be an object");
  Subset s = do_subset(request);
  append({{"type", "subset"}, {"subset", {{"name", s.name}, {"definition", to_json(s.definition)}}}});
  return s;
}

std::vector<Subset> Session::subsets() const {
  std::lock_guard lock(mu_);
  return subsets_;
}

const Subset& Session::subset(std::uint64_t id) const {
  if (id == 0 || id > subsets_.size()) throw NotFoundError("unknown subset " + std::to_string(id));
  return subsets_[id - 1];
}

MeasuredPart Session::measure_selection(const nlohmann::json& request) const {
  std::lock_guard lock(mu_);
  if (!request.is_object()) throw ValidationError("body", "must be an object");
  const auto all = measured();
  const auto ids = evaluate(selection(request), objects_.state(), all);
  MeasuredPart part{dataset_.dataset.name, {}, labels_.labels()};
  for (const auto& m : all)
    if (std::binary_search(ids.begin(), ids.end(), m.id)) part.members.push_back(m);
  return part;
}

TrainingTask Session::begin_training(const nlohmann::json& request, const TrainConfig& defaults,
                                     const std::string& job_id) {
  std::lock_guard lock(mu_);
  if (job_) throw ConflictError("training job " + *job_ + " is already running for this session");
  TrainingTask t;
  t.target = train_target_from_string(request.value("target", std::string("structure")));
  t.config = defaults;
  if (request.contains("config")) from_json(request.at("config"), t.config);
  if (t.target == TrainTarget::Structure) {
    t.signal = structure_signal(labels_);
    if (!venus_features_) venus_features_ = std::make_shared<FeatureStack>(extract_features(venus_));
    t.features = venus_features_;
    t.model = structure_model_;
  } else {
    t.signal = mito_signal(objects_);
    if (!mito_features_) mito_features_ = std::make_shared<FeatureStack>(extract_features(mito_));
    t.features = mito_features_;
    t.model = mito_model_;
  }
  if (t.signal.masked_count() == 0) throw ValidationError("journal", "no user input");
  job_ = job_id;
  return t;
}

void Session::do_train_result(TrainTarget target, const nlohmann::json& event) {
  const std::string model_file = event.at("model").get<std::string>();
  if (target == TrainTarget::Structure) {
    structure_model_ = load_checkpoint(dir_ / model_file);
    labels_.replace(import_labels(dir_ / event.at("labels").get<std::string>()));
    undo_stack_.push_back('s');
  } else {
    mito_model_ = load_checkpoint(dir_ / model_file);
    objects_.replace(mito_state_from_json(nlohmann::json::parse(read_file(dir_ / event.at("objects").get<std::string>()))));
    undo_stack_.push_back('m');
  }
}

void Session::finish_training(const TrainingTask& task, const ClassifierModel& tuned) {
  const Prediction p = predict(tuned, *task.features);
  std::lock_guard lock(mu_);
  job_.reset();
  const std::size_t n = seq_ + 1;
  const std::string stem = to_string(task.target) + "_" + std::to_string(n);
  nlohmann::json event = {{"type", "train"}, {"target", to_string(task.target)}, {"model", "models/" + stem + ".mvcl"}};
  save_checkpoint(tuned, dir_ / "models" / (stem + ".mvcl"));
  // Corrections made while training ran are honoured as well.
  if (task.target == TrainTarget::Structure) {
    const auto codes = refined_codes(p, structure_signal(labels_));
    export_labels(StructureLabelRaster(p.extent.width, p.extent.height, codes), dir_ / (stem + "_labels.png"));
    event["labels"] = stem + "_labels.png";
  } else {
    BinaryMask mask(p.extent.width, p.extent.height);
    mask.bits = refined_codes(p, mito_signal(objects_));
    write_json(dir_ / (stem + "_objects.json"), to_json(state_from_mask(mask, objects_.state())));
    event["objects"] = stem + "_objects.json";
  }
  // The result is read back from the files just written so replay sees the same bytes.
  do_train_result(task.target, event);
  append(event);
}

void Session::abort_training() {
  std::lock_guard lock(mu_);
  job_.reset();
}

std::optional<std::string> Session::running_job() const {
  std::lock_guard lock(mu_);
  return job_;
}

std::size_t Session::journal_length() const {
  std::lock_guard lock(mu_);
  return seq_;
}

}  // namespace mitoviz
