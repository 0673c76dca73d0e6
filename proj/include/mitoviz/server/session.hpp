#pragma once

#include <filesystem>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "mitoviz/learn/classifier.hpp"
#include "mitoviz/learn/features.hpp"
#include "mitoviz/learn/training.hpp"
#include "mitoviz/mito/edits.hpp"
#include "mitoviz/morpho/stats.hpp"
#include "mitoviz/morpho/subset.hpp"
#include "mitoviz/server/config.hpp"
#include "mitoviz/server/params.hpp"
#include "mitoviz/server/project.hpp"
#include "mitoviz/structure/brush.hpp"
#include "mitoviz/structure/candidates.hpp"

namespace mitoviz {

enum class TrainTarget { Structure, Mito };
std::string to_string(TrainTarget t);
TrainTarget train_target_from_string(const std::string& s);

// Captured under the session lock; fine-tuning then runs without it.
struct TrainingTask {
  TrainTarget target = TrainTarget::Structure;
  ClassifierModel model;
  std::shared_ptr<const FeatureStack> features;
  TrainSignal signal;
  TrainConfig config;
};

// Members of one image measured for a snapshot, with the labels they were measured on.
struct MeasuredPart {
  std::string image;
  std::vector<MeasuredObject> members;
  StructureLabelRaster labels;
};

// One open dataset. Every state change is appended to journal.jsonl in the
// session directory before the call returns, and restore() replays it from the
// stored initial state. Public methods are serialized by the session lock.
class Session {
 public:
  // Builds the initial state (bootstrap, or import when the request names label
  // files), writes it under dir and starts an empty journal.
  static std::unique_ptr<Session> create(const std::string& id, const std::filesystem::path& dir,
                                         const DatasetLocation& dataset, const nlohmann::json& request,
                                         const ServerConfig& config);
  static std::unique_ptr<Session> restore(const std::filesystem::path& dir);

  const std::string& id() const { return id_; }
  const DatasetLocation& dataset() const { return dataset_; }

  nlohmann::json summary() const;
  ViewParams params() const;
  ViewParams set_params(const nlohmann::json& patch);

  // Applies a batch atomically: a failing edit leaves the state untouched.
  nlohmann::json apply_edits(const nlohmann::json& request);
  // Reverts the most recent edit or training result.
  nlohmann::json undo();

  std::vector<std::uint8_t> render(std::optional<Rect> viewport) const;
  StructureLabelRaster labels() const;
  MitoState mito_state() const;
  std::vector<CandidateBox> candidates(CandidateKind kind) const;

  Subset add_subset(const nlohmann::json& request);
  std::vector<Subset> subsets() const;
  const Subset& subset(std::uint64_t id) const;
  // Measures the objects selected by a subset id, a predicate or a filter string.
  MeasuredPart measure_selection(const nlohmann::json& request) const;

  // ConflictError when a job is already running; ValidationError("no user
  // input") when nothing has been corrected.
  TrainingTask begin_training(const nlohmann::json& request, const TrainConfig& defaults, const std::string& job_id);
  // Predicts with the tuned model and replaces the labels; pixels the user
  // corrected keep their corrected value.
  void finish_training(const TrainingTask& task, const ClassifierModel& tuned);
  void abort_training();
  std::optional<std::string> running_job() const;

  std::size_t journal_length() const;

 private:
  Session() = default;
  void load_channels();
  void append(nlohmann::json event);
  void apply_event(const nlohmann::json& event, bool replaying);
  void refresh_enhanced();
  nlohmann::json do_edits(const nlohmann::json& edits);
  void do_undo();
  void do_params(const ViewParams& p);
  Subset do_subset(const nlohmann::json& request);
  void do_train_result(TrainTarget target, const nlohmann::json& event);
  std::vector<MeasuredObject> measured() const;
  Predicate selection(const nlohmann::json& request) const;

  mutable std::mutex mu_;
  std::string id_;
  std::filesystem::path dir_;
  DatasetLocation dataset_;
  ChannelRaster venus_, mito_;
  ChannelRaster venus_enhanced_, mito_enhanced_;
  mutable std::shared_ptr<const FeatureStack> venus_features_, mito_features_;
  ViewParams params_;
  LabelEditor labels_;
  MitoEditor objects_;
  ClassifierModel structure_model_, mito_model_;
  std::vector<char> undo_stack_;  // 's' structure, 'm' mito, per undoable step
  std::vector<Subset> subsets_;
  std::size_t seq_ = 0;
  std::optional<std::string> job_;
};

}  // namespace mitoviz
