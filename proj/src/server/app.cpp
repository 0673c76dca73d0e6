#include "mitoviz/server/app.hpp"

#include <httplib.h>
#include <spdlog/spdlog.h>

#include "mitoviz/core/error.hpp"
#include "mitoviz/learn/training.hpp"

namespace mitoviz {
namespace {

using httplib::Request;
using httplib::Response;
using Handler = std::function<void(const Request&, Response&)>;

void send_json(Response& res, const nlohmann::json& j, int status = 200) {
  res.status = status;
  res.set_content(j.dump(), "application/json");
}

void send_error(Response& res, int status, const std::string& message, const std::vector<FieldError>& fields = {}) {
  nlohmann::json f = nlohmann::json::array();
  for (const auto& e : fields) f.push_back({{"field", e.field}, {"message", e.message}});
  send_json(res, {{"error", message}, {"fields", f}}, status);
}

nlohmann::json body_of(const Request& req) {
  if (req.body.empty()) return nlohmann::json::object();
  try {
    return nlohmann::json::parse(req.body);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("body", std::string("malformed JSON: ") + e.what());
  }
}

std::optional<Rect> parse_viewport(const Request& req) {
  if (!req.has_param("viewport")) return std::nullopt;
  const std::string v = req.get_param_value("viewport");
  Rect r;
  char tail = 0;
  if (std::sscanf(v.c_str(), "%d,%d,%d,%d%c", &r.x, &r.y, &r.w, &r.h, &tail) != 4)
    throw ValidationError("viewport", "viewport must be x,y,w,h");
  return r;
}

nlohmann::json subset_json(const Subset& s) {
  return {{"id", s.id}, {"name", s.name}, {"members", s.members}, {"definition", to_json(s.definition)}};
}

Snapshot record(const std::vector<MeasuredPart>& measured, const std::string& comment, const std::string& group) {
  std::vector<SnapshotPart> parts;
  for (const auto& m : measured) parts.push_back({m.image, m.members, &m.labels});
  return record_snapshot(parts, comment, group);
}

}  // namespace

App::App(ServerConfig config)
    : config_((config.validate(), std::move(config))),
      projects_(config_.data_root),
      jobs_(config_.training_threads),
      http_(std::make_unique<httplib::Server>()) {
  const auto dir = config_.data_root / "sessions";
  if (std::filesystem::exists(dir)) {
    for (const auto& entry : std::filesystem::directory_iterator(dir)) {
      if (!std::filesystem::exists(entry.path() / "session.json")) continue;
      auto s = Session::restore(entry.path());
      const std::string id = s->id();
      try {
        next_session_ = std::max<std::uint64_t>(next_session_, std::stoull(id.substr(1)) + 1);
      } catch (const std::exception&) {
      }
      spdlog::info("restored session {} ({} journal entries)", id, s->journal_length());
      sessions_[id] = std::move(s);
    }
  }
  http_->new_task_queue = [n = config_.http_threads] { return new httplib::ThreadPool(n); };
  routes();
}

App::~App() {
  stop();
  jobs_.wait_idle();
}

int App::start() {
  int port = config_.port;
  if (port == 0) port = http_->bind_to_any_port(config_.host);
  else if (!http_->bind_to_port(config_.host, port)) port = -1;
  if (port < 0) throw IoError("cannot bind " + config_.host + ":" + std::to_string(config_.port));
  thread_ = std::thread([this] { http_->listen_after_bind(); });
  http_->wait_until_ready();
  spdlog::info("listening on {}:{}", config_.host, port);
  return port;
}

void App::run() {
  spdlog::info("listening on {}:{}", config_.host, config_.port);
  if (!http_->listen(config_.host, config_.port))
    throw IoError("cannot bind " + config_.host + ":" + std::to_string(config_.port));
}

void App::stop() {
  if (http_->is_running()) http_->stop();
  if (thread_.joinable()) thread_.join();
}

Session& App::session(const std::string& id) {
  std::lock_guard lock(sessions_mu_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw NotFoundError("unknown session '" + id + "'");
  return *it->second;
}

Session& App::open_session(const nlohmann::json& request) {
  if (!request.is_object() || !request.contains("dataset_id") || !request.at("dataset_id").is_string())
    throw ValidationError("dataset_id", "dataset_id is required");
  const DatasetLocation loc = projects_.locate_dataset(request.at("dataset_id").get<std::string>());
  std::string id;
  {
    std::lock_guard lock(sessions_mu_);
    id = "s" + std::to_string(next_session_++);
  }
  auto s = Session::create(id, config_.data_root / "sessions" / id, loc, request, config_);
  std::lock_guard lock(sessions_mu_);
  return *(sessions_[id] = std::move(s));
}

std::string App::start_training(Session& s, const nlohmann::json& request) {
  const std::string job = jobs_.next_id();
  TrainingTask task = s.begin_training(request, config_.training, job);
  jobs_.submit(job, s.id(), [&s, task = std::move(task)](JobContext& ctx) {
    try {
      ctx.phase("training");
      const FinetuneResult r =
          finetune(task.model, *task.features, task.signal, task.config, [&](double f) { ctx.progress(f); });
      ctx.phase("applying");
      s.finish_training(task, r.model);
      return nlohmann::json{{"target", to_string(task.target)},
                            {"steps", r.steps},
                            {"seconds", r.seconds},
                            {"stop_reason", r.stop_reason},
                            {"initial_loss", r.initial.total},
                            {"final_loss", r.best.total}};
    } catch (...) {
      s.abort_training();
      throw;
    }
  });
  return job;
}

void App::routes() {
  auto& svr = *http_;
  const std::string p = kApiPrefix;

  // Error mapping plus replay of responses for repeated request tokens.
  auto wrap = [this](Handler h, bool mutating) -> Handler {
    return [this, h, mutating](const Request& req, Response& res) {
      const std::string token = mutating ? req.get_header_value(kIdempotencyHeader) : std::string();
      std::unique_lock<std::mutex> idem;
      std::string key;
      if (!token.empty()) {
        key = req.method + " " + req.path + " " + token;
        idem = std::unique_lock(idem_mu_);
        if (auto it = idempotent_.find(key); it != idempotent_.end()) {
          res.status = it->second.status;
          res.set_content(it->second.body, it->second.content_type);
          res.set_header("Idempotent-Replay", "true");
          return;
        }
      }
      try {
        h(req, res);
      } catch (const ValidationError& e) {
        send_error(res, 422, e.what(), e.fields());
      } catch (const NotFoundError& e) {
        send_error(res, 404, e.what());
      } catch (const ConflictError& e) {
        send_error(res, 409, e.what());
      } catch (const IoError& e) {
        send_error(res, 422, e.what());
      } catch (const nlohmann::json::exception& e) {
        send_error(res, 422, e.what());
      } catch (const std::exception& e) {
        spdlog::error("{} {}: {}", req.method, req.path, e.what());
        send_error(res, 500, e.what());
      }
      if (!token.empty() && res.status < 500)
        idempotent_[key] = {res.status, res.body, res.get_header_value("Content-Type")};
    };
  };
  auto get = [&](const std::string& path, Handler h) { svr.Get(p + path, wrap(std::move(h), false)); };
  auto post = [&](const std::string& path, Handler h) { svr.Post(p + path, wrap(std::move(h), true)); };
  auto put = [&](const std::string& path, Handler h) { svr.Put(p + path, wrap(std::move(h), true)); };

  get("/health", [](const Request&, Response& res) { send_json(res, {{"status", "ok"}}); });
  get("/config", [this](const Request&, Response& res) { send_json(res, config_); });

  post("/projects", [this](const Request& req, Response& res) {
    const auto b = body_of(req);
    send_json(res, projects_.create(b.value("name", std::string())), 201);
  });
  get("/projects", [this](const Request&, Response& res) { send_json(res, projects_.list()); });
  get(R"(/projects/([^/]+))", [this](const Request& req, Response& res) { send_json(res, projects_.get(req.matches[1])); });
  put(R"(/projects/([^/]+))", [this](const Request& req, Response& res) {
    send_json(res, projects_.update(req.matches[1], body_of(req)));
  });
  post(R"(/projects/([^/]+)/groups)", [this](const Request& req, Response& res) {
    send_json(res, projects_.add_group(req.matches[1], body_of(req).value("name", std::string())), 201);
  });
  get(R"(/groups/([^/]+))", [this](const Request& req, Response& res) { send_json(res, projects_.group(req.matches[1])); });
  post(R"(/groups/([^/]+)/datasets)", [this](const Request& req, Response& res) {
    const auto b = body_of(req);
    if (!b.contains("venus") || !b.contains("mito"))
      throw ValidationError("dataset needs venus and mito", {{"venus", "required"}, {"mito", "required"}});
    send_json(res,
              projects_.add_dataset(req.matches[1], b.value("name", std::string()), b.at("venus").get<std::string>(),
                                    b.at("mito").get<std::string>(), b.value("pixel_size_um", kDefaultPixelSizeUm)),
              201);
  });
  get(R"(/groups/([^/]+)/snapshots)", [this](const Request& req, Response& res) {
    send_json(res, projects_.snapshots(req.matches[1]));
  });
  get(R"(/groups/([^/]+)/snapshots\.csv)", [this](const Request& req, Response& res) {
    res.set_content(projects_.snapshots_csv(req.matches[1]), "text/csv");
  });
  post(R"(/groups/([^/]+)/snapshots)", [this](const Request& req, Response& res) {
    const std::string group = req.matches[1];
    const auto b = body_of(req);
    const auto ids = b.value("sessions", std::vector<std::string>{});
    if (ids.empty()) throw ValidationError("sessions", "list the sessions to pool");
    std::vector<MeasuredPart> parts;
    for (const auto& id : ids) {
      Session& s = session(id);
      if (s.dataset().group_id != group) throw ValidationError("sessions", "session " + id + " is not in group " + group);
      parts.push_back(s.measure_selection(b));
    }
    send_json(res, projects_.add_snapshot(group, record(parts, b.value("comment", std::string()), "")), 201);
  });

  post("/sessions", [this](const Request& req, Response& res) { send_json(res, open_session(body_of(req)).summary(), 201); });
  get(R"(/sessions/([^/]+))", [this](const Request& req, Response& res) { send_json(res, session(req.matches[1]).summary()); });
  get(R"(/sessions/([^/]+)/render)", [this](const Request& req, Response& res) {
    const auto png = session(req.matches[1]).render(parse_viewport(req));
    res.set_content(std::string(png.begin(), png.end()), "image/png");
  });
  get(R"(/sessions/([^/]+)/params)", [this](const Request& req, Response& res) { send_json(res, session(req.matches[1]).params()); });
  put(R"(/sessions/([^/]+)/params)", [this](const Request& req, Response& res) {
    send_json(res, session(req.matches[1]).set_params(body_of(req)));
  });
  get(R"(/sessions/([^/]+)/labels)", [this](const Request& req, Response& res) {
    const auto png = encode_labels_png(session(req.matches[1]).labels());
    res.set_content(std::string(png.begin(), png.end()), "image/png");
  });
  get(R"(/sessions/([^/]+)/objects)", [this](const Request& req, Response& res) {
    send_json(res, to_json(session(req.matches[1]).mito_state()));
  });
  get(R"(/sessions/([^/]+)/candidates)", [this](const Request& req, Response& res) {
    Session& s = session(req.matches[1]);
    const auto kind = candidate_kind_from_string(req.has_param("kind") ? req.get_param_value("kind") : "mixed-structure");
    send_json(res, s.candidates(kind));
  });
  post(R"(/sessions/([^/]+)/edits)", [this](const Request& req, Response& res) {
    send_json(res, session(req.matches[1]).apply_edits(body_of(req)));
  });
  post(R"(/sessions/([^/]+)/undo)", [this](const Request& req, Response& res) { send_json(res, session(req.matches[1]).undo()); });
  post(R"(/sessions/([^/]+)/train)", [this](const Request& req, Response& res) {
    const std::string job = start_training(session(req.matches[1]), body_of(req));
    send_json(res, {{"job_id", job}}, 202);
  });
  get(R"(/jobs/([^/]+))", [this](const Request& req, Response& res) {
    const auto s = jobs_.status(req.matches[1]);
    if (!s) throw NotFoundError("unknown job '" + std::string(req.matches[1]) + "'");
    send_json(res, *s);
  });
  get(R"(/sessions/([^/]+)/subsets)", [this](const Request& req, Response& res) {
    nlohmann::json out = nlohmann::json::array();
    for (const auto& s : session(req.matches[1]).subsets()) out.push_back(subset_json(s));
    send_json(res, out);
  });
  post(R"(/sessions/([^/]+)/subsets)", [this](const Request& req, Response& res) {
    send_json(res, subset_json(session(req.matches[1]).add_subset(body_of(req))), 201);
  });
  post(R"(/sessions/([^/]+)/snapshots)", [this](const Request& req, Response& res) {
    Session& s = session(req.matches[1]);
    const auto b = body_of(req);
    const std::vector<MeasuredPart> parts = {s.measure_selection(b)};
    send_json(res, projects_.add_snapshot(s.dataset().group_id, record(parts, b.value("comment", std::string()), "")), 201);
  });
}

}  // namespace mitoviz
