#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include "mitoviz/server/config.hpp"
#include "mitoviz/server/jobs.hpp"
#include "mitoviz/server/project.hpp"
#include "mitoviz/server/session.hpp"

namespace httplib {
class Server;
}

namespace mitoviz {

inline constexpr const char* kApiPrefix = "/api/v1";
inline constexpr const char* kIdempotencyHeader = "Idempotency-Key";

// The HTTP service. Projects and sessions under config.data_root are loaded
// (sessions by journal replay) at construction.
class App {
 public:
  explicit App(ServerConfig config);
  ~App();
  App(const App&) = delete;
  App& operator=(const App&) = delete;

  // Binds and serves on a background thread; returns the bound port (config
  // port 0 picks a free one). Throws IoError when binding fails.
  int start();
  // Serves on the calling thread until stop().
  void run();
  void stop();

  const ServerConfig& config() const { return config_; }
  ProjectStore& projects() { return projects_; }
  JobRunner& jobs() { return jobs_; }
  // NotFoundError for an unknown id.
  Session& session(const std::string& id);

 private:
  struct Cached {
    int status = 200;
    std::string body;
    std::string content_type;
  };

  void routes();
  Session& open_session(const nlohmann::json& request);
  std::string start_training(Session& s, const nlohmann::json& request);

  ServerConfig config_;
  ProjectStore projects_;
  JobRunner jobs_;
  std::unique_ptr<httplib::Server> http_;
  std::thread thread_;
  std::mutex sessions_mu_;
  std::map<std::string, std::unique_ptr<Session>> sessions_;
  std::uint64_t next_session_ = 1;
  std::mutex idem_mu_;
  std::map<std::string, Cached> idempotent_;
};

}  // namespace mitoviz
