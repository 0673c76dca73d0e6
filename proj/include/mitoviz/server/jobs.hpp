#pragma once

#include <condition_variable>
#include <deque>
#include <functional>
#include <map>
#include <mutex>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "json.hpp"

namespace mitoviz {

struct JobStatus {
  std::string id;
  std::string session_id;
  std::string status = "queued";  // queued, running, succeeded, failed
  std::string phase = "queued";   // queued, training, applying, done, failed
  double progress = 0.0;
  std::string error;
  nlohmann::json result;
};

void to_json(nlohmann::json& j, const JobStatus& s);

class JobContext;

// Fixed pool of worker threads running submitted jobs in order.
class JobRunner {
 public:
  explicit JobRunner(int threads);
  ~JobRunner();  // finishes queued and running jobs
  JobRunner(const JobRunner&) = delete;
  JobRunner& operator=(const JobRunner&) = delete;

  std::string next_id();
  // The work reports through the context; a thrown exception marks the job failed.
  void submit(const std::string& id, const std::string& session_id, std::function<nlohmann::json(JobContext&)> work);
  std::optional<JobStatus> status(const std::string& id) const;
  // Blocks until nothing is queued or running.
  void wait_idle();

 private:
  friend class JobContext;
  void worker();
  void update(const std::string& id, const std::function<void(JobStatus&)>& f);

  mutable std::mutex mu_;
  std::condition_variable cv_, idle_cv_;
  std::deque<std::pair<std::string, std::function<nlohmann::json(JobContext&)>>> queue_;
  std::map<std::string, JobStatus> jobs_;
  std::vector<std::thread> threads_;
  std::size_t active_ = 0;
  std::uint64_t next_ = 1;
  bool stopping_ = false;
};

class JobContext {
 public:
  JobContext(JobRunner& runner, std::string id) : runner_(runner), id_(std::move(id)) {}
  void phase(const std::string& p);
  void progress(double fraction);

 private:
  JobRunner& runner_;
  std::string id_;
};

}  // namespace mitoviz
