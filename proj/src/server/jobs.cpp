#include "mitoviz/server/jobs.hpp"

#include <algorithm>

#include <spdlog/spdlog.h>

namespace mitoviz {

void to_json(nlohmann::json& j, const JobStatus& s) {
  j = {{"id", s.id},         {"session_id", s.session_id}, {"status", s.status}, {"phase", s.phase},
       {"progress", s.progress}, {"error", s.error.empty() ? nlohmann::json(nullptr) : nlohmann::json(s.error)},
       {"result", s.result}};
}

JobRunner::JobRunner(int threads) {
  for (int i = 0; i < std::max(1, threads); ++i) threads_.emplace_back([this] { worker(); });
}

JobRunner::~JobRunner() {
  {
    std::lock_guard lock(mu_);
    stopping_ = true;
  }
  cv_.notify_all();
  for (auto& t : threads_) t.join();
}

std::string JobRunner::next_id() {
  std::lock_guard lock(mu_);
  return "j" + std::to_string(next_++);
}

void JobRunner::submit(const std::string& id, const std::string& session_id,
                       std::function<nlohmann::json(JobContext&)> work) {
  {
    std::lock_guard lock(mu_);
    JobStatus s;
    s.id = id;
    s.session_id = session_id;
    jobs_[id] = s;
    queue_.emplace_back(id, std::move(work));
  }
  cv_.notify_one();
}

std::optional<JobStatus> JobRunner::status(const std::string& id) const {
  std::lock_guard lock(mu_);
  auto it = jobs_.find(id);
  if (it == jobs_.end()) return std::nullopt;
  return it->second;
}

void JobRunner::wait_idle() {
  std::unique_lock lock(mu_);
  idle_cv_.wait(lock, [&] { return queue_.empty() && active_ == 0; });
}

void JobRunner::update(const std::string& id, const std::function<void(JobStatus&)>& f) {
  std::lock_guard lock(mu_);
  f(jobs_.at(id));
}

void JobRunner::worker() {
  while (true) {
    std::pair<std::string, std::function<nlohmann::json(JobContext&)>> job;
    {
      std::unique_lock lock(mu_);
      cv_.wait(lock, [&] { return stopping_ || !queue_.empty(); });
      if (queue_.empty()) return;
      job = std::move(queue_.front());
      queue_.pop_front();
      ++active_;
      jobs_.at(job.first).status = "running";
    }
    JobContext ctx(*this, job.first);
    try {
      nlohmann::json result = job.second(ctx);
      update(job.first, [&](JobStatus& s) {
        s.status = "succeeded";
        s.phase = "done";
        s.progress = 1.0;
        s.result = std::move(result);
      });
    } catch (const std::exception& e) {
      spdlog::warn("job {} failed: {}", job.first, e.what());
      update(job.first, [&](JobStatus& s) {
        s.status = "failed";
        s.phase = "failed";
        s.error = e.what();
      });
    }
    {
      std::lock_guard lock(mu_);
      --active_;
    }
    idle_cv_.notify_all();
  }
}

void JobContext::phase(const std::string& p) {
  runner_.update(id_, [&](JobStatus& s) { s.phase = p; });
}

void JobContext::progress(double fraction) {
  runner_.update(id_, [&](JobStatus& s) { s.progress = std::clamp(fraction, 0.0, 1.0); });
}

}  // namespace mitoviz
