#pragma once

#include <filesystem>
#include <string>

#include "json.hpp"
#include "mitoviz/learn/training.hpp"

namespace mitoviz {

struct ServerConfig {
  std::string host = "127.0.0.1";
  int port = 8080;
  std::filesystem::path data_root = "mitoviz-data";
  int http_threads = 4;
  int training_threads = 1;  // bounded background pool shared by all sessions
  std::uint64_t seed = 1;
  TrainConfig training;      // fine-tuning defaults
  int bootstrap_max_steps = 600;

  // Throws ValidationError listing every bad field.
  void validate() const;
  friend bool operator==(const ServerConfig&, const ServerConfig&) = default;
};

void to_json(nlohmann::json& j, const ServerConfig& c);
// Missing keys keep defaults; unknown keys are rejected.
void from_json(const nlohmann::json& j, ServerConfig& c);

// Throws IoError when unreadable and ValidationError when malformed or invalid.
ServerConfig load_server_config(const std::filesystem::path& path);

}  // namespace mitoviz
