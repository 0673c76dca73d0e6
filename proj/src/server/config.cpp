#include "mitoviz/server/config.hpp"

#include <fstream>

#include "mitoviz/core/error.hpp"

namespace mitoviz {

void ServerConfig::validate() const {
  std::vector<FieldError> bad;
  if (host.empty()) bad.push_back({"host", "must not be empty"});
  if (port < 0 || port > 65535) bad.push_back({"port", "must be in [0, 65535]"});
  if (data_root.empty()) bad.push_back({"data_root", "must not be empty"});
  if (http_threads < 1) bad.push_back({"http_threads", "must be >= 1"});
  if (training_threads < 1) bad.push_back({"training_threads", "must be >= 1"});
  if (bootstrap_max_steps < 0) bad.push_back({"bootstrap_max_steps", "must be >= 0"});
  if (!bad.empty()) throw ValidationError("invalid server configuration", bad);
  training.validate();
}

void to_json(nlohmann::json& j, const ServerConfig& c) {
  j = {{"host", c.host},
       {"port", c.port},
       {"data_root", c.data_root.string()},
       {"http_threads", c.http_threads},
       {"training_threads", c.training_threads},
       {"seed", c.seed},
       {"training", c.training},
       {"bootstrap_max_steps", c.bootstrap_max_steps}};
}

void from_json(const nlohmann::json& j, ServerConfig& c) {
  if (!j.is_object()) throw ValidationError("config", "configuration must be a JSON object");
  ServerConfig out = c;
  for (const auto& [key, value] : j.items()) {
    try {
      if (key == "host") out.host = value.get<std::string>();
      else if (key == "port") out.port = value.get<int>();
      else if (key == "data_root") out.data_root = value.get<std::string>();
      else if (key == "http_threads") out.http_threads = value.get<int>();
      else if (key == "training_threads") out.training_threads = value.get<int>();
      else if (key == "seed") out.seed = value.get<std::uint64_t>();
      else if (key == "training") from_json(value, out.training);
      else if (key == "bootstrap_max_steps") out.bootstrap_max_steps = value.get<int>();
      else throw ValidationError(key, "unknown configuration key");
    } catch (const nlohmann::json::exception&) {
      throw ValidationError(key, "wrong type for configuration key");
    }
  }
  out.validate();
  c = out;
}

ServerConfig load_server_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot read config " + path.string());
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("config", std::string("malformed JSON: ") + e.what());
  }
  ServerConfig c;
  from_json(j, c);
  return c;
}

}  // namespace mitoviz
