#pragma once

#include "json.hpp"
#include "mitoviz/imgproc/blend.hpp"
#include "mitoviz/imgproc/enhance.hpp"

namespace mitoviz {

// Everything the control panel can change about one session's view and thresholds.
struct ViewParams {
  EnhancementParams venus;
  EnhancementParams mito;
  BlendSpec blend;
  double sigma_s = 0.5;
  double sigma_m = 0.5;
  double sigma_e = 0.5;

  void validate() const;
  friend bool operator==(const ViewParams&, const ViewParams&) = default;
};

void to_json(nlohmann::json& j, const EnhancementParams& p);
void from_json(const nlohmann::json& j, EnhancementParams& p);
void to_json(nlohmann::json& j, const BlendSpec& b);
void from_json(const nlohmann::json& j, BlendSpec& b);
void to_json(nlohmann::json& j, const ViewParams& p);
// Partial objects update only the keys they carry.
void from_json(const nlohmann::json& j, ViewParams& p);

}  // namespace mitoviz
