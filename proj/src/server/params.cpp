#include "mitoviz/server/params.hpp"

#include "mitoviz/core/error.hpp"

namespace mitoviz {
namespace {

const char* kLayerNames[] = {"venus", "mito", "structure", "objects"};

template <typename T>
T read(const nlohmann::json& j, const std::string& key) {
  try {
    return j.get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ValidationError(key, "wrong type");
  }
}

void require_object(const nlohmann::json& j, const std::string& what) {
  if (!j.is_object()) throw ValidationError(what, "must be an object");
}

}  // namespace

void ViewParams::validate() const {
  venus.validate();
  mito.validate();
  blend.validate();
  std::vector<FieldError> bad;
  for (auto [name, v] : {std::pair{"sigma_s", sigma_s}, {"sigma_m", sigma_m}, {"sigma_e", sigma_e}})
    if (!(v >= 0.0 && v <= 1.0)) bad.push_back({name, "must be in [0, 1]"});
  if (!bad.empty()) throw ValidationError("invalid parameters", bad);
}

void to_json(nlohmann::json& j, const EnhancementParams& p) {
  j = {{"brightness", p.brightness}, {"contrast", p.contrast}, {"translate", p.translate}};
}

void from_json(const nlohmann::json& j, EnhancementParams& p) {
  require_object(j, "enhancement");
  for (const auto& [key, value] : j.items()) {
    if (key == "brightness") p.brightness = read<double>(value, key);
    else if (key == "contrast") p.contrast = read<double>(value, key);
    else if (key == "translate") p.translate = read<double>(value, key);
    else throw ValidationError(key, "unknown enhancement parameter");
  }
}

void to_json(nlohmann::json& j, const BlendSpec& b) {
  j = nlohmann::json::object();
  for (std::size_t k = 0; k < b.layers.size(); ++k)
    j[kLayerNames[k]] = {{"opacity", b.layers[k].opacity}, {"colormap", to_string(b.layers[k].colormap)}};
}

void from_json(const nlohmann::json& j, BlendSpec& b) {
  require_object(j, "blend");
  for (const auto& [key, value] : j.items()) {
    std::size_t k = 0;
    while (k < b.layers.size() && key != kLayerNames[k]) ++k;
    if (k == b.layers.size()) throw ValidationError(key, "unknown layer");
    require_object(value, key);
    for (const auto& [field, v] : value.items()) {
      if (field == "opacity") b.layers[k].opacity = read<double>(v, key + "." + field);
      else if (field == "colormap") b.layers[k].colormap = colormap_from_string(read<std::string>(v, key + "." + field));
      else throw ValidationError(key + "." + field, "unknown layer field");
    }
  }
}

void to_json(nlohmann::json& j, const ViewParams& p) {
  j = {{"venus", p.venus},     {"mito", p.mito},       {"blend", p.blend},
       {"sigma_s", p.sigma_s}, {"sigma_m", p.sigma_m}, {"sigma_e", p.sigma_e}};
}

void from_json(const nlohmann::json& j, ViewParams& p) {
  require_object(j, "params");
  ViewParams out = p;
  for (const auto& [key, value] : j.items()) {
    if (key == "venus") from_json(value, out.venus);
    else if (key == "mito") from_json(value, out.mito);
    else if (key == "blend") from_json(value, out.blend);
    else if (key == "sigma_s") out.sigma_s = read<double>(value, key);
    else if (key == "sigma_m") out.sigma_m = read<double>(value, key);
    else if (key == "sigma_e") out.sigma_e = read<double>(value, key);
    else throw ValidationError(key, "unknown parameter");
  }
  out.validate();
  p = out;
}

}  // namespace mitoviz
