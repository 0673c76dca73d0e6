#include "mitoviz/mito/objects.hpp"

#include <array>
#include <map>
#include <unordered_set>

#include "mitoviz/core/error.hpp"
#include "mitoviz/imgproc/components.hpp"
#include "mitoviz/imgproc/image_io.hpp"

namespace mitoviz {
namespace {

constexpr std::array<const char*, 4> kProvenanceNames = {"detected", "user-split", "user-merged", "user-included"};

}  // namespace

std::string to_string(Provenance p) { return kProvenanceNames.at(static_cast<std::size_t>(p)); }

Provenance provenance_from_string(const std::string& s) {
  for (std::size_t i = 0; i < kProvenanceNames.size(); ++i) {
    if (s == kProvenanceNames[i]) return static_cast<Provenance>(i);
  }
  throw ValidationError("provenance", "unknown provenance '" + s + "'");
}

const MitoObject* MitoState::find(ObjectId id) const {
  for (const auto& o : objects) {
    if (o.id == id) return &o;
  }
  return nullptr;
}

std::size_t MitoState::index_of(ObjectId id) const {
  for (std::size_t i = 0; i < objects.size(); ++i) {
    if (objects[i].id == id) return i;
  }
  throw NotFoundError("unknown mitochondria object id " + std::to_string(id));
}

BinaryMask MitoState::foreground() const {
  BinaryMask m(extent.width, extent.height);
  for (const auto& o : objects)
    for (PixelIndex i : o.pixels) m.bits[i] = 1;
  return m;
}

std::vector<std::uint32_t> MitoState::id_map() const {
  std::vector<std::uint32_t> ids(extent.size(), 0);
  for (const auto& o : objects)
    for (PixelIndex i : o.pixels) ids[i] = o.id;
  return ids;
}

MitoObject MitoState::make_object(PixelSet pixels, Provenance provenance) {
  MitoObject o;
  o.id = next_id++;
  o.bbox = pixels.bbox();
  o.pixels = std::move(pixels);
  o.provenance = provenance;
  return o;
}

bool MitoState::satisfies_invariants() const {
  std::vector<std::uint8_t> seen(extent.size(), 0);
  std::unordered_set<ObjectId> ids;
  for (const auto& o : objects) {
    if (o.pixels.empty() || o.id >= next_id || !ids.insert(o.id).second) return false;
    if (o.bbox != o.pixels.bbox()) return false;
    for (PixelIndex i : o.pixels) {
      if (i >= extent.size() || seen[i]) return false;
      seen[i] = 1;
    }
    const PixelIndex seed[] = {o.pixels.indices().front()};
    const auto reach = flood_fill(extent, seed, [&](PixelIndex i) { return o.pixels.contains(i); });
    if (reach.size() != o.pixels.size()) return false;
  }
  return true;
}

MitoState detect_objects(const BinaryMask& foreground, double sigma_m, double sigma_e) {
  MitoState s;
  s.extent = foreground.extent;
  s.sigma_m = sigma_m;
  s.sigma_e = sigma_e;
  for (auto& comp : label_components(foreground)) s.objects.push_back(s.make_object(std::move(comp), Provenance::Detected));
  return s;
}

nlohmann::json encode_rle(const PixelSet& pixels) {
  nlohmann::json runs = nlohmann::json::array();
  const Extent& e = pixels.extent();
  const auto idx = pixels.indices();
  std::size_t k = 0;
  while (k < idx.size()) {
    const Point start = e.point(idx[k]);
    int len = 1;
    while (k + len < idx.size() && idx[k + len] == idx[k] + static_cast<PixelIndex>(len) &&
           e.point(idx[k + len]).y == start.y) {
      ++len;
    }
    runs.push_back({start.y, start.x, len});
    k += static_cast<std::size_t>(len);
  }
  return runs;
}

PixelSet decode_rle(const Extent& extent, const nlohmann::json& runs) {
  std::vector<PixelIndex> idx;
  for (const auto& r : runs) {
    const int row = r.at(0).get<int>(), col = r.at(1).get<int>(), len = r.at(2).get<int>();
    if (row < 0 || row >= extent.height || col < 0 || len < 1 || col + len > extent.width) {
      throw ValidationError("rle_pixels", "run outside the raster");
    }
    for (int k = 0; k < len; ++k) idx.push_back(extent.index(col + k, row));
  }
  return PixelSet(extent, std::move(idx));
}

nlohmann::json to_json(const MitoState& s) {
  nlohmann::json objs = nlohmann::json::array();
  for (const auto& o : s.objects) {
    objs.push_back({{"id", o.id},
                    {"provenance", to_string(o.provenance)},
                    {"bbox", {{"x", o.bbox.x}, {"y", o.bbox.y}, {"w", o.bbox.w}, {"h", o.bbox.h}}},
                    {"rle_pixels", encode_rle(o.pixels)}});
  }
  return {{"width", s.extent.width}, {"height", s.extent.height}, {"sigma_m", s.sigma_m},
          {"sigma_e", s.sigma_e},    {"next_id", s.next_id},       {"objects", std::move(objs)}};
}

MitoState mito_state_from_json(const nlohmann::json& j) {
  try {
    MitoState s;
    s.extent = {j.at("width").get<int>(), j.at("height").get<int>()};
    if (s.extent.width < 1 || s.extent.height < 1) throw ValidationError("extent", "object map has zero size");
    s.sigma_m = j.value("sigma_m", 0.5);
    s.sigma_e = j.value("sigma_e", 0.5);
    ObjectId max_id = 0;
    for (const auto& o : j.at("objects")) {
      MitoObject obj;
      obj.id = o.at("id").get<ObjectId>();
      obj.provenance = provenance_from_string(o.value("provenance", std::string("detected")));
      obj.pixels = decode_rle(s.extent, o.at("rle_pixels"));
      obj.bbox = obj.pixels.bbox();
      max_id = std::max(max_id, obj.id);
      s.objects.push_back(std::move(obj));
    }
    s.next_id = std::max<ObjectId>(j.value("next_id", max_id + 1), max_id + 1);
    if (!s.satisfies_invariants()) throw ValidationError("objects", "object set violates disjointness or connectivity");
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("objects", std::string("malformed object json: ") + e.what());
  }
}

void export_id_map(const MitoState& s, const std::filesystem::path& path) {
  GrayImage img;
  img.width = s.extent.width;
  img.height = s.extent.height;
  img.bit_depth = 16;
  const auto ids = s.id_map();
  img.samples.resize(ids.size());
  for (std::size_t i = 0; i < ids.size(); ++i) {
    if (ids[i] > 0xFFFF) throw ValidationError("id", "object id exceeds the 16-bit id-map range");
    img.samples[i] = static_cast<std::uint16_t>(ids[i]);
  }
  write_png(path, img);
}

MitoState import_id_map(const std::filesystem::path& path) {
  const GrayImage img = read_png(path);
  MitoState s;
  s.extent = {img.width, img.height};
  std::map<std::uint16_t, bool> present;
  for (std::uint16_t v : img.samples)
    if (v) present[v] = true;
  std::vector<PixelSet> comps;
  for (const auto& [id, _] : present) {
    BinaryMask m(img.width, img.height);
    for (std::size_t i = 0; i < img.samples.size(); ++i) m.bits[i] = img.samples[i] == id;
    for (auto& c : label_components(m)) comps.push_back(std::move(c));
  }
  std::sort(comps.begin(), comps.end(),
            [](const PixelSet& a, const PixelSet& b) { return a.indices().front() < b.indices().front(); });
  for (auto& c : comps) s.objects.push_back(s.make_object(std::move(c), Provenance::Detected));
  return s;
}

}  // namespace mitoviz
