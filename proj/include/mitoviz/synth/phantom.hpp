#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "json.hpp"
#include "mitoviz/imgproc/raster.hpp"
#include "mitoviz/mito/objects.hpp"
#include "mitoviz/structure/labels.hpp"

namespace mitoviz {

struct ValueRange {
  double lo = 0.0;
  double hi = 0.0;
  friend bool operator==(const ValueRange&, const ValueRange&) = default;
};

struct PhantomSpec {
  std::uint64_t seed = 1;
  int width = 128;
  int height = 128;

  int dendrite_count = 2;
  ValueRange dendrite_width{4, 8};
  int axon_count = 2;
  ValueRange axon_width{1, 3};
  int cell_body_count = 0;
  ValueRange cell_body_radius{8, 12};

  int dendrite_mito_count = 6;
  ValueRange dendrite_mito_length{8, 40};
  int axon_mito_count = 6;
  ValueRange axon_mito_length{2, 8};

  double background = 0.08;
  double dendrite_intensity = 0.75;
  double axon_intensity = 0.6;
  double cell_body_intensity = 0.85;
  double mito_background = 0.05;
  double mito_intensity = 0.8;
  double noise_sigma = 0.03;

  // Throws ValidationError listing every bad field.
  void validate() const;
  friend bool operator==(const PhantomSpec&, const PhantomSpec&) = default;
};

void to_json(nlohmann::json& j, const PhantomSpec& s);
// Missing keys keep defaults; unknown keys are rejected.
void from_json(const nlohmann::json& j, PhantomSpec& s);

// A rendered shape: a tube along points (half-width radius) or a disc (one point).
struct Primitive {
  StructureClass cls = StructureClass::Dendrite;
  double radius = 1.0;
  std::vector<std::array<double, 2>> points;
};

struct TruthObject {
  PixelSet pixels;
  StructureClass compartment = StructureClass::Dendrite;
};

struct GroundTruth {
  StructureLabelRaster labels;
  std::vector<TruthObject> objects;
  std::vector<Primitive> primitives;  // in painting order; later ones overwrite

  // Objects as a detected state with ids 1..n in list order.
  MitoState object_state() const;
};

struct Phantom {
  ChannelRaster venus;
  ChannelRaster mito;
  GroundTruth truth;
};

// Tube pixels lie within radius + this margin of the centre line, which keeps
// one-pixel tubes 4-connected along diagonals.
inline constexpr double kTubeMargin = 0.25;

Phantom generate_phantom(const PhantomSpec& spec);

}  // namespace mitoviz
