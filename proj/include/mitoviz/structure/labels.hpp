#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "mitoviz/imgproc/raster.hpp"

namespace mitoviz {

enum class StructureClass : std::uint8_t { Background = 0, Dendrite = 1, Axon = 2, CellBody = 3 };

inline constexpr int kStructureClassCount = 4;

std::string to_string(StructureClass c);
// Accepts the names produced by to_string; throws ValidationError otherwise.
StructureClass structure_class_from_string(const std::string& s);

// Per-pixel class codes (see StructureClass), row-major.
class StructureLabelRaster {
 public:
  StructureLabelRaster() = default;
  StructureLabelRaster(int width, int height, StructureClass fill = StructureClass::Background);
  // Throws ValidationError on codes > 3 or size mismatch.
  StructureLabelRaster(int width, int height, std::vector<std::uint8_t> codes);

  int width() const { return extent_.width; }
  int height() const { return extent_.height; }
  const Extent& extent() const { return extent_; }
  std::size_t size() const { return codes_.size(); }

  std::span<const std::uint8_t> codes() const { return codes_; }
  std::uint8_t operator[](std::size_t i) const { return codes_[i]; }
  StructureClass at(std::size_t i) const { return static_cast<StructureClass>(codes_[i]); }
  void set(std::size_t i, StructureClass c) { codes_.at(i) = static_cast<std::uint8_t>(c); }

  friend bool operator==(const StructureLabelRaster&, const StructureLabelRaster&) = default;

 private:
  Extent extent_;
  std::vector<std::uint8_t> codes_;
};

// 8-bit indexed PNG, palette entry n colours class n.
void export_labels(const StructureLabelRaster& labels, const std::filesystem::path& path);
// Accepts indexed or 8-bit grayscale PNGs whose samples are codes 0..3.
StructureLabelRaster import_labels(const std::filesystem::path& path);

std::vector<std::uint8_t> encode_labels_png(const StructureLabelRaster& labels);

// Fraction of pixels with equal codes; 1 for empty rasters. Throws ValidationError on size mismatch.
double label_agreement(const StructureLabelRaster& a, const StructureLabelRaster& b);

}  // namespace mitoviz
