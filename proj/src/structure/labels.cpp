#include "mitoviz/structure/labels.hpp"

#include <array>

#include "mitoviz/core/error.hpp"
#include "mitoviz/imgproc/blend.hpp"
#include "mitoviz/imgproc/image_io.hpp"

namespace mitoviz {
namespace {

constexpr std::array<const char*, kStructureClassCount> kNames = {"background", "dendrite", "axon", "cell-body"};

std::array<Rgb, kStructureClassCount> label_palette() {
  return {Rgb{0, 0, 0}, category_color(Colormap::Categorical, 1), category_color(Colormap::Categorical, 2),
          category_color(Colormap::Categorical, 3)};
}

GrayImage to_gray(const StructureLabelRaster& labels) {
  GrayImage img;
  img.width = labels.width();
  img.height = labels.height();
  img.bit_depth = 8;
  img.indexed = true;
  img.samples.assign(labels.codes().begin(), labels.codes().end());
  return img;
}

}  // namespace

std::string to_string(StructureClass c) { return kNames.at(static_cast<std::size_t>(c)); }

StructureClass structure_class_from_string(const std::string& s) {
  for (std::size_t i = 0; i < kNames.size(); ++i) {
    if (s == kNames[i]) return static_cast<StructureClass>(i);
  }
  if (s == "cellbody" || s == "cell_body") return StructureClass::CellBody;
  throw ValidationError("structure", "unknown structure class '" + s + "'");
}

StructureLabelRaster::StructureLabelRaster(int width, int height, StructureClass fill) : extent_{width, height} {
  if (width < 1 || height < 1) throw ValidationError("extent", "label raster dimensions must be at least 1x1");
  codes_.assign(extent_.size(), static_cast<std::uint8_t>(fill));
}

StructureLabelRaster::StructureLabelRaster(int width, int height, std::vector<std::uint8_t> codes)
    : extent_{width, height}, codes_(std::move(codes)) {
  if (width < 1 || height < 1) throw ValidationError("extent", "label raster dimensions must be at least 1x1");
  if (codes_.size() != extent_.size()) throw ValidationError("labels", "label count does not match dimensions");
  for (std::uint8_t c : codes_) {
    if (c >= kStructureClassCount) {
      throw ValidationError("labels", "structure code " + std::to_string(c) + " outside 0..3");
    }
  }
}

std::vector<std::uint8_t> encode_labels_png(const StructureLabelRaster& labels) {
  const auto pal = label_palette();
  return encode_png(to_gray(labels), pal);
}

void export_labels(const StructureLabelRaster& labels, const std::filesystem::path& path) {
  const auto pal = label_palette();
  write_png(path, to_gray(labels), pal);
}

StructureLabelRaster import_labels(const std::filesystem::path& path) {
  const GrayImage img = read_png(path);
  if (img.bit_depth != 8) throw ValidationError("format", path.string() + ": label raster must be 8-bit");
  std::vector<std::uint8_t> codes(img.samples.begin(), img.samples.end());
  return StructureLabelRaster(img.width, img.height, std::move(codes));
}

double label_agreement(const StructureLabelRaster& a, const StructureLabelRaster& b) {
  if (!(a.extent() == b.extent())) throw ValidationError("labels", "label rasters differ in size");
  if (a.size() == 0) return 1.0;
  std::size_t same = 0;
  for (std::size_t i = 0; i < a.size(); ++i) same += a[i] == b[i];
  return static_cast<double>(same) / static_cast<double>(a.size());
}

}  // namespace mitoviz
