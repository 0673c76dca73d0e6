#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <vector>

#include "mitoviz/imgproc/blend.hpp"
#include "mitoviz/imgproc/raster.hpp"

namespace mitoviz {

// Raw single-channel samples as stored in a file. For palette PNGs the samples
// are palette indices.
struct GrayImage {
  int width = 0;
  int height = 0;
  int bit_depth = 8;  // 8 or 16
  bool indexed = false;
  std::vector<std::uint16_t> samples;
};

// Both throw IoError on unreadable files and ValidationError on multi-channel
// input, unsupported bit depths or zero dimensions.
GrayImage read_png(const std::filesystem::path& path);
GrayImage read_tiff(const std::filesystem::path& path);
// Dispatches on the file signature.
GrayImage read_gray_image(const std::filesystem::path& path);

// palette is only used when image.indexed is set (8-bit only).
std::vector<std::uint8_t> encode_png(const GrayImage& image, std::span<const Rgb> palette = {});
void write_png(const std::filesystem::path& path, const GrayImage& image, std::span<const Rgb> palette = {});
void write_tiff(const std::filesystem::path& path, const GrayImage& image);

// 8-bit RGB PNG of a rendered frame (channels quantized with round-half-up).
std::vector<std::uint8_t> encode_png_rgb(const RgbRaster& frame);

// Normalizes by the dtype maximum (255 or 65535).
ChannelRaster load_channel(const std::filesystem::path& path, double pixel_size_um = kDefaultPixelSizeUm);

// Format from the extension (.png, .tif, .tiff); values quantized to bit_depth.
void save_channel(const ChannelRaster& raster, const std::filesystem::path& path, int bit_depth = 16);

}  // namespace mitoviz
