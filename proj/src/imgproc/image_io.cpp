#include "mitoviz/imgproc/image_io.hpp"

#include <png.h>
#include <tiffio.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>
#include <string>

#include "mitoviz/core/error.hpp"

namespace mitoviz {
namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

void check_dims(int w, int h) {
  if (w < 1 || h < 1) throw ValidationError("dimensions", "image has zero width or height");
}

// libpng reports errors by longjmp; the outer frame owns every C++ object so
// nothing with a destructor lives between setjmp and the jump.
bool read_png_impl(std::FILE* fp, GrayImage& img, std::string& err) {
  png_structp png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) {
    err = "cannot allocate png reader";
    return false;
  }
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_read_struct(&png, &info, nullptr);
    err = "corrupt png stream";
    return false;
  }
  png_init_io(png, fp);
  png_read_info(png, info);
  const png_uint_32 w = png_get_image_width(png, info);
  const png_uint_32 h = png_get_image_height(png, info);
  const int color_type = png_get_color_type(png, info);
  const int depth = png_get_bit_depth(png, info);
  if (color_type != PNG_COLOR_TYPE_GRAY && color_type != PNG_COLOR_TYPE_PALETTE) {
    png_destroy_read_struct(&png, &info, nullptr);
    err = "multi-channel";
    return false;
  }
  if (color_type == PNG_COLOR_TYPE_GRAY && depth < 8) png_set_expand_gray_1_2_4_to_8(png);
  if (color_type == PNG_COLOR_TYPE_PALETTE && depth < 8) png_set_packing(png);
  if (depth == 16) png_set_swap(png);  // host order on little-endian hosts
  png_read_update_info(png, info);
  const std::size_t rowbytes = png_get_rowbytes(png, info);
  img.width = static_cast<int>(w);
  img.height = static_cast<int>(h);
  img.bit_depth = depth == 16 ? 16 : 8;
  img.indexed = color_type == PNG_COLOR_TYPE_PALETTE;
  img.samples.assign(static_cast<std::size_t>(w) * h, 0);
  std::unique_ptr<png_byte[]> row(new png_byte[rowbytes]);
  for (png_uint_32 y = 0; y < h; ++y) {
    png_read_row(png, row.get(), nullptr);
    std::uint16_t* dst = img.samples.data() + static_cast<std::size_t>(y) * w;
    if (img.bit_depth == 16) {
      std::memcpy(dst, row.get(), static_cast<std::size_t>(w) * 2);
    } else {
      for (png_uint_32 x = 0; x < w; ++x) dst[x] = row[x];
    }
  }
  png_read_end(png, nullptr);
  png_destroy_read_struct(&png, &info, nullptr);
  return true;
}

void append_bytes(png_structp png, png_bytep data, png_size_t len) {
  auto* out = static_cast<std::vector<std::uint8_t>*>(png_get_io_ptr(png));
  out->insert(out->end(), data, data + len);
}

void flush_noop(png_structp) {}

// rows: tightly packed big-endian sample bytes per row.
bool encode_png_impl(std::vector<std::uint8_t>& out, int w, int h, int depth, int color_type,
                     const std::vector<png_color>& palette, const std::vector<std::uint8_t>& rows,
                     std::size_t rowbytes) {
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!png) return false;
  png_infop info = png_create_info_struct(png);
  if (!info || setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    return false;
  }
  png_set_write_fn(png, &out, append_bytes, flush_noop);
  png_set_IHDR(png, info, static_cast<png_uint_32>(w), static_cast<png_uint_32>(h), depth, color_type,
               PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  if (color_type == PNG_COLOR_TYPE_PALETTE) {
    png_set_PLTE(png, info, palette.data(), static_cast<int>(palette.size()));
  }
  png_write_info(png, info);
  for (int y = 0; y < h; ++y) {
    png_write_row(png, rows.data() + static_cast<std::size_t>(y) * rowbytes);
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
  return true;
}

void write_file(const std::filesystem::path& path, const std::vector<std::uint8_t>& bytes) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw IoError("cannot write " + path.string());
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw IoError("short write to " + path.string());
}

void silence_tiff() {
  static const bool once = [] {
    TIFFSetErrorHandler(nullptr);
    TIFFSetWarningHandler(nullptr);
    return true;
  }();
  (void)once;
}

struct TiffCloser {
  void operator()(TIFF* t) const {
    if (t) TIFFClose(t);
  }
};

}  // namespace

GrayImage read_png(const std::filesystem::path& path) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw IoError("cannot open " + path.string());
  png_byte sig[8];
  if (std::fread(sig, 1, 8, fp.get()) != 8 || png_sig_cmp(sig, 0, 8) != 0) {
    throw ValidationError("format", path.string() + " is not a PNG file");
  }
  std::rewind(fp.get());
  GrayImage img;
  std::string err;
  if (!read_png_impl(fp.get(), img, err)) {
    if (err == "multi-channel") throw ValidationError("format", path.string() + ": multi-channel images are not supported");
    throw IoError(path.string() + ": " + err);
  }
  check_dims(img.width, img.height);
  return img;
}

GrayImage read_tiff(const std::filesystem::path& path) {
  silence_tiff();
  std::unique_ptr<TIFF, TiffCloser> tif(TIFFOpen(path.c_str(), "r"));
  if (!tif) throw IoError("cannot open TIFF " + path.string());
  uint32_t w = 0, h = 0;
  uint16_t spp = 1, bps = 8, fmt = SAMPLEFORMAT_UINT;
  TIFFGetField(tif.get(), TIFFTAG_IMAGEWIDTH, &w);
  TIFFGetField(tif.get(), TIFFTAG_IMAGELENGTH, &h);
  TIFFGetFieldDefaulted(tif.get(), TIFFTAG_SAMPLESPERPIXEL, &spp);
  TIFFGetFieldDefaulted(tif.get(), TIFFTAG_BITSPERSAMPLE, &bps);
  TIFFGetFieldDefaulted(tif.get(), TIFFTAG_SAMPLEFORMAT, &fmt);
  check_dims(static_cast<int>(w), static_cast<int>(h));
  if (spp != 1) throw ValidationError("format", path.string() + ": multi-channel images are not supported");
  if ((bps != 8 && bps != 16) || fmt != SAMPLEFORMAT_UINT) {
    throw ValidationError("format", path.string() + ": only 8/16-bit unsigned grayscale TIFF is supported");
  }
  GrayImage img;
  img.width = static_cast<int>(w);
  img.height = static_cast<int>(h);
  img.bit_depth = bps;
  img.samples.assign(static_cast<std::size_t>(w) * h, 0);
  std::vector<std::uint8_t> line(static_cast<std::size_t>(TIFFScanlineSize(tif.get())));
  for (uint32_t y = 0; y < h; ++y) {
    if (TIFFReadScanline(tif.get(), line.data(), y, 0) < 0) throw IoError(path.string() + ": corrupt TIFF scanline");
    std::uint16_t* dst = img.samples.data() + static_cast<std::size_t>(y) * w;
    if (bps == 16) {
      std::memcpy(dst, line.data(), static_cast<std::size_t>(w) * 2);
    } else {
      for (uint32_t x = 0; x < w; ++x) dst[x] = line[x];
    }
  }
  return img;
}

GrayImage read_gray_image(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw IoError("cannot open " + path.string());
  unsigned char sig[8] = {};
  f.read(reinterpret_cast<char*>(sig), 8);
  if (f.gcount() >= 8 && png_sig_cmp(sig, 0, 8) == 0) return read_png(path);
  if (f.gcount() >= 4 && ((sig[0] == 'I' && sig[1] == 'I' && sig[2] == 42 && sig[3] == 0) ||
                          (sig[0] == 'M' && sig[1] == 'M' && sig[2] == 0 && sig[3] == 42))) {
    return read_tiff(path);
  }
  throw ValidationError("format", path.string() + ": unsupported image format (expected PNG or TIFF)");
}

std::vector<std::uint8_t> encode_png(const GrayImage& img, std::span<const Rgb> palette) {
  check_dims(img.width, img.height);
  if (img.bit_depth != 8 && img.bit_depth != 16) throw ValidationError("bit_depth", "bit depth must be 8 or 16");
  if (img.indexed && img.bit_depth != 8) throw ValidationError("bit_depth", "indexed PNG must be 8-bit");
  if (img.samples.size() != static_cast<std::size_t>(img.width) * img.height) {
    throw ValidationError("samples", "sample count does not match dimensions");
  }
  const std::size_t bpp = img.bit_depth / 8;
  const std::size_t rowbytes = bpp * img.width;
  std::vector<std::uint8_t> rows(rowbytes * img.height);
  for (std::size_t i = 0; i < img.samples.size(); ++i) {
    if (bpp == 2) {
      rows[2 * i] = static_cast<std::uint8_t>(img.samples[i] >> 8);
      rows[2 * i + 1] = static_cast<std::uint8_t>(img.samples[i] & 0xFF);
    } else {
      rows[i] = static_cast<std::uint8_t>(img.samples[i]);
    }
  }
  std::vector<png_color> pal;
  int color_type = PNG_COLOR_TYPE_GRAY;
  if (img.indexed) {
    color_type = PNG_COLOR_TYPE_PALETTE;
    const std::uint16_t max_code = img.samples.empty() ? 0 : *std::max_element(img.samples.begin(), img.samples.end());
    const std::size_t n = std::max<std::size_t>(palette.size(), max_code + 1u);
    if (n > 256) throw ValidationError("palette", "indexed PNG supports at most 256 entries");
    for (std::size_t i = 0; i < n; ++i) {
      const Rgb c = i < palette.size() ? palette[i] : Rgb{0, 0, 0};
      pal.push_back({static_cast<png_byte>(std::lround(c[0] * 255)), static_cast<png_byte>(std::lround(c[1] * 255)),
                     static_cast<png_byte>(std::lround(c[2] * 255))});
    }
  }
  std::vector<std::uint8_t> out;
  if (!encode_png_impl(out, img.width, img.height, img.bit_depth, color_type, pal, rows, rowbytes)) {
    throw IoError("png encoding failed");
  }
  return out;
}

void write_png(const std::filesystem::path& path, const GrayImage& image, std::span<const Rgb> palette) {
  write_file(path, encode_png(image, palette));
}

void write_tiff(const std::filesystem::path& path, const GrayImage& img) {
  silence_tiff();
  check_dims(img.width, img.height);
  std::unique_ptr<TIFF, TiffCloser> tif(TIFFOpen(path.c_str(), "w"));
  if (!tif) throw IoError("cannot write TIFF " + path.string());
  TIFFSetField(tif.get(), TIFFTAG_IMAGEWIDTH, static_cast<uint32_t>(img.width));
  TIFFSetField(tif.get(), TIFFTAG_IMAGELENGTH, static_cast<uint32_t>(img.height));
  TIFFSetField(tif.get(), TIFFTAG_SAMPLESPERPIXEL, 1);
  TIFFSetField(tif.get(), TIFFTAG_BITSPERSAMPLE, img.bit_depth);
  TIFFSetField(tif.get(), TIFFTAG_SAMPLEFORMAT, SAMPLEFORMAT_UINT);
  TIFFSetField(tif.get(), TIFFTAG_PHOTOMETRIC, PHOTOMETRIC_MINISBLACK);
  TIFFSetField(tif.get(), TIFFTAG_PLANARCONFIG, PLANARCONFIG_CONTIG);
  TIFFSetField(tif.get(), TIFFTAG_COMPRESSION, COMPRESSION_NONE);
  TIFFSetField(tif.get(), TIFFTAG_ROWSPERSTRIP, 1);
  std::vector<std::uint8_t> line(static_cast<std::size_t>(img.width) * (img.bit_depth / 8));
  for (int y = 0; y < img.height; ++y) {
    const std::uint16_t* src = img.samples.data() + static_cast<std::size_t>(y) * img.width;
    if (img.bit_depth == 16) {
      std::memcpy(line.data(), src, line.size());
    } else {
      for (int x = 0; x < img.width; ++x) line[x] = static_cast<std::uint8_t>(src[x]);
    }
    if (TIFFWriteScanline(tif.get(), line.data(), static_cast<uint32_t>(y), 0) < 0) {
      throw IoError("failed writing TIFF " + path.string());
    }
  }
}

std::vector<std::uint8_t> encode_png_rgb(const RgbRaster& frame) {
  const int w = frame.width(), h = frame.height();
  check_dims(w, h);
  const std::size_t rowbytes = static_cast<std::size_t>(w) * 3;
  std::vector<std::uint8_t> rows(rowbytes * h);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    rows[i] = static_cast<std::uint8_t>(std::floor(std::clamp(frame.rgb[i], 0.0, 1.0) * 255.0 + 0.5));
  }
  std::vector<std::uint8_t> out;
  if (!encode_png_impl(out, w, h, 8, PNG_COLOR_TYPE_RGB, {}, rows, rowbytes)) throw IoError("png encoding failed");
  return out;
}

ChannelRaster load_channel(const std::filesystem::path& path, double pixel_size_um) {
  const GrayImage img = read_gray_image(path);
  if (img.indexed) throw ValidationError("format", path.string() + ": indexed images are label rasters, not channels");
  const double maxv = img.bit_depth == 16 ? 65535.0 : 255.0;
  std::vector<double> values(img.samples.size());
  std::transform(img.samples.begin(), img.samples.end(), values.begin(),
                 [&](std::uint16_t s) { return static_cast<double>(s) / maxv; });
  return ChannelRaster(img.width, img.height, std::move(values), pixel_size_um);
}

void save_channel(const ChannelRaster& raster, const std::filesystem::path& path, int bit_depth) {
  if (bit_depth != 8 && bit_depth != 16) throw ValidationError("bit_depth", "bit depth must be 8 or 16");
  GrayImage img;
  img.width = raster.width();
  img.height = raster.height();
  img.bit_depth = bit_depth;
  const double maxv = bit_depth == 16 ? 65535.0 : 255.0;
  img.samples.resize(raster.size());
  for (std::size_t i = 0; i < raster.size(); ++i) {
    img.samples[i] = static_cast<std::uint16_t>(std::lround(raster[i] * maxv));
  }
  std::string ext = path.extension().string();
  std::transform(ext.begin(), ext.end(), ext.begin(), [](unsigned char c) { return std::tolower(c); });
  if (ext == ".png") {
    write_png(path, img);
  } else if (ext == ".tif" || ext == ".tiff") {
    write_tiff(path, img);
  } else {
    throw ValidationError("path", "unsupported extension '" + ext + "' (use .png, .tif or .tiff)");
  }
}

}  // namespace mitoviz
