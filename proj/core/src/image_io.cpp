#include "xsdepth/image_io.hpp"

#include <png.h>

#include <cstdio>
#include <memory>

namespace xsdepth {

namespace {

struct FileCloser {
  void operator()(std::FILE* f) const {
    if (f) std::fclose(f);
  }
};
using FilePtr = std::unique_ptr<std::FILE, FileCloser>;

struct PngReader {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngReader() {
    if (png) png_destroy_read_struct(&png, info ? &info : nullptr, nullptr);
  }
};

struct PngWriter {
  png_structp png = nullptr;
  png_infop info = nullptr;
  ~PngWriter() {
    if (png) png_destroy_write_struct(&png, info ? &info : nullptr);
  }
};

void read_rows(png_structp png, std::vector<png_bytep>& rows) { png_read_image(png, rows.data()); }

struct DecodedPng {
  long width = 0, height = 0, channels = 0;
  int bit_depth = 8;
  std::vector<uint8_t> bytes;  // row-major interleaved, native byte order for 16-bit
};

DecodedPng decode_png(const std::filesystem::path& path, bool want16) {
  FilePtr fp(std::fopen(path.c_str(), "rb"));
  if (!fp) throw IoError("cannot open image: " + path.string());

  PngReader r;
  r.png = png_create_read_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!r.png) throw IoError("libpng init failed for " + path.string());
  r.info = png_create_info_struct(r.png);
  if (!r.info) throw IoError("libpng init failed for " + path.string());
  if (setjmp(png_jmpbuf(r.png))) throw IoError("undecodable image: " + path.string());

  png_init_io(r.png, fp.get());
  png_read_info(r.png, r.info);

  png_uint_32 w = 0, h = 0;
  int bit_depth = 0, color_type = 0;
  png_get_IHDR(r.png, r.info, &w, &h, &bit_depth, &color_type, nullptr, nullptr, nullptr);

  if (color_type == PNG_COLOR_TYPE_PALETTE) png_set_palette_to_rgb(r.png);
  if (color_type == PNG_COLOR_TYPE_GRAY && bit_depth < 8) png_set_expand_gray_1_2_4_to_8(r.png);
  if (png_get_valid(r.png, r.info, PNG_INFO_tRNS)) png_set_tRNS_to_alpha(r.png);
  if (color_type & PNG_COLOR_MASK_ALPHA) png_set_strip_alpha(r.png);
  if (want16) {
    if (bit_depth != 16)
      throw IoError("expected 16-bit PNG, got " + std::to_string(bit_depth) + "-bit: " +
                    path.string());
    png_set_swap(r.png);  // PNG stores big-endian
  } else if (bit_depth == 16) {
    png_set_strip_16(r.png);
  }
  png_read_update_info(r.png, r.info);

  DecodedPng out;
  out.width = static_cast<long>(w);
  out.height = static_cast<long>(h);
  out.channels = png_get_channels(r.png, r.info);
  out.bit_depth = want16 ? 16 : 8;
  const size_t row_bytes = png_get_rowbytes(r.png, r.info);
  out.bytes.resize(row_bytes * h);
  std::vector<png_bytep> rows(h);
  for (png_uint_32 y = 0; y < h; ++y) rows[y] = out.bytes.data() + y * row_bytes;
  read_rows(r.png, rows);
  png_read_end(r.png, nullptr);
  return out;
}

void encode_png(const std::filesystem::path& path, long width, long height, long channels,
                int bit_depth, const std::vector<uint8_t>& bytes) {
  FilePtr fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw IoError("cannot open image for writing: " + path.string());

  PngWriter wr;
  wr.png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  if (!wr.png) throw IoError("libpng init failed for " + path.string());
  wr.info = png_create_info_struct(wr.png);
  if (!wr.info) throw IoError("libpng init failed for " + path.string());
  if (setjmp(png_jmpbuf(wr.png))) throw IoError("failed writing image: " + path.string());

  png_init_io(wr.png, fp.get());
  const int color = channels == 1 ? PNG_COLOR_TYPE_GRAY : PNG_COLOR_TYPE_RGB;
  png_set_IHDR(wr.png, wr.info, static_cast<png_uint_32>(width), static_cast<png_uint_32>(height),
               bit_depth, color, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT,
               PNG_FILTER_TYPE_DEFAULT);
  png_write_info(wr.png, wr.info);
  if (bit_depth == 16) png_set_swap(wr.png);

  const size_t row_bytes = static_cast<size_t>(width) * channels * (bit_depth / 8);
  std::vector<png_bytep> rows(height);
  for (long y = 0; y < height; ++y)
    rows[y] = const_cast<png_bytep>(bytes.data() + static_cast<size_t>(y) * row_bytes);
  png_write_image(wr.png, rows.data());
  png_write_end(wr.png, nullptr);
}

}  // namespace

ImagePlane read_png8(const std::filesystem::path& path) {
  DecodedPng d = decode_png(path, /*want16=*/false);
  if (d.channels != 1 && d.channels != 3)
    throw IoError("expected 1- or 3-channel PNG, got " + std::to_string(d.channels) + ": " +
                  path.string());
  Tensor t({d.channels, d.height, d.width});
  for (long y = 0; y < d.height; ++y)
    for (long x = 0; x < d.width; ++x)
      for (long c = 0; c < d.channels; ++c)
        t.at(c, y, x) =
            static_cast<Scalar>(d.bytes[(y * d.width + x) * d.channels + c]) / 255.0;
  return ImagePlane(std::move(t));
}

void write_png8(const std::filesystem::path& path, const ImagePlane& image) {
  const long c = image.channels(), h = image.height(), w = image.width();
  XS_REQUIRE(c == 1 || c == 3, "write_png8: image must have 1 or 3 channels");
  std::vector<uint8_t> bytes(static_cast<size_t>(h) * w * c);
  for (long y = 0; y < h; ++y)
    for (long x = 0; x < w; ++x)
      for (long ch = 0; ch < c; ++ch) {
        Scalar v = image.at(ch, y, x);
        v = std::min(1.0, std::max(0.0, v));
        bytes[(y * w + x) * c + ch] = static_cast<uint8_t>(std::lround(v * 255.0));
      }
  encode_png(path, w, h, c, 8, bytes);
}

Tensor read_png16(const std::filesystem::path& path) {
  DecodedPng d = decode_png(path, /*want16=*/true);
  if (d.channels != 1)
    throw IoError("expected single-channel 16-bit PNG: " + path.string());
  Tensor t({1, d.height, d.width});
  const uint16_t* vals = reinterpret_cast<const uint16_t*>(d.bytes.data());
  for (long i = 0; i < d.height * d.width; ++i) t[i] = static_cast<Scalar>(vals[i]);
  return t;
}

void write_png16(const std::filesystem::path& path, const Tensor& values) {
  XS_REQUIRE(values.ndim() == 3 && values.channels() == 1,
             "write_png16: expected [1,H,W] values");
  const long h = values.height(), w = values.width();
  std::vector<uint8_t> bytes(static_cast<size_t>(h) * w * 2);
  uint16_t* out = reinterpret_cast<uint16_t*>(bytes.data());
  for (long i = 0; i < h * w; ++i) {
    Scalar v = std::min(65535.0, std::max(0.0, values[i]));
    out[i] = static_cast<uint16_t>(std::lround(v));
  }
  encode_png(path, w, h, 1, 16, bytes);
}

void write_colormap_png(const std::filesystem::path& path, const Tensor& plane) {
  XS_REQUIRE(plane.ndim() == 3 && plane.channels() == 1,
             "write_colormap_png: expected [1,H,W]");
  const long h = plane.height(), w = plane.width();
  Scalar lo = plane[0], hi = plane[0];
  for (long i = 0; i < h * w; ++i) {
    lo = std::min(lo, plane[i]);
    hi = std::max(hi, plane[i]);
  }
  const Scalar span = hi - lo > 1e-12 ? hi - lo : 1.0;
  Tensor rgb({3, h, w});
  for (long i = 0; i < h * w; ++i) {
    const Scalar t = (plane[i] - lo) / span;
    // Compact turbo-like polynomial ramp: blue -> green -> red.
    const Scalar r = std::min(1.0, std::max(0.0, 1.6 * t - 0.2));
    const Scalar g = std::min(1.0, std::max(0.0, 2.0 * t * (1.0 - t) * 2.0));
    const Scalar b = std::min(1.0, std::max(0.0, 1.2 - 1.6 * t));
    rgb[i] = r;
    rgb[h * w + i] = g;
    rgb[2 * h * w + i] = b;
  }
  write_png8(path, ImagePlane(std::move(rgb)));
}

}  // namespace xsdepth
