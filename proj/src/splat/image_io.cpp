#include "b2p/splat/image_io.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <memory>

#include <png.h>

#include "b2p/error.hpp"

namespace b2p::splat {
namespace {

uint8_t to_byte(double v) { return static_cast<uint8_t>(std::lround(std::clamp(v, 0.0, 1.0) * 255.0)); }

std::vector<uint8_t> to_bytes(const Image& img) {
  std::vector<uint8_t> out(img.size());
  for (size_t i = 0; i < img.size(); ++i) out[i] = to_byte(img.data[i]);
  return out;
}

struct FileCloser {
  void operator()(FILE* f) const {
    if (f) std::fclose(f);
  }
};

}  // namespace

void write_ppm(const std::filesystem::path& path, const Image& img) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot write " + path.string());
  f << "P6\n" << img.width << " " << img.height << "\n255\n";
  const auto bytes = to_bytes(img);
  f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!f) throw FormatError("write failed: " + path.string());
}

void write_png(const std::filesystem::path& path, const Image& img) {
  std::unique_ptr<FILE, FileCloser> fp(std::fopen(path.c_str(), "wb"));
  if (!fp) throw FormatError("cannot write " + path.string());
  png_structp png = png_create_write_struct(PNG_LIBPNG_VER_STRING, nullptr, nullptr, nullptr);
  png_infop info = png ? png_create_info_struct(png) : nullptr;
  if (!info) {
    png_destroy_write_struct(&png, nullptr);
    throw FormatError("libpng initialization failed");
  }
  const auto bytes = to_bytes(img);
  if (setjmp(png_jmpbuf(png))) {
    png_destroy_write_struct(&png, &info);
    throw FormatError("png encoding failed: " + path.string());
  }
  png_init_io(png, fp.get());
  png_set_IHDR(png, info, static_cast<png_uint_32>(img.width), static_cast<png_uint_32>(img.height), 8,
               PNG_COLOR_TYPE_RGB, PNG_INTERLACE_NONE, PNG_COMPRESSION_TYPE_DEFAULT, PNG_FILTER_TYPE_DEFAULT);
  png_write_info(png, info);
  for (int y = 0; y < img.height; ++y) {
    png_write_row(png, const_cast<png_bytep>(bytes.data() + static_cast<size_t>(y) * img.width * 3));
  }
  png_write_end(png, nullptr);
  png_destroy_write_struct(&png, &info);
}

Image read_png(const std::filesystem::path& path) {
  png_image image;
  std::memset(&image, 0, sizeof(image));
  image.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&image, path.c_str())) throw FormatError("cannot read png " + path.string());
  image.format = PNG_FORMAT_RGB;
  std::vector<uint8_t> buf(PNG_IMAGE_SIZE(image));
  if (!png_image_finish_read(&image, nullptr, buf.data(), 0, nullptr)) {
    png_image_free(&image);
    throw FormatError("png decoding failed: " + path.string());
  }
  Image img(static_cast<int>(image.width), static_cast<int>(image.height));
  for (size_t i = 0; i < img.size(); ++i) img.data[i] = buf[i] / 255.0;
  return img;
}

void write_float_image(const std::filesystem::path& path, const Image& img) {
  std::ofstream f(path, std::ios::binary);
  if (!f) throw FormatError("cannot write " + path.string());
  const uint32_t dims[2] = {static_cast<uint32_t>(img.width), static_cast<uint32_t>(img.height)};
  f.write("B2PF", 4);
  f.write(reinterpret_cast<const char*>(dims), sizeof(dims));
  std::vector<float> v(img.data.begin(), img.data.end());
  f.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(float)));
  if (!f) throw FormatError("write failed: " + path.string());
}

Image read_float_image(const std::filesystem::path& path) {
  std::ifstream f(path, std::ios::binary);
  char magic[4];
  uint32_t dims[2];
  if (!f.read(magic, 4) || std::memcmp(magic, "B2PF", 4) != 0) throw FormatError("not a float image: " + path.string());
  if (!f.read(reinterpret_cast<char*>(dims), sizeof(dims))) throw FormatError("float image: truncated header");
  Image img(static_cast<int>(dims[0]), static_cast<int>(dims[1]));
  std::vector<float> v(img.size());
  if (!f.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(float)))) {
    throw FormatError("float image: truncated data");
  }
  std::copy(v.begin(), v.end(), img.data.begin());
  return img;
}

}  // namespace b2p::splat
