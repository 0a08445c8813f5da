#pragma once

#include <filesystem>

#include "b2p/image.hpp"

namespace b2p::splat {

// 8-bit outputs quantize round(clamp(v, 0, 1) * 255).
void write_ppm(const std::filesystem::path& path, const Image& img);
void write_png(const std::filesystem::path& path, const Image& img);
Image read_png(const std::filesystem::path& path);

// "B2PF", u32 width, u32 height, then H*W*3 little-endian float32.
void write_float_image(const std::filesystem::path& path, const Image& img);
Image read_float_image(const std::filesystem::path& path);

}  // namespace b2p::splat
