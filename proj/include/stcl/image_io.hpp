#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "stcl/render.hpp"

namespace stcl {

/// 8-bit RGB PNG.
void write_png(const Image& img, const std::string& path);
Image read_png_rgb(const std::string& path);
std::vector<std::uint8_t> encode_png(const Image& img);

/// 16-bit grayscale PNG storing id + 1 (0 = background).
void write_png(const CategoryMap& map, const std::string& path);
CategoryMap read_png_labels(const std::string& path);

std::string base64_encode(const std::vector<std::uint8_t>& bytes);

}  // namespace stcl
