#pragma once

#include "mtaa/image.hpp"

#include <filesystem>

namespace mtaa {

/// Decodes an 8-bit raster file (any format the OpenCV codecs understand)
/// into RGB. Throws IoError when the file cannot be read or decoded.
Image load_image(const std::filesystem::path& path);

/// Encodes to the format implied by the file extension.
void save_image(const std::filesystem::path& path, const Image& img);

}  // namespace mtaa
