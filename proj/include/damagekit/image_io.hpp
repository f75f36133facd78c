#pragma once

#include <filesystem>

#include "damagekit/image.hpp"

namespace damagekit {

// PNG/JPEG codecs are delegated to OpenCV's imgcodecs. Channel order in
// memory is always RGB(A).
RasterImage load_image(const std::filesystem::path& path, bool keep_alpha = false);
void save_image(const RasterImage& image, const std::filesystem::path& path);

// Reads only as much of the file as needed to learn its dimensions.
Size read_image_size(const std::filesystem::path& path);

// Nonzero pixels of a grayscale/colour image become set bits.
BinaryMask load_mask(const std::filesystem::path& path);
void save_mask(const BinaryMask& mask, const std::filesystem::path& path);

}  // namespace damagekit
