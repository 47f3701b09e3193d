#pragma once

#include <filesystem>

#include "shmpipe/raster.hpp"

namespace shmpipe {

struct PngSize {
    int width = 0;
    int height = 0;
};

/// Reads width/height from the PNG header without decoding the image.
PngSize probe_png_size(const std::filesystem::path& path);

/// Decodes an 8-bit PNG. Grayscale images come back with 1 channel, color
/// (including palette) with 3; 16-bit depth is reduced to 8, alpha stripped.
Raster read_png(const std::filesystem::path& path);

/// Reads a single-channel PNG as a mask layer declared against `table`.
/// Throws if the file is not single-channel or contains out-of-table codes.
MaskLayer read_mask_png(const std::filesystem::path& path, CodeTable table);

void write_png(const std::filesystem::path& path, const Raster& image);
void write_png(const std::filesystem::path& path, const MaskLayer& mask);

} // namespace shmpipe
