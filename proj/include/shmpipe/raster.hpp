#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "shmpipe/classes.hpp"

namespace shmpipe {

using Color = std::array<std::uint8_t, 3>;

/// Interleaved 8-bit image, 1 (gray) or 3 (RGB) channels, row-major.
struct Raster {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<std::uint8_t> data;

    static Raster make(int width, int height, int channels, std::uint8_t fill = 0);

    std::uint8_t at(int x, int y, int c = 0) const {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    std::uint8_t& at(int x, int y, int c = 0) {
        return data[(static_cast<std::size_t>(y) * width + x) * channels + c];
    }
    bool contains(int x, int y) const {
        return x >= 0 && y >= 0 && x < width && y < height;
    }
    std::uint64_t pixel_count() const {
        return static_cast<std::uint64_t>(width) * height;
    }
    bool operator==(const Raster&) const = default;
};

/// Which integer code table a mask layer is declared against.
enum class CodeTable : std::uint8_t {
    Binary,    // {0,1}: foreground and per-defect layers
    Component, // 0..7
    Damage,    // 0..3
};

std::uint8_t code_table_max(CodeTable table);
int code_table_size(CodeTable table);
std::string_view code_table_name(CodeTable table);
std::optional<CodeTable> code_table_from_name(std::string_view name);
std::string_view class_name_in_table(CodeTable table, int code);

/// Single-channel integer-coded label raster aligned to an image.
struct MaskLayer {
    int width = 0;
    int height = 0;
    CodeTable table = CodeTable::Binary;
    std::vector<std::uint8_t> codes;

    static MaskLayer make(int width, int height, CodeTable table, std::uint8_t fill = 0);

    std::uint8_t at(int x, int y) const {
        return codes[static_cast<std::size_t>(y) * width + x];
    }
    std::uint8_t& at(int x, int y) {
        return codes[static_cast<std::size_t>(y) * width + x];
    }
    std::uint64_t pixel_count() const {
        return static_cast<std::uint64_t>(width) * height;
    }
    /// Exhaustive scan: true iff every code belongs to the declared table.
    bool codes_valid() const;
    /// Number of pixels equal to `code`.
    std::uint64_t count(std::uint8_t code) const;
    bool operator==(const MaskLayer&) const = default;
};

/// Axis-aligned pixel rectangle, {x, y} inclusive top-left corner.
struct PixelRect {
    int x = 0;
    int y = 0;
    int w = 0;
    int h = 0;

    bool contains(int px, int py) const {
        return px >= x && py >= y && px < x + w && py < y + h;
    }
    bool operator==(const PixelRect&) const = default;
};

/// Copies the `rect` region out of a raster. rect must lie inside.
Raster crop(const Raster& src, const PixelRect& rect);
MaskLayer crop(const MaskLayer& src, const PixelRect& rect);

} // namespace shmpipe
