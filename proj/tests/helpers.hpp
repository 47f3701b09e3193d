#pragma once

#include <atomic>
#include <filesystem>
#include <fstream>
#include <string>
#include <string_view>
#include <unistd.h>
#include <vector>

#include "shmpipe/manifest.hpp"
#include "shmpipe/png_io.hpp"
#include "shmpipe/raster.hpp"

namespace testutil {

/// Self-deleting scratch directory, unique per instantiation.
struct TempDir {
    std::filesystem::path path;

    TempDir() {
        static std::atomic<int> counter{0};
        path = std::filesystem::temp_directory_path() /
               ("shmpipe_test_" + std::to_string(::getpid()) + "_" +
                std::to_string(counter.fetch_add(1)));
        std::filesystem::create_directories(path);
    }
    ~TempDir() {
        std::error_code ec;
        std::filesystem::remove_all(path, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    std::filesystem::path operator/(const std::string& name) const { return path / name; }
};

/// Builds a mask from rows of digit characters, e.g. {"010", "111"}.
inline shmpipe::MaskLayer mask_from_rows(const std::vector<std::string>& rows,
                                         shmpipe::CodeTable table) {
    int h = static_cast<int>(rows.size());
    int w = h > 0 ? static_cast<int>(rows[0].size()) : 0;
    shmpipe::MaskLayer mask = shmpipe::MaskLayer::make(w, h, table);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x)
            mask.at(x, y) = static_cast<std::uint8_t>(rows[y][x] - '0');
    return mask;
}

/// Deterministic RGB test pattern.
inline shmpipe::Raster patterned_rgb(int w, int h) {
    shmpipe::Raster r = shmpipe::Raster::make(w, h, 3);
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            r.at(x, y, 0) = static_cast<std::uint8_t>((x * 7 + y * 13) & 0xFF);
            r.at(x, y, 1) = static_cast<std::uint8_t>((x * 31 + y * 3) & 0xFF);
            r.at(x, y, 2) = static_cast<std::uint8_t>((x + y * 17) & 0xFF);
        }
    return r;
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
    std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    out << text;
}

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

/// True iff fn() throws a std::exception whose message contains `needle`.
template <class Fn>
inline bool throws_containing(Fn&& fn, std::string_view needle) {
    try {
        fn();
    } catch (const std::exception& e) {
        return std::string(e.what()).find(needle) != std::string::npos;
    }
    return false;
}

} // namespace testutil
