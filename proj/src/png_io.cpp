#include "shmpipe/png_io.hpp"

#include <png.h>

#include <cstdio>
#include <cstring>
#include <memory>

#include "shmpipe/error.hpp"

namespace shmpipe {

namespace {

std::uint32_t read_be32(const unsigned char* p) {
    return (std::uint32_t(p[0]) << 24) | (std::uint32_t(p[1]) << 16) |
           (std::uint32_t(p[2]) << 8) | std::uint32_t(p[3]);
}

[[noreturn]] void fail(png_image& image, const std::filesystem::path& path, const char* what) {
    std::string message = std::string(what) + " " + path.string() + ": " + image.message;
    png_image_free(&image);
    throw Error(message);
}

} // namespace

PngSize probe_png_size(const std::filesystem::path& path) {
    std::unique_ptr<std::FILE, int (*)(std::FILE*)> f(std::fopen(path.string().c_str(), "rb"),
                                                      std::fclose);
    if (!f) throw Error("cannot open " + path.string());
    unsigned char header[24];
    if (std::fread(header, 1, sizeof(header), f.get()) != sizeof(header))
        throw Error("not a PNG file (truncated header): " + path.string());
    static const unsigned char sig[8] = {0x89, 'P', 'N', 'G', 0x0D, 0x0A, 0x1A, 0x0A};
    if (std::memcmp(header, sig, 8) != 0 || std::memcmp(header + 12, "IHDR", 4) != 0)
        throw Error("not a PNG file: " + path.string());
    PngSize size;
    size.width = static_cast<int>(read_be32(header + 16));
    size.height = static_cast<int>(read_be32(header + 20));
    return size;
}

Raster read_png(const std::filesystem::path& path) {
    png_image image;
    std::memset(&image, 0, sizeof(image));
    image.version = PNG_IMAGE_VERSION;
    if (!png_image_begin_read_from_file(&image, path.string().c_str()))
        fail(image, path, "cannot read");

    const bool color = (image.format & (PNG_FORMAT_FLAG_COLOR | PNG_FORMAT_FLAG_COLORMAP)) != 0;
    image.format = color ? PNG_FORMAT_RGB : PNG_FORMAT_GRAY;

    Raster out = Raster::make(static_cast<int>(image.width), static_cast<int>(image.height),
                              color ? 3 : 1);
    png_color background = {0, 0, 0}; // alpha, if any, composites onto black
    if (!png_image_finish_read(&image, &background, out.data.data(), 0, nullptr))
        fail(image, path, "cannot decode");
    return out;
}

MaskLayer read_mask_png(const std::filesystem::path& path, CodeTable table) {
    Raster raw = read_png(path);
    if (raw.channels != 1)
        throw Error("mask must be a single-channel PNG: " + path.string());
    MaskLayer mask;
    mask.width = raw.width;
    mask.height = raw.height;
    mask.table = table;
    mask.codes = std::move(raw.data);
    if (!mask.codes_valid())
        throw Error("mask " + path.string() + " contains codes outside the " +
                    std::string(code_table_name(table)) + " table");
    return mask;
}

namespace {

void write_png_impl(const std::filesystem::path& path, const std::uint8_t* data, int width,
                    int height, int channels) {
    if (auto parent = path.parent_path(); !parent.empty())
        std::filesystem::create_directories(parent);
    png_image image;
    std::memset(&image, 0, sizeof(image));
    image.version = PNG_IMAGE_VERSION;
    image.width = static_cast<png_uint_32>(width);
    image.height = static_cast<png_uint_32>(height);
    image.format = channels == 1 ? PNG_FORMAT_GRAY : PNG_FORMAT_RGB;
    if (!png_image_write_to_file(&image, path.string().c_str(), 0, data, 0, nullptr))
        fail(image, path, "cannot write");
}

} // namespace

void write_png(const std::filesystem::path& path, const Raster& image) {
    write_png_impl(path, image.data.data(), image.width, image.height, image.channels);
}

void write_png(const std::filesystem::path& path, const MaskLayer& mask) {
    write_png_impl(path, mask.codes.data(), mask.width, mask.height, 1);
}

} // namespace shmpipe
