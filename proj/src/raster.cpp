#include "shmpipe/raster.hpp"

#include "shmpipe/error.hpp"

namespace shmpipe {

Raster Raster::make(int width, int height, int channels, std::uint8_t fill) {
    if (width <= 0 || height <= 0 || (channels != 1 && channels != 3))
        throw Error("invalid raster shape");
    Raster r;
    r.width = width;
    r.height = height;
    r.channels = channels;
    r.data.assign(static_cast<std::size_t>(width) * height * channels, fill);
    return r;
}

std::uint8_t code_table_max(CodeTable table) {
    switch (table) {
        case CodeTable::Binary: return 1;
        case CodeTable::Component: return kComponentClassCount - 1;
        case CodeTable::Damage: return kDamageStateCount - 1;
    }
    return 0;
}

int code_table_size(CodeTable table) { return code_table_max(table) + 1; }

std::string_view code_table_name(CodeTable table) {
    switch (table) {
        case CodeTable::Binary: return "binary";
        case CodeTable::Component: return "component";
        case CodeTable::Damage: return "damage";
    }
    return "?";
}

std::optional<CodeTable> code_table_from_name(std::string_view name) {
    if (name == "binary") return CodeTable::Binary;
    if (name == "component") return CodeTable::Component;
    if (name == "damage") return CodeTable::Damage;
    return std::nullopt;
}

std::string_view class_name_in_table(CodeTable table, int code) {
    switch (table) {
        case CodeTable::Binary: return code == 0 ? "negative" : "positive";
        case CodeTable::Component:
            return name_of(static_cast<ComponentClass>(code));
        case CodeTable::Damage:
            return name_of(static_cast<DamageState>(code));
    }
    return "?";
}

MaskLayer MaskLayer::make(int width, int height, CodeTable table, std::uint8_t fill) {
    if (width <= 0 || height <= 0) throw Error("invalid mask shape");
    MaskLayer m;
    m.width = width;
    m.height = height;
    m.table = table;
    m.codes.assign(static_cast<std::size_t>(width) * height, fill);
    return m;
}

bool MaskLayer::codes_valid() const {
    const std::uint8_t max = code_table_max(table);
    for (std::uint8_t c : codes)
        if (c > max) return false;
    return true;
}

std::uint64_t MaskLayer::count(std::uint8_t code) const {
    std::uint64_t n = 0;
    for (std::uint8_t c : codes) n += (c == code);
    return n;
}

namespace {

void check_rect(int w, int h, const PixelRect& rect) {
    if (rect.w <= 0 || rect.h <= 0 || rect.x < 0 || rect.y < 0 || rect.x + rect.w > w ||
        rect.y + rect.h > h)
        throw Error("crop rect outside raster bounds");
}

} // namespace

Raster crop(const Raster& src, const PixelRect& rect) {
    check_rect(src.width, src.height, rect);
    Raster out = Raster::make(rect.w, rect.h, src.channels);
    for (int y = 0; y < rect.h; ++y) {
        const std::uint8_t* row = &src.data[((static_cast<std::size_t>(rect.y) + y) * src.width +
                                             rect.x) * src.channels];
        std::copy(row, row + static_cast<std::size_t>(rect.w) * src.channels,
                  &out.data[static_cast<std::size_t>(y) * rect.w * src.channels]);
    }
    return out;
}

MaskLayer crop(const MaskLayer& src, const PixelRect& rect) {
    check_rect(src.width, src.height, rect);
    MaskLayer out = MaskLayer::make(rect.w, rect.h, src.table);
    for (int y = 0; y < rect.h; ++y) {
        const std::uint8_t* row =
            &src.codes[(static_cast<std::size_t>(rect.y) + y) * src.width + rect.x];
        std::copy(row, row + rect.w, &out.codes[static_cast<std::size_t>(y) * rect.w]);
    }
    return out;
}

} // namespace shmpipe
