#pragma once

#include <filesystem>
#include <map>

#include "shmpipe/raster.hpp"

namespace shmpipe {

/// Color-to-code mapping for importing third-party label rasters that encode
/// classes as RGB colors. The JSON form is
///   {"table": "component", "map": [{"rgb": [r,g,b], "code": k}, ...]}
struct LabelMapping {
    CodeTable table = CodeTable::Component;
    std::map<Color, std::uint8_t> colors;
};

LabelMapping load_label_mapping(const std::filesystem::path& path);

/// Converts an RGB label raster to a mask layer via the mapping. Colors
/// absent from the map are an error.
MaskLayer apply_label_mapping(const Raster& colored, const LabelMapping& mapping);

} // namespace shmpipe
