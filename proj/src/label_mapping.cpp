#include "shmpipe/label_mapping.hpp"

#include <fstream>

#include "json.hpp"
#include "shmpipe/error.hpp"

namespace shmpipe {

LabelMapping load_label_mapping(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open label mapping " + path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
        LabelMapping mapping;
        auto table_name = doc.at("table").get<std::string>();
        auto table = code_table_from_name(table_name);
        if (!table) throw Error("label mapping: unknown code table " + table_name);
        mapping.table = *table;
        for (const auto& item : doc.at("map")) {
            const auto& rgb = item.at("rgb");
            if (!rgb.is_array() || rgb.size() != 3)
                throw Error("label mapping: rgb must be [r,g,b]");
            Color color{rgb.at(0).get<std::uint8_t>(), rgb.at(1).get<std::uint8_t>(),
                        rgb.at(2).get<std::uint8_t>()};
            auto code = item.at("code").get<unsigned>();
            if (code > code_table_max(mapping.table))
                throw Error("label mapping: code " + std::to_string(code) + " outside the " +
                            std::string(code_table_name(mapping.table)) + " table");
            if (!mapping.colors.emplace(color, static_cast<std::uint8_t>(code)).second)
                throw Error("label mapping: duplicate color");
        }
        return mapping;
    } catch (const nlohmann::json::exception& e) {
        throw Error("label mapping " + path.string() + ": " + e.what());
    }
}

MaskLayer apply_label_mapping(const Raster& colored, const LabelMapping& mapping) {
    if (colored.channels != 3) throw Error("label mapping input must be a 3-channel raster");
    MaskLayer mask = MaskLayer::make(colored.width, colored.height, mapping.table);
    for (int y = 0; y < colored.height; ++y) {
        for (int x = 0; x < colored.width; ++x) {
            Color color{colored.at(x, y, 0), colored.at(x, y, 1), colored.at(x, y, 2)};
            auto it = mapping.colors.find(color);
            if (it == mapping.colors.end())
                throw Error("label raster color (" + std::to_string(color[0]) + "," +
                            std::to_string(color[1]) + "," + std::to_string(color[2]) +
                            ") at " + std::to_string(x) + "," + std::to_string(y) +
                            " is not in the mapping");
            mask.at(x, y) = it->second;
        }
    }
    return mask;
}

} // namespace shmpipe
