#include "shmpipe/manifest.hpp"

#include <fstream>
#include <set>

#include "json.hpp"
#include "shmpipe/error.hpp"
#include "shmpipe/png_io.hpp"

namespace shmpipe {

namespace {

using ordered_json = nlohmann::ordered_json;

// Manifest key for each defect layer. "rebar" is the document spelling of
// the exposed-rebar class.
std::string_view manifest_defect_key(DefectClass defect) {
    switch (defect) {
        case DefectClass::Cracking: return "cracking";
        case DefectClass::Spalling: return "spalling";
        case DefectClass::ExposedRebar: return "rebar";
    }
    throw Error("invalid defect class");
}

DefectClass defect_from_manifest_key(std::string_view key) {
    for (DefectClass d : kDefectClasses)
        if (manifest_defect_key(d) == key) return d;
    throw Error("unknown defect layer key: " + std::string(key));
}

void check_layer(const Manifest& manifest, const std::string& id,
                 const std::filesystem::path& layer, PngSize rgb_size) {
    auto resolved = manifest.resolve(layer);
    if (!std::filesystem::exists(resolved))
        throw Error("image " + id + ": missing layer " + resolved.string());
    PngSize size = probe_png_size(resolved);
    if (size.width != rgb_size.width || size.height != rgb_size.height)
        throw Error("image " + id + ": layer " + resolved.string() + " is " +
                    std::to_string(size.width) + "x" + std::to_string(size.height) +
                    ", frame is " + std::to_string(rgb_size.width) + "x" +
                    std::to_string(rgb_size.height));
}

} // namespace

std::string_view split_tag_name(SplitTag tag) {
    switch (tag) {
        case SplitTag::Unsplit: return "unsplit";
        case SplitTag::Train: return "train";
        case SplitTag::Test: return "test";
    }
    throw Error("invalid split tag");
}

std::optional<SplitTag> split_tag_from_name(std::string_view name) {
    if (name == "unsplit") return SplitTag::Unsplit;
    if (name == "train") return SplitTag::Train;
    if (name == "test") return SplitTag::Test;
    return std::nullopt;
}

std::filesystem::path Manifest::resolve(const std::filesystem::path& p) const {
    if (p.is_absolute()) return p;
    return base_dir / p;
}

Manifest load_manifest(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open manifest " + path.string());
    ordered_json doc;
    try {
        doc = ordered_json::parse(in);
    } catch (const ordered_json::exception& e) {
        throw Error("manifest " + path.string() + ": " + e.what());
    }

    Manifest manifest;
    manifest.base_dir = path.parent_path();
    try {
        if (doc.contains("split")) {
            auto name = doc.at("split").get<std::string>();
            auto tag = split_tag_from_name(name);
            if (!tag) throw Error("manifest " + path.string() + ": unknown split tag " + name);
            manifest.split = *tag;
        }
        for (const auto& item : doc.at("entries")) {
            ManifestEntry entry;
            entry.id = item.at("id").get<std::string>();
            entry.rgb = std::filesystem::path(item.at("rgb").get<std::string>());
            if (item.contains("components"))
                entry.components = std::filesystem::path(item.at("components").get<std::string>());
            if (item.contains("defects"))
                for (const auto& [key, value] : item.at("defects").items())
                    entry.defects[defect_from_manifest_key(key)] =
                        std::filesystem::path(value.get<std::string>());
            if (item.contains("damage"))
                entry.damage = std::filesystem::path(item.at("damage").get<std::string>());
            if (item.contains("foreground"))
                entry.foreground = std::filesystem::path(item.at("foreground").get<std::string>());
            manifest.entries.push_back(std::move(entry));
        }
    } catch (const ordered_json::exception& e) {
        throw Error("manifest " + path.string() + ": " + e.what());
    }

    std::set<std::string> seen;
    for (const auto& entry : manifest.entries) {
        if (entry.id.empty()) throw Error("manifest " + path.string() + ": empty image id");
        if (!seen.insert(entry.id).second)
            throw Error("manifest " + path.string() + ": duplicate image id " + entry.id);
        auto rgb_path = manifest.resolve(entry.rgb);
        if (!std::filesystem::exists(rgb_path))
            throw Error("image " + entry.id + ": missing layer " + rgb_path.string());
        PngSize rgb_size = probe_png_size(rgb_path);
        if (entry.components) check_layer(manifest, entry.id, *entry.components, rgb_size);
        for (const auto& [defect, layer] : entry.defects)
            check_layer(manifest, entry.id, layer, rgb_size);
        if (entry.damage) check_layer(manifest, entry.id, *entry.damage, rgb_size);
        if (entry.foreground) check_layer(manifest, entry.id, *entry.foreground, rgb_size);
    }
    return manifest;
}

namespace {

std::string portable_path(const Manifest& manifest, const std::filesystem::path& p,
                          const std::filesystem::path& target_dir) {
    auto resolved = std::filesystem::absolute(manifest.resolve(p)).lexically_normal();
    auto rel = resolved.lexically_relative(target_dir);
    if (rel.empty()) return resolved.generic_string();
    return rel.generic_string();
}

} // namespace

void save_manifest(const Manifest& manifest, const std::filesystem::path& path) {
    auto target_dir = std::filesystem::absolute(path).lexically_normal().parent_path();
    ordered_json doc;
    doc["entries"] = ordered_json::array();
    for (const auto& entry : manifest.entries) {
        ordered_json item;
        item["id"] = entry.id;
        item["rgb"] = portable_path(manifest, entry.rgb, target_dir);
        if (entry.components)
            item["components"] = portable_path(manifest, *entry.components, target_dir);
        ordered_json defects = ordered_json::object();
        for (const auto& [defect, layer] : entry.defects)
            defects[std::string(manifest_defect_key(defect))] =
                portable_path(manifest, layer, target_dir);
        item["defects"] = std::move(defects);
        if (entry.damage) item["damage"] = portable_path(manifest, *entry.damage, target_dir);
        if (entry.foreground)
            item["foreground"] = portable_path(manifest, *entry.foreground, target_dir);
        doc["entries"].push_back(std::move(item));
    }
    doc["split"] = std::string(split_tag_name(manifest.split));

    if (auto parent = path.parent_path(); !parent.empty())
        std::filesystem::create_directories(parent);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write manifest " + path.string());
    out << doc.dump(2) << '\n';
    if (!out) throw Error("cannot write manifest " + path.string());
}

ImageRecord load_record(const Manifest& manifest, const ManifestEntry& entry) {
    ImageRecord record;
    record.id = entry.id;
    record.rgb = read_png(manifest.resolve(entry.rgb));
    if (record.rgb.channels != 3)
        throw Error("image " + entry.id + ": frame must be a 3-channel PNG");

    auto load_layer = [&](const std::filesystem::path& p, CodeTable table) {
        MaskLayer mask = read_mask_png(manifest.resolve(p), table);
        if (mask.width != record.rgb.width || mask.height != record.rgb.height)
            throw Error("image " + entry.id + ": layer " + manifest.resolve(p).string() +
                        " size differs from frame");
        return mask;
    };

    if (entry.components) record.components = load_layer(*entry.components, CodeTable::Component);
    for (const auto& [defect, layer] : entry.defects)
        record.defects.emplace(defect, load_layer(layer, CodeTable::Binary));
    if (entry.damage) record.damage = load_layer(*entry.damage, CodeTable::Damage);
    if (entry.foreground) record.foreground = load_layer(*entry.foreground, CodeTable::Binary);
    return record;
}

const ManifestEntry& find_entry(const Manifest& manifest, std::string_view id) {
    for (const auto& entry : manifest.entries)
        if (entry.id == id) return entry;
    throw Error("unknown image id: " + std::string(id));
}

} // namespace shmpipe
