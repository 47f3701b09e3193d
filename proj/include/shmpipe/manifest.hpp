#pragma once

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "shmpipe/classes.hpp"
#include "shmpipe/raster.hpp"

namespace shmpipe {

/// One dataset entry: the RGB frame plus whichever label layers exist.
struct ManifestEntry {
    std::string id;
    std::filesystem::path rgb;
    std::optional<std::filesystem::path> components;
    std::map<DefectClass, std::filesystem::path> defects;
    std::optional<std::filesystem::path> damage;
    std::optional<std::filesystem::path> foreground;
};

enum class SplitTag { Unsplit, Train, Test };

std::string_view split_tag_name(SplitTag tag);
std::optional<SplitTag> split_tag_from_name(std::string_view name);

struct Manifest {
    std::vector<ManifestEntry> entries;
    SplitTag split = SplitTag::Unsplit;
    /// Directory entry paths are resolved against (the manifest's directory).
    std::filesystem::path base_dir;

    std::filesystem::path resolve(const std::filesystem::path& p) const;
};

/// Loads and validates a manifest document: rejects duplicate ids, missing
/// layer files and masks whose PNG header size differs from the RGB frame.
Manifest load_manifest(const std::filesystem::path& path);

/// Writes the manifest as JSON; entry paths are rewritten relative to the
/// target directory where possible. Output is byte-stable.
void save_manifest(const Manifest& manifest, const std::filesystem::path& path);

/// All label layers of one image decoded into memory.
struct ImageRecord {
    std::string id;
    Raster rgb;
    std::optional<MaskLayer> components;
    std::map<DefectClass, MaskLayer> defects;
    std::optional<MaskLayer> damage;
    std::optional<MaskLayer> foreground;
};

/// Decodes every layer of `entry`, validating channel counts, dimensions and
/// code tables.
ImageRecord load_record(const Manifest& manifest, const ManifestEntry& entry);

const ManifestEntry& find_entry(const Manifest& manifest, std::string_view id);

} // namespace shmpipe
