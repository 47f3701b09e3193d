#pragma once

#include <array>
#include <filesystem>
#include <string>
#include <vector>

#include "shmpipe/dataset.hpp"
#include "shmpipe/manifest.hpp"

namespace shmpipe {

/// Scene parameters for the miniature synthetic dataset. Components are
/// axis-aligned blocks placed on a cell grid with gaps, so the planted
/// inventory doubles as connected-component ground truth.
struct FixtureSpec {
    int image_count = 12;
    int width = 64;
    int height = 64;
    int grid_cols = 3;
    int grid_rows = 3;
    double cell_fill_prob = 0.8;
    int min_component_side = 8;
    int max_component_side = 16;
    double crack_prob = 0.5;
    double spall_prob = 0.45;
    double rebar_prob = 0.2;
    /// When a component has both a crack and a spall, probability that they
    /// are planted overlapping (a label collision).
    double collide_prob = 0.5;
    /// Damage rule threshold: spalling_ratio >= this reads as Moderate.
    double spall_moderate_threshold = 0.08;
};

/// The rule the generator uses to assign damage states from planted defect
/// ratios. Exposed so tests can treat it as the classification oracle.
DamageState fixture_damage_rule(const FeatureVector& fv, double spall_moderate_threshold);

struct PlantedInstance {
    int instance_id = 0;
    std::uint8_t component = 0;
    PixelRect rect;
    std::uint64_t pixel_count = 0;
    std::array<std::uint64_t, 3> defect_pixels{}; // cracking, spalling, rebar
    DamageState state = DamageState::NoDamage;
};

struct PlantedImage {
    std::string id;
    std::vector<PlantedInstance> instances;
    /// 1 where the image holds >= 1 pixel labeled with both classes of the
    /// pair; pairs ordered (crack,spall), (crack,rebar), (spall,rebar).
    std::array<int, 3> collisions{};
    std::array<std::uint64_t, kComponentClassCount> class_pixels{};
    std::array<std::uint64_t, kDamageStateCount> damage_pixels{};
    std::uint64_t foreground_pixels = 0;
};

/// Construction-time ground truth, written next to the fixture manifest.
struct FixtureSidecar {
    std::uint64_t seed = 0;
    FixtureSpec spec;
    std::vector<PlantedImage> images;
};

struct FixtureResult {
    Manifest manifest;
    std::filesystem::path manifest_path;
    std::filesystem::path sidecar_path;
};

/// Writes the miniature dataset (RGB + every mask layer + manifest + sidecar)
/// under out_dir. Deterministic for a given (spec, seed).
FixtureResult generate_fixture_dataset(const FixtureSpec& spec, std::uint64_t seed,
                                       const std::filesystem::path& out_dir);

FixtureSidecar load_sidecar(const std::filesystem::path& path);

} // namespace shmpipe
