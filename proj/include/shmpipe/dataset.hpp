#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <utility>
#include <vector>

#include "shmpipe/features.hpp"
#include "shmpipe/geometry.hpp"
#include "shmpipe/manifest.hpp"

namespace shmpipe {

/// Seeded disjoint train/test partition. |test| = round-half-up(N * fraction);
/// both halves keep the input entry order.
std::pair<Manifest, Manifest> split_dataset(const Manifest& manifest, double test_fraction,
                                            std::uint64_t seed);

/// Number of test entries the split will produce for a given size/fraction.
std::size_t split_test_count(std::size_t total, double test_fraction);

/// Per unordered defect pair: how many images label at least one pixel with
/// both classes.
struct CollisionReport {
    std::uint64_t images_scanned = 0;
    // keyed by (lower code, higher code)
    std::map<std::pair<DefectClass, DefectClass>, std::uint64_t> counts;

    std::uint64_t at(DefectClass a, DefectClass b) const;
};

CollisionReport audit_collisions(const Manifest& manifest);

/// Which label family a statistics or node query refers to.
enum class LayerKind { Foreground, Components, Defects, Damage };

std::string_view layer_kind_name(LayerKind kind);

/// Per-class labeled-pixel fractions across a manifest. Fraction summaries
/// run over the images where the class appears; images without a single
/// pixel of it are tallied separately.
struct ClassPixelStats {
    struct PerClass {
        std::uint64_t images_counted = 0;    // images carrying the layer
        std::uint64_t zero_label_images = 0; // of those, images with 0 pixels of the class
        std::uint64_t total_pixels = 0;
        double min_fraction = 0;
        double max_fraction = 0;
        double mean_fraction = 0;
    };
    LayerKind layer = LayerKind::Components;
    std::map<int, PerClass> per_class; // keyed by class code
};

ClassPixelStats class_pixel_stats(const Manifest& manifest, LayerKind layer);

/// foreground = (component code != Background)
MaskLayer foreground_from_components(const MaskLayer& components);

/// Instances of every non-background component class in one mask, re-numbered
/// so ids follow raster-scan order of each instance's first pixel across
/// classes. Ids are assigned before any size filtering, so they are stable
/// against threshold changes.
std::vector<ComponentInstance> component_instances(const MaskLayer& components);

/// Instance bbox grown by padding_fraction per side and clamped to the
/// image. Extraction and inference share this so crop geometry matches.
PixelRect padded_clamped_bbox(const PixelRect& bbox, double padding_fraction, int width,
                              int height);

/// Derives a foreground layer for every entry, writes the masks under
/// out_dir/foreground/ and returns the manifest with the new layer attached.
Manifest build_foreground_masks(const Manifest& manifest, const std::filesystem::path& out_dir);

/// Axis-aligned crop around one component instance for one defect class.
struct DefectCrop {
    std::string source_id;
    int instance_id = 0;
    DefectClass defect = DefectClass::Cracking;
    Raster rgb;
    MaskLayer label; // binary, >= 1 positive pixel
    PixelRect origin;
};

struct ExtractParams {
    double padding_fraction = 0.10; // bbox expansion per side
    int patch_side = 224;
    int min_instance_px = 16; // instances below this are skipped
};

/// One candidate crop per (instance x defect class); candidates whose defect
/// layer has no positive pixel inside the crop are dropped. When the record
/// carries a foreground layer the RGB is background-masked first.
std::vector<DefectCrop> extract_defect_crops(const ImageRecord& record,
                                             const ExtractParams& params = {});

/// Min-area-rect surface patch of one component instance, warped square.
struct SurfacePatch {
    std::string source_id;
    int instance_id = 0;
    std::uint8_t component = 0;
    Raster rgb; // patch_side x patch_side
    DamageState state = DamageState::NoDamage;
    RotatedRect rect;
};

std::vector<SurfacePatch> extract_surface_patches(const ImageRecord& record,
                                                  const ExtractParams& params = {});

/// Pixel-majority damage state over the instance; ties break toward the
/// higher severity.
DamageState majority_damage_state(const ComponentInstance& instance, const MaskLayer& damage);

/// Seeded undersampling: every class is reduced to the minority-class count
/// by sampling without replacement. Returns kept indices, ascending.
std::vector<std::size_t> undersample_indices(std::span<const int> labels, std::uint64_t seed);

std::vector<LabeledVector> balance_by_undersampling(std::span<const LabeledVector> samples,
                                                    std::uint64_t seed);

/// Training data straight from ground-truth layers: one labeled
/// vector per component instance of every entry that carries component and
/// damage masks.
std::vector<LabeledVector> feature_vectors_from_manifest(const Manifest& manifest,
                                                         const ExtractParams& params = {});

} // namespace shmpipe
