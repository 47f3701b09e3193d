#pragma once

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <string>

#include "shmpipe/features.hpp"
#include "shmpipe/manifest.hpp"
#include "shmpipe/shallow.hpp"

namespace shmpipe {

/// Pipeline stages a model node can serve.
enum class Stage {
    Foreground,
    Components,
    DefectCracking,
    DefectSpalling,
    DefectRebar,
    DamageState,
};

std::string_view stage_name(Stage stage);
Stage defect_stage(DefectClass c);
CodeTable stage_code_table(Stage stage); // segmentation stages only

/// One segmentation query: the stage input raster and where it sits in the
/// source image (full frame for Task 0/2, a component crop for Task 1).
struct SegQuery {
    std::string_view image_id;
    const Raster& raster;
    PixelRect roi;
};

/// Swappable segmentation model slot. Implementations must be safe to share
/// across worker threads.
class SegmentationNode {
public:
    virtual ~SegmentationNode() = default;
    virtual Stage stage() const = 0;
    virtual std::string_view kind() const = 0;
    /// Returns a mask of the query's roi extent in the stage's code table.
    virtual MaskLayer predict(const SegQuery& query) const = 0;
};

struct DamageQuery {
    std::string_view image_id;
    const ComponentInstance& instance; // pixels in source coordinates
    const Raster& patch;               // warped square surface patch
    FeatureVector features;
};

class DamageNode {
public:
    virtual ~DamageNode() = default;
    virtual std::string_view kind() const = 0;
    virtual DamageState predict(const DamageQuery& query) const = 0;
};

/// Ground-truth provider backed by a manifest; records decode lazily and are
/// cached. Thread-safe.
class LabelStore {
public:
    explicit LabelStore(Manifest manifest);
    const ImageRecord& record(std::string_view id) const;
    const Manifest& manifest() const { return manifest_; }

private:
    Manifest manifest_;
    mutable std::map<std::string, ImageRecord, std::less<>> cache_;
    mutable std::mutex mutex_;
};

/// Node that answers every query with the stored ground truth.
std::shared_ptr<SegmentationNode> oracle_node(Stage stage, std::shared_ptr<const LabelStore> store);
std::shared_ptr<DamageNode> oracle_damage_node(std::shared_ptr<const LabelStore> store);

/// Adapter for precomputed masks from an external model, laid out as
/// <dir>/<stage>/<image_id>.png. Masks are validated per query.
std::shared_ptr<SegmentationNode> external_mask_node(Stage stage, std::filesystem::path dir);

/// Degenerate node predicting one code everywhere (diagnostics, baselines).
std::shared_ptr<SegmentationNode> constant_node(Stage stage, std::uint8_t code);
std::shared_ptr<DamageNode> constant_damage_node(DamageState state);

/// Damage-state node backed by a fitted shallow classifier over instance
/// feature vectors.
std::shared_ptr<DamageNode> classifier_damage_node(ShallowModel model);

} // namespace shmpipe
