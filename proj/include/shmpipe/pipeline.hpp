#pragma once

#include <map>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "shmpipe/dataset.hpp"
#include "shmpipe/metrics.hpp"
#include "shmpipe/nodes.hpp"

namespace shmpipe {

struct PipelineParams {
    double padding_fraction = 0.10; // defect crop expansion, shared with dataset prep
    int patch_side = 224;
    int min_instance_px = 16;
    Color fill{0, 0, 0}; // background fill after Task 0
    double overlay_alpha = 0.5;
};

/// Node bindings for every stage plus the shared geometry parameters.
struct PipelineConfig {
    std::shared_ptr<SegmentationNode> foreground;
    std::shared_ptr<SegmentationNode> components;
    std::map<DefectClass, std::shared_ptr<SegmentationNode>> defects;
    std::shared_ptr<DamageNode> damage;
    PipelineParams params;

    /// Throws unless all six slots are bound, stages match their slots and
    /// parameters are in range.
    void validate() const;
};

struct InstanceReport {
    int instance_id = 0;
    std::uint8_t component = 0;
    std::uint64_t pixel_count = 0;
    PixelRect bbox;
    RotatedRect rect;
    FeatureVector features; // ratios recomputed from the predicted masks
    DamageState state = DamageState::NoDamage;
};

/// Everything the pipeline concluded about one image.
struct StructureReport {
    std::string image_id;
    MaskLayer foreground;
    MaskLayer components;
    std::map<DefectClass, MaskLayer> defect_layers; // full-frame assembly of crop predictions
    std::vector<InstanceReport> instances;
    Raster overlay;

    nlohmann::ordered_json to_json() const;
};

/// Runs the staged workflow on one image: foreground masking, component
/// segmentation on the masked frame, then per-instance defect detection on
/// padded crops and damage-state assessment on warped square patches.
/// Node failures abort the image with a stage-tagged Error.
StructureReport run_pipeline(const PipelineConfig& cfg, const ImageRecord& record);

Raster render_overlay(const Raster& image, const StructureReport& report, double alpha);

struct EvaluationResult {
    std::map<std::string, MetricsReport> stages; // task0_foreground, task1_*, ...
    std::uint64_t images_evaluated = 0;
    std::vector<std::string> failures; // "id: stage ...: message"

    nlohmann::ordered_json to_json() const;
};

/// Evaluates every stage of the pipeline against a ground-truth manifest.
/// Images run independently (optionally in parallel); one failed image is
/// reported, not fatal. Results do not depend on the job count.
EvaluationResult evaluate_pipeline(const PipelineConfig& cfg, const Manifest& manifest,
                                   int jobs = 1);

/// Deterministic palettes used by the overlay renderer.
Color component_color(std::uint8_t class_code);
Color damage_state_color(DamageState state);
Color defect_color(DefectClass defect);

} // namespace shmpipe
