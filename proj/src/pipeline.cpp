#include "shmpipe/pipeline.hpp"

#include <algorithm>
#include <cmath>

#include "shmpipe/error.hpp"
#include "shmpipe/parallel.hpp"

namespace shmpipe {

namespace {

void require_slot(const void* node, std::string_view slot) {
    if (!node) throw Error("pipeline config: no node bound for stage " + std::string(slot));
}

void require_stage(const SegmentationNode& node, Stage expected) {
    if (node.stage() != expected)
        throw Error("pipeline config: a " + std::string(stage_name(node.stage())) +
                    " node is bound to the " + std::string(stage_name(expected)) + " slot");
}

// Runs one node call with a uniform stage tag on whatever it throws.
template <class Fn>
auto run_stage(Stage stage, Fn&& fn) {
    try {
        return fn();
    } catch (const Error& e) {
        if (!e.stage().empty()) throw;
        throw Error(stage_name(stage), e.what());
    } catch (const std::exception& e) {
        throw Error(stage_name(stage), e.what());
    }
}

void check_mask_shape(const MaskLayer& mask, const PixelRect& roi, Stage stage) {
    if (mask.width != roi.w || mask.height != roi.h)
        throw Error(stage_name(stage), "node returned a mask of the wrong size");
    if (mask.table != stage_code_table(stage))
        throw Error(stage_name(stage), "node returned a mask of the wrong code table");
    if (!mask.codes_valid())
        throw Error(stage_name(stage), "node returned out-of-table codes");
}

} // namespace

void PipelineConfig::validate() const {
    require_slot(foreground.get(), stage_name(Stage::Foreground));
    require_slot(components.get(), stage_name(Stage::Components));
    for (DefectClass d : kDefectClasses) {
        auto it = defects.find(d);
        require_slot(it == defects.end() ? nullptr : it->second.get(),
                     stage_name(defect_stage(d)));
    }
    require_slot(damage.get(), stage_name(Stage::DamageState));

    require_stage(*foreground, Stage::Foreground);
    require_stage(*components, Stage::Components);
    for (const auto& [d, node] : defects) require_stage(*node, defect_stage(d));

    if (!(params.padding_fraction >= 0) || params.padding_fraction > 1)
        throw Error("pipeline config: padding fraction must lie in [0, 1]");
    if (params.patch_side <= 0) throw Error("pipeline config: patch side must be positive");
    if (params.min_instance_px < 1)
        throw Error("pipeline config: minimum instance size must be at least 1");
    if (!(params.overlay_alpha >= 0) || params.overlay_alpha > 1)
        throw Error("pipeline config: overlay alpha must lie in [0, 1]");
}

StructureReport run_pipeline(const PipelineConfig& cfg, const ImageRecord& record) {
    cfg.validate();
    const int width = record.rgb.width;
    const int height = record.rgb.height;
    const PixelRect full{0, 0, width, height};

    StructureReport report;
    report.image_id = record.id;

    report.foreground = run_stage(Stage::Foreground, [&] {
        return cfg.foreground->predict({record.id, record.rgb, full});
    });
    check_mask_shape(report.foreground, full, Stage::Foreground);

    Raster masked = apply_foreground_mask(record.rgb, report.foreground, cfg.params.fill);

    report.components = run_stage(Stage::Components, [&] {
        return cfg.components->predict({record.id, masked, full});
    });
    check_mask_shape(report.components, full, Stage::Components);

    for (DefectClass d : kDefectClasses)
        report.defect_layers.emplace(d, MaskLayer::make(width, height, CodeTable::Binary));

    std::vector<ComponentInstance> instances = component_instances(report.components);
    std::vector<const ComponentInstance*> kept;
    for (const auto& instance : instances)
        if (instance.pixels.size() >= static_cast<std::size_t>(cfg.params.min_instance_px))
            kept.push_back(&instance);

    // Defect passes run for every instance first so the feature ratios are
    // taken from the finished full-frame layers.
    for (const ComponentInstance* instance : kept) {
        PixelRect roi =
            padded_clamped_bbox(instance->bbox, cfg.params.padding_fraction, width, height);
        Raster view = crop(masked, roi);
        for (DefectClass d : kDefectClasses) {
            Stage stage = defect_stage(d);
            MaskLayer pred = run_stage(stage, [&] {
                return cfg.defects.at(d)->predict({record.id, view, roi});
            });
            check_mask_shape(pred, roi, stage);
            MaskLayer& layer = report.defect_layers.at(d);
            for (int y = 0; y < roi.h; ++y)
                for (int x = 0; x < roi.w; ++x)
                    if (pred.at(x, y) != 0) layer.at(roi.x + x, roi.y + y) = 1;
        }
    }

    const std::uint64_t area = record.rgb.pixel_count();
    for (const ComponentInstance* instance : kept) {
        InstanceReport entry;
        entry.instance_id = instance->id;
        entry.component = instance->class_code;
        entry.pixel_count = instance->pixels.size();
        entry.bbox = instance->bbox;
        entry.rect = min_area_rect(instance->pixels);
        entry.features = build_feature_vector(*instance, area, report.defect_layers);

        Raster patch = warp_to_square(masked, entry.rect, cfg.params.patch_side);
        entry.state = run_stage(Stage::DamageState, [&] {
            return cfg.damage->predict({record.id, *instance, patch, entry.features});
        });
        report.instances.push_back(std::move(entry));
    }

    report.overlay = render_overlay(record.rgb, report, cfg.params.overlay_alpha);
    return report;
}

Color component_color(std::uint8_t class_code) {
    static constexpr std::array<Color, kComponentClassCount> palette = {{
        {0, 0, 0},       // background
        {205, 133, 63},  // wall
        {70, 130, 180},  // beam
        {178, 34, 34},   // column
        {255, 215, 0},   // window frame
        {135, 206, 235}, // window pane
        {147, 112, 219}, // balcony
        {60, 179, 113},  // slab
    }};
    return palette[class_code % kComponentClassCount];
}

Color damage_state_color(DamageState state) {
    switch (state) {
        case DamageState::NoDamage: return {46, 204, 64};
        case DamageState::Light: return {255, 220, 0};
        case DamageState::Moderate: return {255, 133, 27};
        case DamageState::Severe: return {255, 65, 54};
    }
    return {255, 255, 255};
}

Color defect_color(DefectClass defect) {
    switch (defect) {
        case DefectClass::Cracking: return {255, 0, 255};
        case DefectClass::Spalling: return {0, 255, 255};
        case DefectClass::ExposedRebar: return {255, 69, 0};
    }
    return {255, 255, 255};
}

namespace {

void blend(Raster& image, int x, int y, const Color& color, double alpha) {
    for (int ch = 0; ch < image.channels; ++ch) {
        double v = (1 - alpha) * image.at(x, y, ch) +
                   alpha * color[static_cast<std::size_t>(ch % 3)];
        image.at(x, y, ch) = static_cast<std::uint8_t>(std::clamp(std::lround(v), 0L, 255L));
    }
}

} // namespace

Raster render_overlay(const Raster& image, const StructureReport& report, double alpha) {
    Raster out = image;
    if (alpha <= 0 || report.instances.empty()) return out;

    auto instances = component_instances(report.components);
    for (const auto& entry : report.instances) {
        if (entry.instance_id < 0 || entry.instance_id >= static_cast<int>(instances.size()))
            continue;
        Color tint = component_color(entry.component);
        for (const auto& p : instances[static_cast<std::size_t>(entry.instance_id)].pixels)
            blend(out, p.x, p.y, tint, alpha);
    }
    for (const auto& [defect, layer] : report.defect_layers) {
        Color tint = defect_color(defect);
        for (int y = 0; y < layer.height; ++y)
            for (int x = 0; x < layer.width; ++x)
                if (layer.at(x, y) != 0) blend(out, x, y, tint, alpha);
    }
    // state badge in the bbox corner
    for (const auto& entry : report.instances) {
        Color badge = damage_state_color(entry.state);
        int side = std::min({5, entry.bbox.w, entry.bbox.h});
        for (int dy = 0; dy < side; ++dy)
            for (int dx = 0; dx < side; ++dx)
                blend(out, entry.bbox.x + dx, entry.bbox.y + dy, badge, alpha);
    }
    return out;
}

nlohmann::ordered_json StructureReport::to_json() const {
    nlohmann::ordered_json doc;
    doc["image_id"] = image_id;
    doc["foreground_pixels"] = foreground.count(1);
    nlohmann::ordered_json class_pixels = nlohmann::ordered_json::object();
    for (int c = 1; c < kComponentClassCount; ++c) {
        std::uint64_t n = components.count(static_cast<std::uint8_t>(c));
        if (n > 0) class_pixels[std::string(class_name_in_table(CodeTable::Component, c))] = n;
    }
    doc["component_pixels"] = std::move(class_pixels);
    nlohmann::ordered_json defect_pixels = nlohmann::ordered_json::object();
    for (const auto& [defect, layer] : defect_layers)
        defect_pixels[std::string(name_of(defect))] = layer.count(1);
    doc["defect_pixels"] = std::move(defect_pixels);

    nlohmann::ordered_json instances_doc = nlohmann::ordered_json::array();
    for (const auto& entry : instances) {
        nlohmann::ordered_json node;
        node["instance_id"] = entry.instance_id;
        node["component"] =
            std::string(class_name_in_table(CodeTable::Component, entry.component));
        node["pixel_count"] = entry.pixel_count;
        node["bbox"] = {entry.bbox.x, entry.bbox.y, entry.bbox.w, entry.bbox.h};
        node["rect"] = {{"cx", entry.rect.cx},
                        {"cy", entry.rect.cy},
                        {"w", entry.rect.w},
                        {"h", entry.rect.h},
                        {"angle_deg", entry.rect.angle_deg}};
        nlohmann::ordered_json features = nlohmann::ordered_json::object();
        auto values = entry.features.values();
        for (int f = 0; f < kFeatureCount; ++f)
            features[std::string(feature_name(f))] = values[static_cast<std::size_t>(f)];
        node["features"] = std::move(features);
        node["state"] = std::string(name_of(entry.state));
        instances_doc.push_back(std::move(node));
    }
    doc["instances"] = std::move(instances_doc);
    return doc;
}

namespace {

struct ImageTally {
    std::map<std::string, PixelConfusion> confusions;
    std::vector<std::pair<DamageState, DamageState>> damage_pairs; // (gt, pred)
    bool ok = false;
    std::string failure;
};

ImageTally tally_image(const PipelineConfig& cfg, const Manifest& manifest,
                       const ManifestEntry& entry) {
    ImageTally tally;
    try {
        ImageRecord record = load_record(manifest, entry);
        StructureReport report = run_pipeline(cfg, record);

        auto require_gt = [&](bool present, std::string_view what) {
            if (!present)
                throw Error("image " + entry.id + " carries no " + std::string(what) +
                            " ground truth");
        };

        require_gt(record.foreground.has_value(), "foreground");
        PixelConfusion fg = PixelConfusion::make(CodeTable::Binary);
        fg.add(*record.foreground, report.foreground);
        tally.confusions.emplace("task0_foreground", std::move(fg));

        for (DefectClass d : kDefectClasses) {
            auto it = record.defects.find(d);
            require_gt(it != record.defects.end(), name_of(d));
            PixelConfusion conf = PixelConfusion::make(CodeTable::Binary);
            conf.add(it->second, report.defect_layers.at(d));
            tally.confusions.emplace("task1_" + std::string(stage_name(defect_stage(d))),
                                     std::move(conf));
        }

        require_gt(record.components.has_value(), "component");
        PixelConfusion comp = PixelConfusion::make(CodeTable::Component);
        comp.add(*record.components, report.components);
        tally.confusions.emplace("task2_components", std::move(comp));

        require_gt(record.damage.has_value(), "damage");
        auto predicted_instances = component_instances(report.components);
        for (const auto& inst : report.instances) {
            const auto& pixels = predicted_instances[static_cast<std::size_t>(inst.instance_id)];
            DamageState gt_state = majority_damage_state(pixels, *record.damage);
            tally.damage_pairs.emplace_back(gt_state, inst.state);
        }
        tally.ok = true;
    } catch (const std::exception& e) {
        tally.failure = entry.id + ": " + e.what();
    }
    return tally;
}

} // namespace

EvaluationResult evaluate_pipeline(const PipelineConfig& cfg, const Manifest& manifest,
                                   int jobs) {
    cfg.validate();
    std::vector<ImageTally> tallies(manifest.entries.size());
    parallel_for(manifest.entries.size(), jobs,
                 [&](std::size_t i) { tallies[i] = tally_image(cfg, manifest, manifest.entries[i]); });

    EvaluationResult result;
    std::map<std::string, PixelConfusion> merged;
    std::vector<DamageState> gts, preds;
    for (auto& tally : tallies) {
        if (!tally.ok) {
            result.failures.push_back(tally.failure);
            continue;
        }
        ++result.images_evaluated;
        for (auto& [key, conf] : tally.confusions) {
            auto it = merged.find(key);
            if (it == merged.end())
                merged.emplace(key, std::move(conf));
            else
                it->second.merge(conf);
        }
        for (const auto& [gt, pred] : tally.damage_pairs) {
            gts.push_back(gt);
            preds.push_back(pred);
        }
    }
    for (const auto& [key, conf] : merged) result.stages.emplace(key, segmentation_report(conf));
    if (!preds.empty())
        result.stages.emplace("task3_damage", classification_metrics(preds, gts));
    return result;
}

nlohmann::ordered_json EvaluationResult::to_json() const {
    nlohmann::ordered_json doc;
    doc["images_evaluated"] = images_evaluated;
    doc["failures"] = failures;
    nlohmann::ordered_json stages_doc = nlohmann::ordered_json::object();
    for (const auto& [key, report] : stages) stages_doc[key] = report.to_json();
    doc["stages"] = std::move(stages_doc);
    return doc;
}

} // namespace shmpipe
