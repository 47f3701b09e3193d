#include "shmpipe/nodes.hpp"

#include "shmpipe/dataset.hpp"
#include "shmpipe/error.hpp"
#include "shmpipe/png_io.hpp"

namespace shmpipe {

std::string_view stage_name(Stage stage) {
    switch (stage) {
        case Stage::Foreground: return "foreground";
        case Stage::Components: return "components";
        case Stage::DefectCracking: return "cracking";
        case Stage::DefectSpalling: return "spalling";
        case Stage::DefectRebar: return "rebar";
        case Stage::DamageState: return "damage";
    }
    return "?";
}

Stage defect_stage(DefectClass c) {
    switch (c) {
        case DefectClass::Cracking: return Stage::DefectCracking;
        case DefectClass::Spalling: return Stage::DefectSpalling;
        case DefectClass::ExposedRebar: return Stage::DefectRebar;
    }
    throw Error("invalid defect class");
}

CodeTable stage_code_table(Stage stage) {
    switch (stage) {
        case Stage::Foreground: return CodeTable::Binary;
        case Stage::Components: return CodeTable::Component;
        case Stage::DefectCracking:
        case Stage::DefectSpalling:
        case Stage::DefectRebar: return CodeTable::Binary;
        case Stage::DamageState: break;
    }
    throw Error("the damage stage answers states, not masks");
}

LabelStore::LabelStore(Manifest manifest) : manifest_(std::move(manifest)) {}

const ImageRecord& LabelStore::record(std::string_view id) const {
    std::lock_guard lock(mutex_);
    auto it = cache_.find(id);
    if (it != cache_.end()) return it->second;
    const ManifestEntry& entry = find_entry(manifest_, id);
    auto [pos, inserted] = cache_.emplace(std::string(id), load_record(manifest_, entry));
    return pos->second;
}

namespace {

bool roi_is_full(const PixelRect& roi, const MaskLayer& mask) {
    return roi.x == 0 && roi.y == 0 && roi.w == mask.width && roi.h == mask.height;
}

MaskLayer crop_to_roi(const MaskLayer& mask, const PixelRect& roi, Stage stage) {
    if (roi.x < 0 || roi.y < 0 || roi.w <= 0 || roi.h <= 0 || roi.x + roi.w > mask.width ||
        roi.y + roi.h > mask.height)
        throw Error(stage_name(stage), "query roi leaves the mask bounds");
    if (roi_is_full(roi, mask)) return mask;
    return crop(mask, roi);
}

class OracleSegNode : public SegmentationNode {
public:
    OracleSegNode(Stage stage, std::shared_ptr<const LabelStore> store)
        : stage_(stage), store_(std::move(store)) {
        if (stage_ == Stage::DamageState)
            throw Error("the damage stage needs a damage node, not a segmentation node");
        if (!store_) throw Error("oracle node needs a label store");
    }

    Stage stage() const override { return stage_; }
    std::string_view kind() const override { return "oracle"; }

    MaskLayer predict(const SegQuery& query) const override {
        const ImageRecord& record = store_->record(query.image_id);
        const MaskLayer* layer = nullptr;
        switch (stage_) {
            case Stage::Foreground:
                layer = record.foreground ? &*record.foreground : nullptr;
                break;
            case Stage::Components:
                layer = record.components ? &*record.components : nullptr;
                break;
            case Stage::DefectCracking:
            case Stage::DefectSpalling:
            case Stage::DefectRebar: {
                DefectClass defect = stage_ == Stage::DefectCracking ? DefectClass::Cracking
                                     : stage_ == Stage::DefectSpalling
                                         ? DefectClass::Spalling
                                         : DefectClass::ExposedRebar;
                auto it = record.defects.find(defect);
                layer = it != record.defects.end() ? &it->second : nullptr;
                break;
            }
            case Stage::DamageState: break;
        }
        if (!layer)
            throw Error(stage_name(stage_),
                        "no ground truth layer for image " + std::string(query.image_id));
        return crop_to_roi(*layer, query.roi, stage_);
    }

private:
    Stage stage_;
    std::shared_ptr<const LabelStore> store_;
};

class OracleDamageNode : public DamageNode {
public:
    explicit OracleDamageNode(std::shared_ptr<const LabelStore> store) : store_(std::move(store)) {
        if (!store_) throw Error("oracle node needs a label store");
    }

    std::string_view kind() const override { return "oracle"; }

    DamageState predict(const DamageQuery& query) const override {
        const ImageRecord& record = store_->record(query.image_id);
        if (!record.damage)
            throw Error(stage_name(Stage::DamageState),
                        "no ground truth layer for image " + std::string(query.image_id));
        return majority_damage_state(query.instance, *record.damage);
    }

private:
    std::shared_ptr<const LabelStore> store_;
};

class ExternalMaskNode : public SegmentationNode {
public:
    ExternalMaskNode(Stage stage, std::filesystem::path dir)
        : stage_(stage), dir_(std::move(dir)) {
        if (stage_ == Stage::DamageState)
            throw Error("the damage stage needs a damage node, not a segmentation node");
    }

    Stage stage() const override { return stage_; }
    std::string_view kind() const override { return "external"; }

    MaskLayer predict(const SegQuery& query) const override {
        std::filesystem::path path =
            dir_ / stage_name(stage_) / (std::string(query.image_id) + ".png");
        if (!std::filesystem::exists(path))
            throw Error(stage_name(stage_),
                        "no mask for image " + std::string(query.image_id) + " at " +
                            path.string());
        MaskLayer mask = read_mask_png(path, stage_code_table(stage_));
        return crop_to_roi(mask, query.roi, stage_);
    }

private:
    Stage stage_;
    std::filesystem::path dir_;
};

class ConstantSegNode : public SegmentationNode {
public:
    ConstantSegNode(Stage stage, std::uint8_t code) : stage_(stage), code_(code) {
        if (stage_ == Stage::DamageState)
            throw Error("the damage stage needs a damage node, not a segmentation node");
        if (code > code_table_max(stage_code_table(stage)))
            throw Error("constant code " + std::to_string(code) + " outside the " +
                        std::string(code_table_name(stage_code_table(stage))) + " table");
    }

    Stage stage() const override { return stage_; }
    std::string_view kind() const override { return "constant"; }

    MaskLayer predict(const SegQuery& query) const override {
        if (query.roi.w <= 0 || query.roi.h <= 0)
            throw Error(stage_name(stage_), "query roi is empty");
        return MaskLayer::make(query.roi.w, query.roi.h, stage_code_table(stage_), code_);
    }

private:
    Stage stage_;
    std::uint8_t code_;
};

class ConstantDamageNode : public DamageNode {
public:
    explicit ConstantDamageNode(DamageState state) : state_(state) {}
    std::string_view kind() const override { return "constant"; }
    DamageState predict(const DamageQuery&) const override { return state_; }

private:
    DamageState state_;
};

class ClassifierDamageNode : public DamageNode {
public:
    explicit ClassifierDamageNode(ShallowModel model)
        : model_(std::move(model)), kind_("classifier(" + std::string(model_.kind()) + ")") {
        if (model_.kind() == "unfitted") throw Error("classifier node needs a fitted model");
    }

    std::string_view kind() const override { return kind_; }
    DamageState predict(const DamageQuery& query) const override {
        return model_.predict(query.features);
    }

private:
    ShallowModel model_;
    std::string kind_;
};

} // namespace

std::shared_ptr<SegmentationNode> oracle_node(Stage stage,
                                              std::shared_ptr<const LabelStore> store) {
    return std::make_shared<OracleSegNode>(stage, std::move(store));
}

std::shared_ptr<DamageNode> oracle_damage_node(std::shared_ptr<const LabelStore> store) {
    return std::make_shared<OracleDamageNode>(std::move(store));
}

std::shared_ptr<SegmentationNode> external_mask_node(Stage stage, std::filesystem::path dir) {
    return std::make_shared<ExternalMaskNode>(stage, std::move(dir));
}

std::shared_ptr<SegmentationNode> constant_node(Stage stage, std::uint8_t code) {
    return std::make_shared<ConstantSegNode>(stage, code);
}

std::shared_ptr<DamageNode> constant_damage_node(DamageState state) {
    return std::make_shared<ConstantDamageNode>(state);
}

std::shared_ptr<DamageNode> classifier_damage_node(ShallowModel model) {
    return std::make_shared<ClassifierDamageNode>(std::move(model));
}

} // namespace shmpipe
