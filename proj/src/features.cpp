#include "shmpipe/features.hpp"

#include "shmpipe/error.hpp"

namespace shmpipe {

std::string_view feature_name(int index) {
    switch (index) {
        case 0: return "element_type";
        case 1: return "element_size_ratio";
        case 2: return "crack_ratio";
        case 3: return "rebar_ratio";
        case 4: return "spalling_ratio";
        default: throw Error("feature index out of range");
    }
}

FeatureVector build_feature_vector(const ComponentInstance& instance,
                                   std::uint64_t image_area_px,
                                   const std::map<DefectClass, MaskLayer>& defect_masks) {
    if (instance.pixels.empty()) throw Error("cannot featurize an empty instance");
    if (image_area_px == 0) throw Error("image area must be positive");

    FeatureVector fv;
    fv.element_type = static_cast<double>(instance.class_code);
    const double size = static_cast<double>(instance.pixels.size());
    fv.element_size_ratio = size / static_cast<double>(image_area_px);

    auto defect_ratio = [&](DefectClass defect) -> double {
        auto it = defect_masks.find(defect);
        if (it == defect_masks.end()) return 0.0;
        const MaskLayer& layer = it->second;
        std::uint64_t hits = 0;
        for (const auto& p : instance.pixels)
            if (layer.at(p.x, p.y) != 0) ++hits;
        return static_cast<double>(hits) / size;
    };
    fv.crack_ratio = defect_ratio(DefectClass::Cracking);
    fv.rebar_ratio = defect_ratio(DefectClass::ExposedRebar);
    fv.spalling_ratio = defect_ratio(DefectClass::Spalling);
    return fv;
}

} // namespace shmpipe
