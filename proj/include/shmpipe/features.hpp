#pragma once

#include <array>
#include <map>
#include <span>

#include "shmpipe/classes.hpp"
#include "shmpipe/geometry.hpp"

namespace shmpipe {

/// Per-instance feature vector for damage-state classification:
/// the component type code plus four area ratios, each in [0,1].
struct FeatureVector {
    double element_type = 0;      // component class code
    double element_size_ratio = 0; // |instance| / image area
    double crack_ratio = 0;        // cracking pixels inside instance / |instance|
    double rebar_ratio = 0;        // exposed-rebar pixels inside instance / |instance|
    double spalling_ratio = 0;     // spalling pixels inside instance / |instance|

    std::array<double, 5> values() const {
        return {element_type, element_size_ratio, crack_ratio, rebar_ratio, spalling_ratio};
    }
    static FeatureVector from_values(const std::array<double, 5>& v) {
        return {v[0], v[1], v[2], v[3], v[4]};
    }
    bool operator==(const FeatureVector&) const = default;
};

inline constexpr int kFeatureCount = 5;
std::string_view feature_name(int index);

struct LabeledVector {
    FeatureVector features;
    DamageState label = DamageState::NoDamage;
};

/// Computes the feature vector of one component instance from the defect
/// layers aligned with its source image. Layers absent from the map
/// contribute a zero ratio.
FeatureVector build_feature_vector(const ComponentInstance& instance,
                                   std::uint64_t image_area_px,
                                   const std::map<DefectClass, MaskLayer>& defect_masks);

} // namespace shmpipe
