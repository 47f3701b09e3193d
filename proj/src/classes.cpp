#include "shmpipe/classes.hpp"

namespace shmpipe {

namespace {

constexpr std::array<std::string_view, kComponentClassCount> kComponentNames = {
    "background", "wall", "beam", "column", "window_frame", "window_pane", "balcony", "slab"};

constexpr std::array<std::string_view, kComponentClassCount> kComponentDisplay = {
    "Background", "Wall",       "Beam",    "Column",
    "Window frame", "Window pane", "Balcony", "Slab"};

constexpr std::array<std::string_view, 3> kDefectNames = {"cracking", "spalling", "exposed_rebar"};
constexpr std::array<std::string_view, 3> kDefectDisplay = {"Cracking", "Spalling", "Exposed rebar"};

constexpr std::array<std::string_view, kDamageStateCount> kDamageNames = {"no_damage", "light",
                                                                          "moderate", "severe"};
constexpr std::array<std::string_view, kDamageStateCount> kDamageDisplay = {
    "No damage", "Light damage", "Moderate damage", "Severe damage"};

} // namespace

std::string_view name_of(ComponentClass c) { return kComponentNames[code_of(c)]; }
std::string_view name_of(DefectClass c) { return kDefectNames[code_of(c) - 1]; }
std::string_view name_of(DamageState s) { return kDamageNames[code_of(s)]; }

std::string_view display_name(ComponentClass c) { return kComponentDisplay[code_of(c)]; }
std::string_view display_name(DefectClass c) { return kDefectDisplay[code_of(c) - 1]; }
std::string_view display_name(DamageState s) { return kDamageDisplay[code_of(s)]; }

std::optional<ComponentClass> component_class_from_name(std::string_view name) {
    for (int i = 0; i < kComponentClassCount; ++i)
        if (kComponentNames[i] == name) return static_cast<ComponentClass>(i);
    return std::nullopt;
}

std::optional<DefectClass> defect_class_from_name(std::string_view name) {
    // "rebar" is the manifest key for the exposed-rebar layer
    if (name == "rebar") return DefectClass::ExposedRebar;
    for (int i = 0; i < 3; ++i)
        if (kDefectNames[i] == name) return static_cast<DefectClass>(i + 1);
    return std::nullopt;
}

std::optional<DamageState> damage_state_from_name(std::string_view name) {
    for (int i = 0; i < kDamageStateCount; ++i)
        if (kDamageNames[i] == name) return static_cast<DamageState>(i);
    return std::nullopt;
}

std::optional<ComponentClass> component_class_from_code(std::uint8_t code) {
    if (code >= kComponentClassCount) return std::nullopt;
    return static_cast<ComponentClass>(code);
}

std::optional<DefectClass> defect_class_from_code(std::uint8_t code) {
    if (code < 1 || code > 3) return std::nullopt;
    return static_cast<DefectClass>(code);
}

std::optional<DamageState> damage_state_from_code(std::uint8_t code) {
    if (code >= kDamageStateCount) return std::nullopt;
    return static_cast<DamageState>(code);
}

} // namespace shmpipe
