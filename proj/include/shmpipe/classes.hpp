#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string_view>

namespace shmpipe {

/// Structure component classes. Codes are the single-channel label values.
enum class ComponentClass : std::uint8_t {
    Background = 0,
    Wall = 1,
    Beam = 2,
    Column = 3,
    WindowFrame = 4,
    WindowPane = 5,
    Balcony = 6,
    Slab = 7,
};

inline constexpr int kComponentClassCount = 8;

/// Surface defect classes. Each defect lives in its own binary mask layer;
/// the same pixel may carry several defects across layers.
enum class DefectClass : std::uint8_t {
    Cracking = 1,
    Spalling = 2,
    ExposedRebar = 3,
};

inline constexpr std::array<DefectClass, 3> kDefectClasses = {
    DefectClass::Cracking, DefectClass::Spalling, DefectClass::ExposedRebar};

/// Ordinal damage condition of a component. Order encodes severity and is
/// used for tie-breaking throughout.
enum class DamageState : std::uint8_t {
    NoDamage = 0,
    Light = 1,
    Moderate = 2,
    Severe = 3,
};

inline constexpr int kDamageStateCount = 4;

std::string_view name_of(ComponentClass c);
std::string_view name_of(DefectClass c);
std::string_view name_of(DamageState s);

std::string_view display_name(ComponentClass c);
std::string_view display_name(DefectClass c);
std::string_view display_name(DamageState s);

std::optional<ComponentClass> component_class_from_name(std::string_view name);
std::optional<DefectClass> defect_class_from_name(std::string_view name);
std::optional<DamageState> damage_state_from_name(std::string_view name);

constexpr std::uint8_t code_of(ComponentClass c) { return static_cast<std::uint8_t>(c); }
constexpr std::uint8_t code_of(DefectClass c) { return static_cast<std::uint8_t>(c); }
constexpr std::uint8_t code_of(DamageState s) { return static_cast<std::uint8_t>(s); }

std::optional<ComponentClass> component_class_from_code(std::uint8_t code);
std::optional<DefectClass> defect_class_from_code(std::uint8_t code);
std::optional<DamageState> damage_state_from_code(std::uint8_t code);

} // namespace shmpipe
