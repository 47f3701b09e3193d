#include "shmpipe/fixture.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>

#include "json.hpp"
#include "shmpipe/error.hpp"
#include "shmpipe/png_io.hpp"
#include "shmpipe/rng.hpp"

namespace shmpipe {

DamageState fixture_damage_rule(const FeatureVector& fv, double spall_moderate_threshold) {
    if (fv.rebar_ratio > 0) return DamageState::Severe;
    if (fv.spalling_ratio >= spall_moderate_threshold) return DamageState::Moderate;
    if (fv.crack_ratio > 0 || fv.spalling_ratio > 0) return DamageState::Light;
    return DamageState::NoDamage;
}

namespace {

constexpr int kCellMargin = 3; // keeps padded crops of neighbours disjoint

struct SceneLayers {
    MaskLayer components;
    MaskLayer cracking;
    MaskLayer spalling;
    MaskLayer rebar;
    MaskLayer damage;
    Raster rgb;
};

void paint_rect(MaskLayer& mask, const PixelRect& rect, std::uint8_t code) {
    for (int y = rect.y; y < rect.y + rect.h; ++y)
        for (int x = rect.x; x < rect.x + rect.w; ++x) mask.at(x, y) = code;
}

std::uint64_t count_rect(const MaskLayer& mask, const PixelRect& rect) {
    std::uint64_t n = 0;
    for (int y = rect.y; y < rect.y + rect.h; ++y)
        for (int x = rect.x; x < rect.x + rect.w; ++x)
            if (mask.at(x, y) != 0) ++n;
    return n;
}

// Cheap position hash for background texture; keeps the rng stream free for
// the scene draws.
std::uint8_t texture_noise(int x, int y, std::uint64_t salt) {
    return static_cast<std::uint8_t>(
        mix64(static_cast<std::uint64_t>(x) * 73856093ull ^
              static_cast<std::uint64_t>(y) * 19349663ull ^ salt) &
        0x1F);
}

Color component_base_color(std::uint8_t code) {
    return Color{static_cast<std::uint8_t>(70 + code * 22),
                 static_cast<std::uint8_t>(60 + code * 17),
                 static_cast<std::uint8_t>(50 + code * 26)};
}

PlantedInstance plant_component(SceneLayers& scene, const FixtureSpec& spec, SplitMix64& rng,
                                const PixelRect& cell) {
    int avail_w = cell.w - 2 * kCellMargin;
    int avail_h = cell.h - 2 * kCellMargin;
    int range = spec.max_component_side - spec.min_component_side + 1;
    int w = std::min(spec.min_component_side + static_cast<int>(rng.next_below(range)), avail_w);
    int h = std::min(spec.min_component_side + static_cast<int>(rng.next_below(range)), avail_h);
    int x0 = cell.x + kCellMargin + static_cast<int>(rng.next_below(avail_w - w + 1));
    int y0 = cell.y + kCellMargin + static_cast<int>(rng.next_below(avail_h - h + 1));
    std::uint8_t component = static_cast<std::uint8_t>(1 + rng.next_below(kComponentClassCount - 1));

    PlantedInstance instance;
    instance.component = component;
    instance.rect = {x0, y0, w, h};
    instance.pixel_count = static_cast<std::uint64_t>(w) * h;
    paint_rect(scene.components, instance.rect, component);

    Color base = component_base_color(component);
    for (int y = y0; y < y0 + h; ++y)
        for (int x = x0; x < x0 + w; ++x)
            for (int ch = 0; ch < 3; ++ch)
                scene.rgb.at(x, y, ch) = static_cast<std::uint8_t>(
                    std::min(255, base[static_cast<std::size_t>(ch)] + texture_noise(x, y, ch)));

    bool crack_hit = rng.next_unit() < spec.crack_prob;
    bool spall_hit = rng.next_unit() < spec.spall_prob;
    bool rebar_hit = rng.next_unit() < spec.rebar_prob;

    PixelRect crack_rect{};
    if (crack_hit) {
        int ch = std::max(1, h / 6);
        int cy = y0 + static_cast<int>(rng.next_below(h - ch + 1));
        crack_rect = {x0, cy, w, ch};
        paint_rect(scene.cracking, crack_rect, 1);
        for (int y = crack_rect.y; y < crack_rect.y + crack_rect.h; ++y)
            for (int x = crack_rect.x; x < crack_rect.x + crack_rect.w; ++x)
                scene.rgb.at(x, y, 0) = scene.rgb.at(x, y, 1) = scene.rgb.at(x, y, 2) = 25;
    }

    PixelRect spall_rect{};
    if (spall_hit) {
        int sw = std::max(2, w / 3 + static_cast<int>(rng.next_below(std::max(1, w / 3))));
        int sh = std::max(2, h / 3 + static_cast<int>(rng.next_below(std::max(1, h / 3))));
        sw = std::min(sw, w);
        sh = std::min(sh, h);
        int sx = x0 + static_cast<int>(rng.next_below(w - sw + 1));
        int sy;
        if (crack_hit && rng.next_unit() < spec.collide_prob) {
            // force an overlap with the crack band
            sy = std::clamp(crack_rect.y - sh / 2, y0, y0 + h - sh);
        } else {
            sy = y0 + static_cast<int>(rng.next_below(h - sh + 1));
        }
        spall_rect = {sx, sy, sw, sh};
        paint_rect(scene.spalling, spall_rect, 1);
        for (int y = spall_rect.y; y < spall_rect.y + spall_rect.h; ++y)
            for (int x = spall_rect.x; x < spall_rect.x + spall_rect.w; ++x) {
                scene.rgb.at(x, y, 0) = 160;
                scene.rgb.at(x, y, 1) = 120;
                scene.rgb.at(x, y, 2) = 90;
            }
    }

    if (rebar_hit) {
        // rebar sits inside the spalled area when there is one
        PixelRect host = spall_hit ? spall_rect : instance.rect;
        int rw = std::max(1, host.w / 3);
        int rh = std::max(1, host.h / 3);
        int rx = host.x + static_cast<int>(rng.next_below(host.w - rw + 1));
        int ry = host.y + static_cast<int>(rng.next_below(host.h - rh + 1));
        PixelRect rebar_rect{rx, ry, rw, rh};
        paint_rect(scene.rebar, rebar_rect, 1);
        for (int y = rebar_rect.y; y < rebar_rect.y + rebar_rect.h; ++y)
            for (int x = rebar_rect.x; x < rebar_rect.x + rebar_rect.w; ++x) {
                scene.rgb.at(x, y, 0) = 190;
                scene.rgb.at(x, y, 1) = 60;
                scene.rgb.at(x, y, 2) = 45;
            }
    }

    instance.defect_pixels[0] = count_rect(scene.cracking, instance.rect);
    instance.defect_pixels[1] = count_rect(scene.spalling, instance.rect);
    instance.defect_pixels[2] = count_rect(scene.rebar, instance.rect);

    FeatureVector fv;
    fv.element_type = component;
    fv.element_size_ratio = static_cast<double>(instance.pixel_count) /
                            static_cast<double>(scene.components.pixel_count());
    fv.crack_ratio = static_cast<double>(instance.defect_pixels[0]) / instance.pixel_count;
    fv.spalling_ratio = static_cast<double>(instance.defect_pixels[1]) / instance.pixel_count;
    fv.rebar_ratio = static_cast<double>(instance.defect_pixels[2]) / instance.pixel_count;
    instance.state = fixture_damage_rule(fv, spec.spall_moderate_threshold);
    paint_rect(scene.damage, instance.rect, code_of(instance.state));
    return instance;
}

bool layers_collide(const MaskLayer& a, const MaskLayer& b) {
    for (std::size_t i = 0; i < a.codes.size(); ++i)
        if (a.codes[i] != 0 && b.codes[i] != 0) return true;
    return false;
}

nlohmann::ordered_json spec_to_json(const FixtureSpec& spec) {
    nlohmann::ordered_json doc;
    doc["image_count"] = spec.image_count;
    doc["width"] = spec.width;
    doc["height"] = spec.height;
    doc["grid_cols"] = spec.grid_cols;
    doc["grid_rows"] = spec.grid_rows;
    doc["cell_fill_prob"] = spec.cell_fill_prob;
    doc["min_component_side"] = spec.min_component_side;
    doc["max_component_side"] = spec.max_component_side;
    doc["crack_prob"] = spec.crack_prob;
    doc["spall_prob"] = spec.spall_prob;
    doc["rebar_prob"] = spec.rebar_prob;
    doc["collide_prob"] = spec.collide_prob;
    doc["spall_moderate_threshold"] = spec.spall_moderate_threshold;
    return doc;
}

FixtureSpec spec_from_json(const nlohmann::json& doc) {
    FixtureSpec spec;
    spec.image_count = doc.at("image_count").get<int>();
    spec.width = doc.at("width").get<int>();
    spec.height = doc.at("height").get<int>();
    spec.grid_cols = doc.at("grid_cols").get<int>();
    spec.grid_rows = doc.at("grid_rows").get<int>();
    spec.cell_fill_prob = doc.at("cell_fill_prob").get<double>();
    spec.min_component_side = doc.at("min_component_side").get<int>();
    spec.max_component_side = doc.at("max_component_side").get<int>();
    spec.crack_prob = doc.at("crack_prob").get<double>();
    spec.spall_prob = doc.at("spall_prob").get<double>();
    spec.rebar_prob = doc.at("rebar_prob").get<double>();
    spec.collide_prob = doc.at("collide_prob").get<double>();
    spec.spall_moderate_threshold = doc.at("spall_moderate_threshold").get<double>();
    return spec;
}

} // namespace

FixtureResult generate_fixture_dataset(const FixtureSpec& spec, std::uint64_t seed,
                                       const std::filesystem::path& out_dir) {
    if (spec.image_count <= 0 || spec.width <= 0 || spec.height <= 0)
        throw Error("fixture dimensions must be positive");
    if (spec.grid_cols <= 0 || spec.grid_rows <= 0) throw Error("fixture grid must be positive");
    if (spec.min_component_side < 2 || spec.max_component_side < spec.min_component_side)
        throw Error("fixture component side range is invalid");
    int cell_w = spec.width / spec.grid_cols;
    int cell_h = spec.height / spec.grid_rows;
    if (cell_w - 2 * kCellMargin < 2 || cell_h - 2 * kCellMargin < 2)
        throw Error("fixture grid cells are too small for the margin");

    std::filesystem::create_directories(out_dir);
    FixtureSidecar sidecar;
    sidecar.seed = seed;
    sidecar.spec = spec;

    Manifest manifest;
    manifest.base_dir = out_dir;

    for (int img = 0; img < spec.image_count; ++img) {
        SplitMix64 rng(derive_seed(seed, static_cast<std::uint64_t>(img)));
        char id_buf[32];
        std::snprintf(id_buf, sizeof(id_buf), "scene_%03d", img);
        std::string id(id_buf);

        SceneLayers scene;
        scene.components = MaskLayer::make(spec.width, spec.height, CodeTable::Component);
        scene.cracking = MaskLayer::make(spec.width, spec.height, CodeTable::Binary);
        scene.spalling = MaskLayer::make(spec.width, spec.height, CodeTable::Binary);
        scene.rebar = MaskLayer::make(spec.width, spec.height, CodeTable::Binary);
        scene.damage = MaskLayer::make(spec.width, spec.height, CodeTable::Damage);
        scene.rgb = Raster::make(spec.width, spec.height, 3);
        std::uint64_t salt = derive_seed(seed, 0x10000u + static_cast<std::uint64_t>(img));
        for (int y = 0; y < spec.height; ++y)
            for (int x = 0; x < spec.width; ++x)
                for (int ch = 0; ch < 3; ++ch)
                    scene.rgb.at(x, y, ch) =
                        static_cast<std::uint8_t>(8 + texture_noise(x, y, salt + ch));

        PlantedImage planted;
        planted.id = id;
        for (int r = 0; r < spec.grid_rows; ++r) {
            for (int c = 0; c < spec.grid_cols; ++c) {
                if (rng.next_unit() >= spec.cell_fill_prob) continue;
                PixelRect cell{c * cell_w, r * cell_h, cell_w, cell_h};
                planted.instances.push_back(plant_component(scene, spec, rng, cell));
            }
        }
        std::sort(planted.instances.begin(), planted.instances.end(),
                  [](const PlantedInstance& a, const PlantedInstance& b) {
                      return a.rect.y != b.rect.y ? a.rect.y < b.rect.y : a.rect.x < b.rect.x;
                  });
        for (std::size_t i = 0; i < planted.instances.size(); ++i)
            planted.instances[i].instance_id = static_cast<int>(i);

        planted.collisions[0] = layers_collide(scene.cracking, scene.spalling) ? 1 : 0;
        planted.collisions[1] = layers_collide(scene.cracking, scene.rebar) ? 1 : 0;
        planted.collisions[2] = layers_collide(scene.spalling, scene.rebar) ? 1 : 0;
        for (std::uint8_t code : scene.components.codes) ++planted.class_pixels[code];
        for (std::uint8_t code : scene.damage.codes) ++planted.damage_pixels[code];
        MaskLayer fg = foreground_from_components(scene.components);
        planted.foreground_pixels = fg.count(1);

        write_png(out_dir / "rgb" / (id + ".png"), scene.rgb);
        write_png(out_dir / "components" / (id + ".png"), scene.components);
        write_png(out_dir / "cracking" / (id + ".png"), scene.cracking);
        write_png(out_dir / "spalling" / (id + ".png"), scene.spalling);
        write_png(out_dir / "rebar" / (id + ".png"), scene.rebar);
        write_png(out_dir / "damage" / (id + ".png"), scene.damage);
        write_png(out_dir / "foreground" / (id + ".png"), fg);

        ManifestEntry entry;
        entry.id = id;
        entry.rgb = std::filesystem::path("rgb") / (id + ".png");
        entry.components = std::filesystem::path("components") / (id + ".png");
        entry.defects[DefectClass::Cracking] = std::filesystem::path("cracking") / (id + ".png");
        entry.defects[DefectClass::Spalling] = std::filesystem::path("spalling") / (id + ".png");
        entry.defects[DefectClass::ExposedRebar] = std::filesystem::path("rebar") / (id + ".png");
        entry.damage = std::filesystem::path("damage") / (id + ".png");
        entry.foreground = std::filesystem::path("foreground") / (id + ".png");
        manifest.entries.push_back(std::move(entry));
        sidecar.images.push_back(std::move(planted));
    }

    FixtureResult result;
    result.manifest_path = out_dir / "manifest.json";
    result.sidecar_path = out_dir / "sidecar.json";
    save_manifest(manifest, result.manifest_path);

    nlohmann::ordered_json doc;
    doc["seed"] = sidecar.seed;
    doc["spec"] = spec_to_json(sidecar.spec);
    nlohmann::ordered_json images = nlohmann::ordered_json::array();
    for (const auto& planted : sidecar.images) {
        nlohmann::ordered_json img;
        img["id"] = planted.id;
        nlohmann::ordered_json instances = nlohmann::ordered_json::array();
        for (const auto& inst : planted.instances) {
            nlohmann::ordered_json node;
            node["instance_id"] = inst.instance_id;
            node["component"] = inst.component;
            node["rect"] = {inst.rect.x, inst.rect.y, inst.rect.w, inst.rect.h};
            node["pixel_count"] = inst.pixel_count;
            node["defect_pixels"] = inst.defect_pixels;
            node["state"] = code_of(inst.state);
            instances.push_back(std::move(node));
        }
        img["instances"] = std::move(instances);
        img["collisions"] = planted.collisions;
        img["class_pixels"] = planted.class_pixels;
        img["damage_pixels"] = planted.damage_pixels;
        img["foreground_pixels"] = planted.foreground_pixels;
        images.push_back(std::move(img));
    }
    doc["images"] = std::move(images);
    std::ofstream out(result.sidecar_path, std::ios::binary);
    if (!out) throw Error("cannot write sidecar " + result.sidecar_path.string());
    out << doc.dump(2) << '\n';

    result.manifest = load_manifest(result.manifest_path);
    return result;
}

FixtureSidecar load_sidecar(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open sidecar " + path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
        FixtureSidecar sidecar;
        sidecar.seed = doc.at("seed").get<std::uint64_t>();
        sidecar.spec = spec_from_json(doc.at("spec"));
        for (const auto& img : doc.at("images")) {
            PlantedImage planted;
            planted.id = img.at("id").get<std::string>();
            for (const auto& node : img.at("instances")) {
                PlantedInstance inst;
                inst.instance_id = node.at("instance_id").get<int>();
                inst.component = node.at("component").get<std::uint8_t>();
                const auto& rect = node.at("rect");
                inst.rect = {rect.at(0).get<int>(), rect.at(1).get<int>(), rect.at(2).get<int>(),
                             rect.at(3).get<int>()};
                inst.pixel_count = node.at("pixel_count").get<std::uint64_t>();
                const auto& defects = node.at("defect_pixels");
                for (std::size_t i = 0; i < 3; ++i)
                    inst.defect_pixels[i] = defects.at(i).get<std::uint64_t>();
                auto state = damage_state_from_code(node.at("state").get<std::uint8_t>());
                if (!state) throw Error("sidecar: invalid damage state");
                inst.state = *state;
                planted.instances.push_back(inst);
            }
            const auto& collisions = img.at("collisions");
            for (std::size_t i = 0; i < 3; ++i) planted.collisions[i] = collisions.at(i).get<int>();
            const auto& class_pixels = img.at("class_pixels");
            for (std::size_t i = 0; i < planted.class_pixels.size(); ++i)
                planted.class_pixels[i] = class_pixels.at(i).get<std::uint64_t>();
            const auto& damage_pixels = img.at("damage_pixels");
            for (std::size_t i = 0; i < planted.damage_pixels.size(); ++i)
                planted.damage_pixels[i] = damage_pixels.at(i).get<std::uint64_t>();
            planted.foreground_pixels = img.at("foreground_pixels").get<std::uint64_t>();
            sidecar.images.push_back(std::move(planted));
        }
        return sidecar;
    } catch (const nlohmann::json::exception& e) {
        throw Error("sidecar " + path.string() + ": " + e.what());
    }
}

} // namespace shmpipe
