#include "shmpipe/dataset.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "shmpipe/error.hpp"
#include "shmpipe/png_io.hpp"
#include "shmpipe/rng.hpp"

namespace shmpipe {

std::size_t split_test_count(std::size_t total, double test_fraction) {
    return static_cast<std::size_t>(std::floor(static_cast<double>(total) * test_fraction + 0.5));
}

std::pair<Manifest, Manifest> split_dataset(const Manifest& manifest, double test_fraction,
                                            std::uint64_t seed) {
    if (manifest.entries.empty()) throw Error("cannot split an empty dataset");
    if (!(test_fraction > 0.0) || !(test_fraction < 1.0))
        throw Error("test fraction must lie strictly between 0 and 1");
    if (manifest.split != SplitTag::Unsplit)
        throw Error("dataset is already a " + std::string(split_tag_name(manifest.split)) +
                    " partition");

    const std::size_t n = manifest.entries.size();
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), std::size_t{0});
    SplitMix64 rng(seed);
    shuffle(std::span<std::size_t>(order), rng);

    const std::size_t n_test = split_test_count(n, test_fraction);
    std::vector<std::size_t> test_idx(order.begin(), order.begin() + n_test);
    std::vector<std::size_t> train_idx(order.begin() + n_test, order.end());
    std::sort(test_idx.begin(), test_idx.end());
    std::sort(train_idx.begin(), train_idx.end());

    auto take = [&](const std::vector<std::size_t>& idx, SplitTag tag) {
        Manifest out;
        out.split = tag;
        out.base_dir = manifest.base_dir;
        out.entries.reserve(idx.size());
        for (std::size_t i : idx) out.entries.push_back(manifest.entries[i]);
        return out;
    };
    return {take(train_idx, SplitTag::Train), take(test_idx, SplitTag::Test)};
}

std::uint64_t CollisionReport::at(DefectClass a, DefectClass b) const {
    if (code_of(a) > code_of(b)) std::swap(a, b);
    auto it = counts.find({a, b});
    return it == counts.end() ? 0 : it->second;
}

CollisionReport audit_collisions(const Manifest& manifest) {
    CollisionReport report;
    for (std::size_t i = 0; i < kDefectClasses.size(); ++i)
        for (std::size_t j = i + 1; j < kDefectClasses.size(); ++j)
            report.counts[{kDefectClasses[i], kDefectClasses[j]}] = 0;

    for (const auto& entry : manifest.entries) {
        ++report.images_scanned;
        std::map<DefectClass, MaskLayer> layers;
        for (const auto& [defect, path] : entry.defects)
            layers.emplace(defect, read_mask_png(manifest.resolve(path), CodeTable::Binary));
        for (auto a = layers.begin(); a != layers.end(); ++a) {
            for (auto b = std::next(a); b != layers.end(); ++b) {
                const auto& la = a->second.codes;
                const auto& lb = b->second.codes;
                if (la.size() != lb.size())
                    throw Error("image " + entry.id + ": defect layers differ in size");
                bool hit = false;
                for (std::size_t k = 0; k < la.size() && !hit; ++k)
                    hit = la[k] != 0 && lb[k] != 0;
                if (hit) ++report.counts[{a->first, b->first}];
            }
        }
    }
    return report;
}

std::string_view layer_kind_name(LayerKind kind) {
    switch (kind) {
        case LayerKind::Foreground: return "foreground";
        case LayerKind::Components: return "components";
        case LayerKind::Defects: return "defects";
        case LayerKind::Damage: return "damage";
    }
    return "?";
}

namespace {

struct FractionAccum {
    ClassPixelStats::PerClass stats;
    double fraction_sum = 0;

    void add_image(std::uint64_t class_pixels, std::uint64_t image_pixels) {
        ++stats.images_counted;
        if (class_pixels == 0) {
            ++stats.zero_label_images;
            return;
        }
        double fraction = static_cast<double>(class_pixels) / static_cast<double>(image_pixels);
        std::uint64_t seen = stats.images_counted - stats.zero_label_images;
        stats.total_pixels += class_pixels;
        fraction_sum += fraction;
        stats.min_fraction = seen == 1 ? fraction : std::min(stats.min_fraction, fraction);
        stats.max_fraction = std::max(stats.max_fraction, fraction);
    }

    ClassPixelStats::PerClass finish() {
        std::uint64_t seen = stats.images_counted - stats.zero_label_images;
        stats.mean_fraction = seen > 0 ? fraction_sum / static_cast<double>(seen) : 0.0;
        return stats;
    }
};

} // namespace

ClassPixelStats class_pixel_stats(const Manifest& manifest, LayerKind layer) {
    ClassPixelStats result;
    result.layer = layer;
    std::map<int, FractionAccum> accum;

    auto tally_mask = [&](const MaskLayer& mask, CodeTable table) {
        std::vector<std::uint64_t> counts(code_table_size(table), 0);
        for (std::uint8_t code : mask.codes) ++counts[code];
        std::uint64_t area = mask.pixel_count();
        for (int c = 0; c < code_table_size(table); ++c) accum[c].add_image(counts[c], area);
    };

    for (const auto& entry : manifest.entries) {
        switch (layer) {
            case LayerKind::Foreground:
                if (entry.foreground)
                    tally_mask(read_mask_png(manifest.resolve(*entry.foreground), CodeTable::Binary),
                               CodeTable::Binary);
                break;
            case LayerKind::Components:
                if (entry.components)
                    tally_mask(
                        read_mask_png(manifest.resolve(*entry.components), CodeTable::Component),
                        CodeTable::Component);
                break;
            case LayerKind::Damage:
                if (entry.damage)
                    tally_mask(read_mask_png(manifest.resolve(*entry.damage), CodeTable::Damage),
                               CodeTable::Damage);
                break;
            case LayerKind::Defects:
                for (const auto& [defect, path] : entry.defects) {
                    MaskLayer mask = read_mask_png(manifest.resolve(path), CodeTable::Binary);
                    std::uint64_t positive = mask.count(1);
                    accum[static_cast<int>(code_of(defect))].add_image(positive,
                                                                       mask.pixel_count());
                }
                break;
        }
    }
    for (auto& [code, acc] : accum) result.per_class[code] = acc.finish();
    return result;
}

MaskLayer foreground_from_components(const MaskLayer& components) {
    if (components.table != CodeTable::Component)
        throw Error("foreground derivation expects a component mask");
    MaskLayer fg = MaskLayer::make(components.width, components.height, CodeTable::Binary);
    for (std::size_t i = 0; i < components.codes.size(); ++i)
        fg.codes[i] = components.codes[i] != code_of(ComponentClass::Background) ? 1 : 0;
    return fg;
}

Manifest build_foreground_masks(const Manifest& manifest, const std::filesystem::path& out_dir) {
    Manifest out = manifest;
    std::filesystem::path mask_dir = out_dir / "foreground";
    std::filesystem::create_directories(mask_dir);
    for (auto& entry : out.entries) {
        if (!entry.components)
            throw Error("image " + entry.id + ": component mask required to derive foreground");
        MaskLayer components =
            read_mask_png(manifest.resolve(*entry.components), CodeTable::Component);
        MaskLayer fg = foreground_from_components(components);
        std::filesystem::path path = mask_dir / (entry.id + ".png");
        write_png(path, fg);
        entry.foreground = std::filesystem::absolute(path).lexically_normal();
    }
    return out;
}

std::vector<ComponentInstance> component_instances(const MaskLayer& components) {
    std::vector<ComponentInstance> all;
    for (int code = 1; code < kComponentClassCount; ++code) {
        auto found = connected_components(components, static_cast<std::uint8_t>(code));
        all.insert(all.end(), std::make_move_iterator(found.begin()),
                   std::make_move_iterator(found.end()));
    }
    std::sort(all.begin(), all.end(), [](const ComponentInstance& a, const ComponentInstance& b) {
        const PixelPoint& pa = a.pixels.front();
        const PixelPoint& pb = b.pixels.front();
        return pa.y != pb.y ? pa.y < pb.y : pa.x < pb.x;
    });
    for (std::size_t i = 0; i < all.size(); ++i) all[i].id = static_cast<int>(i);
    return all;
}

PixelRect padded_clamped_bbox(const PixelRect& bbox, double padding_fraction, int width,
                              int height) {
    int pad_x = static_cast<int>(std::lround(bbox.w * padding_fraction));
    int pad_y = static_cast<int>(std::lround(bbox.h * padding_fraction));
    int x0 = std::max(0, bbox.x - pad_x);
    int y0 = std::max(0, bbox.y - pad_y);
    int x1 = std::min(width, bbox.x + bbox.w + pad_x);
    int y1 = std::min(height, bbox.y + bbox.h + pad_y);
    return {x0, y0, x1 - x0, y1 - y0};
}

namespace {

bool any_positive_inside(const MaskLayer& mask, const PixelRect& rect) {
    for (int y = rect.y; y < rect.y + rect.h; ++y)
        for (int x = rect.x; x < rect.x + rect.w; ++x)
            if (mask.at(x, y) != 0) return true;
    return false;
}

Raster masked_rgb(const ImageRecord& record) {
    if (record.foreground)
        return apply_foreground_mask(record.rgb, *record.foreground, Color{0, 0, 0});
    return record.rgb;
}

} // namespace

std::vector<DefectCrop> extract_defect_crops(const ImageRecord& record,
                                             const ExtractParams& params) {
    if (!record.components)
        throw Error("image " + record.id + ": component mask required for crop extraction");
    std::vector<DefectCrop> crops;
    if (record.defects.empty()) return crops;
    Raster rgb = masked_rgb(record);

    for (const auto& instance : component_instances(*record.components)) {
        if (instance.pixels.size() < static_cast<std::size_t>(params.min_instance_px)) continue;
        PixelRect origin = padded_clamped_bbox(instance.bbox, params.padding_fraction, rgb.width,
                                               rgb.height);
        for (const auto& [defect, layer] : record.defects) {
            if (!any_positive_inside(layer, origin)) continue;
            DefectCrop crop;
            crop.source_id = record.id;
            crop.instance_id = instance.id;
            crop.defect = defect;
            crop.rgb = shmpipe::crop(rgb, origin);
            crop.label = shmpipe::crop(layer, origin);
            crop.origin = origin;
            crops.push_back(std::move(crop));
        }
    }
    return crops;
}

DamageState majority_damage_state(const ComponentInstance& instance, const MaskLayer& damage) {
    if (instance.pixels.empty()) throw Error("cannot grade an empty instance");
    std::array<std::uint64_t, kDamageStateCount> counts{};
    for (const auto& p : instance.pixels) ++counts[damage.at(p.x, p.y)];
    int best = 0;
    for (int s = 1; s < kDamageStateCount; ++s)
        if (counts[s] >= counts[best]) best = s; // ascending scan, ties go severe
    return static_cast<DamageState>(best);
}

std::vector<SurfacePatch> extract_surface_patches(const ImageRecord& record,
                                                  const ExtractParams& params) {
    if (!record.components)
        throw Error("image " + record.id + ": component mask required for patch extraction");
    if (!record.damage)
        throw Error("image " + record.id + ": damage mask required for patch extraction");
    Raster rgb = masked_rgb(record);

    std::vector<SurfacePatch> patches;
    for (const auto& instance : component_instances(*record.components)) {
        if (instance.pixels.size() < static_cast<std::size_t>(params.min_instance_px)) continue;
        SurfacePatch patch;
        patch.source_id = record.id;
        patch.instance_id = instance.id;
        patch.component = instance.class_code;
        patch.rect = min_area_rect(instance.pixels);
        patch.rgb = warp_to_square(rgb, patch.rect, params.patch_side, Sampling::Bilinear);
        patch.state = majority_damage_state(instance, *record.damage);
        patches.push_back(std::move(patch));
    }
    return patches;
}

std::vector<std::size_t> undersample_indices(std::span<const int> labels, std::uint64_t seed) {
    if (labels.empty()) throw Error("cannot balance an empty collection");
    std::map<int, std::vector<std::size_t>> by_class;
    for (std::size_t i = 0; i < labels.size(); ++i) by_class[labels[i]].push_back(i);

    std::size_t minority = labels.size();
    for (const auto& [label, idx] : by_class) minority = std::min(minority, idx.size());

    std::vector<std::size_t> kept;
    for (auto& [label, idx] : by_class) {
        SplitMix64 rng(derive_seed(seed, static_cast<std::uint64_t>(static_cast<std::int64_t>(label))));
        shuffle(std::span<std::size_t>(idx), rng);
        kept.insert(kept.end(), idx.begin(), idx.begin() + minority);
    }
    std::sort(kept.begin(), kept.end());
    return kept;
}

std::vector<LabeledVector> balance_by_undersampling(std::span<const LabeledVector> samples,
                                                    std::uint64_t seed) {
    std::vector<int> labels;
    labels.reserve(samples.size());
    for (const auto& s : samples) labels.push_back(static_cast<int>(code_of(s.label)));
    std::vector<LabeledVector> out;
    for (std::size_t i : undersample_indices(labels, seed)) out.push_back(samples[i]);
    return out;
}

std::vector<LabeledVector> feature_vectors_from_manifest(const Manifest& manifest,
                                                         const ExtractParams& params) {
    std::vector<LabeledVector> out;
    for (const auto& entry : manifest.entries) {
        if (!entry.components || !entry.damage) continue;
        ImageRecord record = load_record(manifest, entry);
        std::uint64_t area = record.rgb.pixel_count();
        for (const auto& instance : component_instances(*record.components)) {
            if (instance.pixels.size() < static_cast<std::size_t>(params.min_instance_px))
                continue;
            LabeledVector sample;
            sample.features = build_feature_vector(instance, area, record.defects);
            sample.label = majority_damage_state(instance, *record.damage);
            out.push_back(sample);
        }
    }
    return out;
}

} // namespace shmpipe
