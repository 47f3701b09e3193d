#include <cstdio>
#include <fstream>
#include <iostream>
#include <map>
#include <memory>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"
#include "shmpipe/dataset.hpp"
#include "shmpipe/error.hpp"
#include "shmpipe/fixture.hpp"
#include "shmpipe/manifest.hpp"
#include "shmpipe/metrics.hpp"
#include "shmpipe/parallel.hpp"
#include "shmpipe/pipeline.hpp"
#include "shmpipe/png_io.hpp"
#include "shmpipe/rng.hpp"
#include "shmpipe/shallow.hpp"

namespace {

using namespace shmpipe;
using nlohmann::ordered_json;

// Flag values that fail semantic validation exit with the usage code, not
// the data-error code.
struct UsageError : std::runtime_error {
    explicit UsageError(const std::string& message) : std::runtime_error(message) {}
};

// Sub-stream ids under the one --seed flag.
enum SeedStream : std::uint64_t {
    kSeedSplit = 0,
    kSeedBalance = 1,
    kSeedForest = 2,
};

void write_text(const std::filesystem::path& path, const std::string& text) {
    if (auto parent = path.parent_path(); !parent.empty())
        std::filesystem::create_directories(parent);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write " + path.string());
    out << text;
    if (!out) throw Error("cannot write " + path.string());
}

void emit_json(const ordered_json& doc, const std::string& out_path) {
    if (out_path.empty())
        std::cout << doc.dump(2) << '\n';
    else
        write_text(out_path, doc.dump(2) + "\n");
}

// ---- node binding -------------------------------------------------------

struct NodeSpecs {
    std::string foreground, components, cracking, spalling, rebar, damage;
    bool oracle_all = false;

    std::string& for_stage(Stage stage) {
        switch (stage) {
            case Stage::Foreground: return foreground;
            case Stage::Components: return components;
            case Stage::DefectCracking: return cracking;
            case Stage::DefectSpalling: return spalling;
            case Stage::DefectRebar: return rebar;
            case Stage::DamageState: return damage;
        }
        throw UsageError("invalid stage");
    }
};

void add_node_flags(CLI::App* cmd, NodeSpecs& specs) {
    const char* forms = "one of: oracle | external:DIR | constant:CODE";
    cmd->add_option("--foreground", specs.foreground, forms);
    cmd->add_option("--components", specs.components, forms);
    cmd->add_option("--cracking", specs.cracking, forms);
    cmd->add_option("--spalling", specs.spalling, forms);
    cmd->add_option("--rebar", specs.rebar, forms);
    cmd->add_option("--damage", specs.damage,
                    "one of: oracle | model:FILE | constant:STATE");
    cmd->add_flag("--oracle-all", specs.oracle_all,
                  "bind every stage left unset to the ground-truth oracle");
}

std::uint8_t parse_stage_code(Stage stage, const std::string& text) {
    CodeTable table = stage_code_table(stage);
    for (int c = 0; c < code_table_size(table); ++c)
        if (class_name_in_table(table, c) == text) return static_cast<std::uint8_t>(c);
    try {
        int code = std::stoi(text);
        if (code >= 0 && code <= code_table_max(table)) return static_cast<std::uint8_t>(code);
    } catch (...) {
    }
    throw UsageError("constant code '" + text + "' is not in the " +
                     std::string(code_table_name(table)) + " table");
}

std::shared_ptr<SegmentationNode> make_seg_node(Stage stage, const std::string& spec,
                                                const std::shared_ptr<const LabelStore>& store) {
    if (spec == "oracle") return oracle_node(stage, store);
    if (spec.rfind("external:", 0) == 0) return external_mask_node(stage, spec.substr(9));
    if (spec.rfind("constant:", 0) == 0)
        return constant_node(stage, parse_stage_code(stage, spec.substr(9)));
    throw UsageError("unknown node binding '" + spec + "' for stage " +
                     std::string(stage_name(stage)));
}

std::shared_ptr<DamageNode> make_damage_node(const std::string& spec,
                                             const std::shared_ptr<const LabelStore>& store) {
    if (spec == "oracle") return oracle_damage_node(store);
    if (spec.rfind("model:", 0) == 0)
        return classifier_damage_node(ShallowModel::load(spec.substr(6)));
    if (spec.rfind("constant:", 0) == 0) {
        const std::string text = spec.substr(9);
        auto state = damage_state_from_name(text);
        if (!state) {
            try {
                auto by_code = damage_state_from_code(
                    static_cast<std::uint8_t>(std::stoi(text)));
                if (by_code) state = by_code;
            } catch (...) {
            }
        }
        if (!state) throw UsageError("unknown damage state '" + text + "'");
        return constant_damage_node(*state);
    }
    throw UsageError("unknown node binding '" + spec + "' for stage damage");
}

PipelineConfig build_config(NodeSpecs& specs, const Manifest& manifest,
                            const PipelineParams& params) {
    auto store = std::make_shared<const LabelStore>(manifest);
    PipelineConfig cfg;
    cfg.params = params;
    const std::array<Stage, 5> seg_stages = {Stage::Foreground, Stage::Components,
                                             Stage::DefectCracking, Stage::DefectSpalling,
                                             Stage::DefectRebar};
    for (Stage stage : seg_stages) {
        std::string& spec = specs.for_stage(stage);
        if (spec.empty()) {
            if (!specs.oracle_all)
                throw UsageError("stage " + std::string(stage_name(stage)) +
                                 " has no node binding (use --" +
                                 std::string(stage_name(stage)) + " or --oracle-all)");
            spec = "oracle";
        }
        auto node = make_seg_node(stage, spec, store);
        switch (stage) {
            case Stage::Foreground: cfg.foreground = node; break;
            case Stage::Components: cfg.components = node; break;
            case Stage::DefectCracking: cfg.defects[DefectClass::Cracking] = node; break;
            case Stage::DefectSpalling: cfg.defects[DefectClass::Spalling] = node; break;
            case Stage::DefectRebar: cfg.defects[DefectClass::ExposedRebar] = node; break;
            case Stage::DamageState: break;
        }
    }
    if (specs.damage.empty()) {
        if (!specs.oracle_all)
            throw UsageError("stage damage has no node binding (use --damage or --oracle-all)");
        specs.damage = "oracle";
    }
    cfg.damage = make_damage_node(specs.damage, store);
    return cfg;
}

// ---- subcommands --------------------------------------------------------

int cmd_split(const std::string& manifest_path, const std::string& out_dir, double fraction,
              std::uint64_t seed) {
    Manifest manifest = load_manifest(manifest_path);
    auto [train, test] = split_dataset(manifest, fraction, derive_seed(seed, kSeedSplit));
    std::filesystem::path out(out_dir);
    save_manifest(train, out / "train.json");
    save_manifest(test, out / "test.json");
    std::cout << "split " << manifest.entries.size() << " entries into " << train.entries.size()
              << " train / " << test.entries.size() << " test\n";
    return 0;
}

ordered_json stats_to_json(const ClassPixelStats& stats) {
    ordered_json doc = ordered_json::object();
    CodeTable table = stats.layer == LayerKind::Components ? CodeTable::Component
                      : stats.layer == LayerKind::Damage   ? CodeTable::Damage
                                                           : CodeTable::Binary;
    for (const auto& [code, per_class] : stats.per_class) {
        std::string key = stats.layer == LayerKind::Defects
                              ? std::string(name_of(*defect_class_from_code(
                                    static_cast<std::uint8_t>(code))))
                              : std::string(class_name_in_table(table, code));
        ordered_json node;
        node["images_counted"] = per_class.images_counted;
        node["zero_label_images"] = per_class.zero_label_images;
        node["total_pixels"] = per_class.total_pixels;
        node["min_fraction"] = per_class.min_fraction;
        node["max_fraction"] = per_class.max_fraction;
        node["mean_fraction"] = per_class.mean_fraction;
        doc[key] = std::move(node);
    }
    return doc;
}

int cmd_audit(const std::string& manifest_path, const std::string& out_path) {
    Manifest manifest = load_manifest(manifest_path);
    CollisionReport collisions = audit_collisions(manifest);

    ordered_json doc;
    doc["images"] = collisions.images_scanned;
    ordered_json coll = ordered_json::object();
    for (const auto& [pair, count] : collisions.counts)
        coll[std::string(name_of(pair.first)) + "+" + std::string(name_of(pair.second))] = count;
    doc["collisions"] = std::move(coll);
    ordered_json stats = ordered_json::object();
    for (LayerKind kind : {LayerKind::Foreground, LayerKind::Components, LayerKind::Defects,
                           LayerKind::Damage})
        stats[std::string(layer_kind_name(kind))] = stats_to_json(class_pixel_stats(manifest, kind));
    doc["pixel_stats"] = std::move(stats);
    emit_json(doc, out_path);
    return 0;
}

int cmd_prepare_task0(const std::string& manifest_path, const std::string& out_dir) {
    Manifest manifest = load_manifest(manifest_path);
    Manifest updated = build_foreground_masks(manifest, out_dir);
    save_manifest(updated, std::filesystem::path(out_dir) / "manifest.json");
    std::cout << "wrote foreground masks for " << updated.entries.size() << " entries\n";
    return 0;
}

std::string zero_pad(int value, int digits) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%0*d", digits, value);
    return buf;
}

int cmd_prepare_defects(const std::string& manifest_path, const std::string& out_dir,
                        const ExtractParams& params) {
    Manifest manifest = load_manifest(manifest_path);
    std::filesystem::path out(out_dir);
    std::string index = "file,source_id,instance_id,defect,x,y,w,h\n";
    std::uint64_t total = 0;
    for (const auto& entry : manifest.entries) {
        ImageRecord record = load_record(manifest, entry);
        for (const auto& crop : extract_defect_crops(record, params)) {
            std::string stem = std::string(name_of(crop.defect)) + "/" + crop.source_id + "_" +
                               zero_pad(crop.instance_id, 3);
            write_png(out / (stem + ".png"), crop.rgb);
            write_png(out / (stem + "_label.png"), crop.label);
            index += stem + ".png," + crop.source_id + "," + std::to_string(crop.instance_id) +
                     "," + std::string(name_of(crop.defect)) + "," + std::to_string(crop.origin.x) +
                     "," + std::to_string(crop.origin.y) + "," + std::to_string(crop.origin.w) +
                     "," + std::to_string(crop.origin.h) + "\n";
            ++total;
        }
    }
    write_text(out / "index.csv", index);
    std::cout << "wrote " << total << " defect crops\n";
    return 0;
}

int cmd_prepare_surfaces(const std::string& manifest_path, const std::string& out_dir,
                         const ExtractParams& params) {
    Manifest manifest = load_manifest(manifest_path);
    std::filesystem::path out(out_dir);
    std::string index = "file,source_id,instance_id,component,state,cx,cy,w,h,angle_deg\n";
    std::uint64_t total = 0;
    char num[64];
    for (const auto& entry : manifest.entries) {
        ImageRecord record = load_record(manifest, entry);
        for (const auto& patch : extract_surface_patches(record, params)) {
            std::string stem = std::string(name_of(patch.state)) + "/" + patch.source_id + "_" +
                               zero_pad(patch.instance_id, 3);
            write_png(out / (stem + ".png"), patch.rgb);
            index += stem + ".png," + patch.source_id + "," + std::to_string(patch.instance_id) +
                     "," +
                     std::string(class_name_in_table(CodeTable::Component, patch.component)) +
                     "," + std::string(name_of(patch.state));
            std::snprintf(num, sizeof(num), ",%.4f,%.4f,%.4f,%.4f,%.4f\n", patch.rect.cx,
                          patch.rect.cy, patch.rect.w, patch.rect.h, patch.rect.angle_deg);
            index += num;
            ++total;
        }
    }
    write_text(out / "index.csv", index);
    std::cout << "wrote " << total << " surface patches\n";
    return 0;
}

int cmd_fit(const std::string& kind, const std::string& manifest_path,
            const std::string& out_path, const TreeParams& tree_params,
            const ForestParams& forest_params, bool nb_normalized, bool balance,
            std::uint64_t seed, int min_instance_px) {
    Manifest manifest = load_manifest(manifest_path);
    ExtractParams extract;
    extract.min_instance_px = min_instance_px;
    std::vector<LabeledVector> data = feature_vectors_from_manifest(manifest, extract);
    if (data.empty()) throw Error("no training instances found in the manifest");
    if (balance)
        data = balance_by_undersampling(data, derive_seed(seed, kSeedBalance));

    ShallowModel model;
    if (kind == "tree") {
        model = ShallowModel(DecisionTree::fit(data, tree_params));
    } else if (kind == "forest") {
        model = ShallowModel(RandomForest::fit(data, forest_params, derive_seed(seed, kSeedForest)));
    } else {
        BayesParams params;
        params.normalized = nb_normalized;
        model = ShallowModel(NaiveBayes::fit(data, params));
    }
    model.save(out_path);

    std::uint64_t correct = 0;
    for (const auto& sample : data)
        if (model.predict(sample.features) == sample.label) ++correct;
    std::cout << "fitted " << model.kind() << " on " << data.size() << " instances, training accuracy "
              << static_cast<double>(correct) / static_cast<double>(data.size()) << "\n";
    return 0;
}

int cmd_run(const std::string& manifest_path, const std::string& out_dir, NodeSpecs& specs,
            const PipelineParams& params, int jobs) {
    Manifest manifest = load_manifest(manifest_path);
    PipelineConfig cfg = build_config(specs, manifest, params);
    cfg.validate();
    std::filesystem::path out(out_dir);

    struct Slot {
        bool ok = false;
        std::string failure;
        StructureReport report;
    };
    std::vector<Slot> slots(manifest.entries.size());
    parallel_for(manifest.entries.size(), jobs, [&](std::size_t i) {
        try {
            ImageRecord record = load_record(manifest, manifest.entries[i]);
            slots[i].report = run_pipeline(cfg, record);
            slots[i].ok = true;
        } catch (const std::exception& e) {
            slots[i].failure = manifest.entries[i].id + ": " + e.what();
        }
    });

    std::uint64_t failures = 0;
    for (std::size_t i = 0; i < slots.size(); ++i) {
        const auto& slot = slots[i];
        if (!slot.ok) {
            ++failures;
            std::cerr << "failed " << slot.failure << "\n";
            continue;
        }
        const std::string& id = manifest.entries[i].id;
        write_text(out / "reports" / (id + ".json"), slot.report.to_json().dump(2) + "\n");
        write_png(out / "overlays" / (id + ".png"), slot.report.overlay);
        write_png(out / "masks" / "foreground" / (id + ".png"), slot.report.foreground);
        write_png(out / "masks" / "components" / (id + ".png"), slot.report.components);
        for (const auto& [defect, layer] : slot.report.defect_layers)
            write_png(out / "masks" / stage_name(defect_stage(defect)) / (id + ".png"), layer);
    }
    std::cout << "processed " << (slots.size() - failures) << "/" << slots.size() << " images\n";
    return failures == 0 ? 0 : 2;
}

int cmd_eval(const std::string& manifest_path, NodeSpecs& specs, const PipelineParams& params,
             int jobs, const std::string& out_path, const std::string& csv_path) {
    Manifest manifest = load_manifest(manifest_path);
    PipelineConfig cfg = build_config(specs, manifest, params);
    EvaluationResult result = evaluate_pipeline(cfg, manifest, jobs);
    emit_json(result.to_json(), out_path);
    if (!csv_path.empty()) {
        std::string csv;
        for (const auto& [stage, report] : result.stages)
            csv += "# " + stage + "\n" + metrics_csv(report);
        write_text(csv_path, csv);
    }
    return result.failures.empty() ? 0 : 2;
}

int cmd_fixture(const FixtureSpec& spec, std::uint64_t seed, const std::string& out_dir) {
    FixtureResult result = generate_fixture_dataset(spec, seed, out_dir);
    std::cout << "wrote " << result.manifest.entries.size() << " scenes, manifest at "
              << result.manifest_path.string() << "\n";
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"Staged structural-inspection toolkit: dataset preparation, shallow "
                 "classifiers and a swappable segmentation pipeline"};
    app.require_subcommand(1);
    argv = app.ensure_utf8(argv);

    std::string manifest_path, out_path, csv_path;
    std::uint64_t seed = 0;
    double fraction = 0.2;
    int jobs = default_jobs();
    PipelineParams pparams;
    ExtractParams eparams;
    TreeParams tree_params;
    ForestParams forest_params;
    bool nb_normalized = false;
    bool balance = false;
    NodeSpecs specs;
    FixtureSpec fixture_spec;

    auto* split = app.add_subcommand("split", "seeded train/test partition of a manifest");
    split->add_option("--manifest", manifest_path, "dataset manifest")->required();
    split->add_option("--out", out_path, "directory for train.json and test.json")->required();
    split->add_option("--test-fraction", fraction, "test share, in (0,1)")
        ->capture_default_str();
    split->add_option("--seed", seed, "random seed")->required();

    auto* audit = app.add_subcommand("audit", "label collisions and per-class pixel statistics");
    audit->add_option("--manifest", manifest_path, "dataset manifest")->required();
    audit->add_option("--out", out_path, "report file (default: stdout)");

    auto* prepare = app.add_subcommand("prepare", "derive training datasets from a manifest");
    prepare->require_subcommand(1);
    auto* prep_task0 = prepare->add_subcommand("task0", "derive foreground masks");
    auto* prep_defects = prepare->add_subcommand("defects", "extract per-defect crops");
    auto* prep_surfaces = prepare->add_subcommand("surfaces", "extract warped surface patches");
    for (CLI::App* sub : {prep_task0, prep_defects, prep_surfaces}) {
        sub->add_option("--manifest", manifest_path, "dataset manifest")->required();
        sub->add_option("--out", out_path, "output directory")->required();
    }
    for (CLI::App* sub : {prep_defects, prep_surfaces}) {
        sub->add_option("--padding", eparams.padding_fraction, "bbox expansion per side")
            ->capture_default_str();
        sub->add_option("--min-instance-px", eparams.min_instance_px,
                        "skip instances smaller than this")
            ->capture_default_str();
    }
    prep_surfaces->add_option("--patch-side", eparams.patch_side, "warped patch side length")
        ->capture_default_str();

    auto* fit = app.add_subcommand("fit", "fit a damage-state classifier on a manifest");
    fit->require_subcommand(1);
    auto* fit_tree = fit->add_subcommand("tree", "decision tree");
    auto* fit_forest = fit->add_subcommand("forest", "random forest");
    auto* fit_nb = fit->add_subcommand("nb", "gaussian naive bayes");
    for (CLI::App* sub : {fit_tree, fit_forest, fit_nb}) {
        sub->add_option("--manifest", manifest_path, "training manifest")->required();
        sub->add_option("--out", out_path, "model file")->required();
        sub->add_option("--seed", seed, "random seed (needed by forest fitting and --balance)");
        sub->add_flag("--balance", balance, "undersample to the minority class first");
        sub->add_option("--min-instance-px", eparams.min_instance_px,
                        "skip instances smaller than this")
            ->capture_default_str();
    }
    fit_tree->add_option("--max-depth", tree_params.max_depth, "maximum split depth")
        ->capture_default_str();
    fit_forest->add_option("--max-depth", forest_params.tree.max_depth, "per-tree depth cap")
        ->capture_default_str();
    fit_forest->add_option("--trees", forest_params.n_trees, "ensemble size")
        ->capture_default_str();
    fit_forest
        ->add_option("--features-per-split", forest_params.features_per_split,
                     "candidate features per split (0 = all)")
        ->capture_default_str();
    bool no_bootstrap = false;
    fit_forest->add_flag("--no-bootstrap", no_bootstrap, "fit each tree on the full data");
    fit_nb->add_flag("--normalized", nb_normalized, "min-max normalize features");

    auto* run = app.add_subcommand("run", "run the staged pipeline, write reports and overlays");
    run->add_option("--manifest", manifest_path, "dataset manifest")->required();
    run->add_option("--out", out_path, "output directory")->required();

    auto* eval = app.add_subcommand("eval", "score the pipeline against ground truth");
    eval->add_option("--manifest", manifest_path, "dataset manifest with ground truth")
        ->required();
    eval->add_option("--out", out_path, "summary file (default: stdout)");
    eval->add_option("--csv", csv_path, "also write per-stage CSV tables");

    for (CLI::App* sub : {run, eval}) {
        add_node_flags(sub, specs);
        sub->add_option("--jobs", jobs, "worker threads (default: SHM_JOBS or 1)");
        sub->add_option("--padding", pparams.padding_fraction, "defect crop expansion per side")
            ->capture_default_str();
        sub->add_option("--patch-side", pparams.patch_side, "warped patch side length")
            ->capture_default_str();
        sub->add_option("--min-instance-px", pparams.min_instance_px,
                        "skip instances smaller than this")
            ->capture_default_str();
        sub->add_option("--overlay-alpha", pparams.overlay_alpha, "overlay tint strength")
            ->capture_default_str();
    }

    auto* fixture = app.add_subcommand("fixture", "generate the miniature synthetic dataset");
    fixture->add_option("--out", out_path, "output directory")->required();
    fixture->add_option("--seed", seed, "random seed")->required();
    fixture->add_option("--images", fixture_spec.image_count, "scene count")
        ->capture_default_str();
    fixture->add_option("--width", fixture_spec.width, "scene width")->capture_default_str();
    fixture->add_option("--height", fixture_spec.height, "scene height")->capture_default_str();
    fixture->add_option("--grid-cols", fixture_spec.grid_cols, "component grid columns")
        ->capture_default_str();
    fixture->add_option("--grid-rows", fixture_spec.grid_rows, "component grid rows")
        ->capture_default_str();
    fixture->add_option("--cell-fill-prob", fixture_spec.cell_fill_prob,
                        "probability a grid cell holds a component")
        ->capture_default_str();
    fixture->add_option("--min-side", fixture_spec.min_component_side, "component side minimum")
        ->capture_default_str();
    fixture->add_option("--max-side", fixture_spec.max_component_side, "component side maximum")
        ->capture_default_str();
    fixture->add_option("--crack-prob", fixture_spec.crack_prob, "crack probability")
        ->capture_default_str();
    fixture->add_option("--spall-prob", fixture_spec.spall_prob, "spall probability")
        ->capture_default_str();
    fixture->add_option("--rebar-prob", fixture_spec.rebar_prob, "exposed-rebar probability")
        ->capture_default_str();
    fixture->add_option("--collide-prob", fixture_spec.collide_prob,
                        "crack/spall overlap probability")
        ->capture_default_str();
    fixture->add_option("--moderate-threshold", fixture_spec.spall_moderate_threshold,
                        "spall ratio that reads as moderate damage")
        ->capture_default_str();

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        int code = app.exit(e);
        return code == 0 ? 0 : 1;
    }

    try {
        if (split->parsed()) return cmd_split(manifest_path, out_path, fraction, seed);
        if (audit->parsed()) return cmd_audit(manifest_path, out_path);
        if (prep_task0->parsed()) return cmd_prepare_task0(manifest_path, out_path);
        if (prep_defects->parsed()) return cmd_prepare_defects(manifest_path, out_path, eparams);
        if (prep_surfaces->parsed()) return cmd_prepare_surfaces(manifest_path, out_path, eparams);
        if (fit_tree->parsed() || fit_forest->parsed() || fit_nb->parsed()) {
            forest_params.bootstrap = !no_bootstrap;
            CLI::App* fit_sub = fit_tree->parsed() ? fit_tree
                                : fit_forest->parsed() ? fit_forest
                                                       : fit_nb;
            std::string kind = fit_tree->parsed() ? "tree" : fit_forest->parsed() ? "forest" : "nb";
            if ((fit_forest->parsed() || balance) && fit_sub->count("--seed") == 0)
                throw UsageError("--seed is required for stochastic fitting");
            return cmd_fit(kind, manifest_path, out_path, tree_params, forest_params,
                           nb_normalized, balance, seed, eparams.min_instance_px);
        }
        if (run->parsed()) return cmd_run(manifest_path, out_path, specs, pparams, jobs);
        if (eval->parsed())
            return cmd_eval(manifest_path, specs, pparams, jobs, out_path, csv_path);
        if (fixture->parsed()) return cmd_fixture(fixture_spec, seed, out_path);
    } catch (const UsageError& e) {
        std::cerr << "usage error: " << e.what() << "\n";
        return 1;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    }
    return 1;
}
