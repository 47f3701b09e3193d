#include <memory>

#include "doctest.h"
#include "helpers.hpp"
#include "json.hpp"
#include "shmpipe/error.hpp"
#include "shmpipe/fixture.hpp"
#include "shmpipe/pipeline.hpp"
#include "shmpipe/png_io.hpp"

using namespace shmpipe;
using testutil::mask_from_rows;
using testutil::TempDir;

namespace {

/// 12x8 scene with a wall and a column, full ground truth.
struct Scene {
    TempDir dir;
    Manifest manifest;

    Scene() {
        write_png(dir.path / "rgb.png", testutil::patterned_rgb(12, 8));
        MaskLayer comp = MaskLayer::make(12, 8, CodeTable::Component);
        for (int y = 2; y < 6; ++y)
            for (int x = 2; x < 6; ++x) comp.at(x, y) = 1;
        for (int y = 5; y < 7; ++y)
            for (int x = 8; x < 11; ++x) comp.at(x, y) = 3;
        write_png(dir.path / "comp.png", comp);
        write_png(dir.path / "fg.png", foreground_from_components(comp));

        MaskLayer crack = MaskLayer::make(12, 8, CodeTable::Binary);
        for (int x = 2; x < 6; ++x) crack.at(x, 3) = 1;
        MaskLayer spall = MaskLayer::make(12, 8, CodeTable::Binary);
        spall.at(3, 3) = 1;
        spall.at(3, 4) = 1;
        MaskLayer rebar = MaskLayer::make(12, 8, CodeTable::Binary);
        rebar.at(9, 5) = 1;
        write_png(dir.path / "crack.png", crack);
        write_png(dir.path / "spall.png", spall);
        write_png(dir.path / "rebar.png", rebar);

        MaskLayer damage = MaskLayer::make(12, 8, CodeTable::Damage);
        for (int y = 2; y < 6; ++y)
            for (int x = 2; x < 6; ++x) damage.at(x, y) = 2;
        for (int y = 5; y < 7; ++y)
            for (int x = 8; x < 11; ++x) damage.at(x, y) = 3;
        write_png(dir.path / "damage.png", damage);

        ManifestEntry e;
        e.id = "scene";
        e.rgb = "rgb.png";
        e.components = "comp.png";
        e.foreground = "fg.png";
        e.defects[DefectClass::Cracking] = "crack.png";
        e.defects[DefectClass::Spalling] = "spall.png";
        e.defects[DefectClass::ExposedRebar] = "rebar.png";
        e.damage = "damage.png";
        manifest.entries.push_back(e);
        manifest.base_dir = dir.path;
    }

    ImageRecord record() const { return load_record(manifest, manifest.entries[0]); }
};

PipelineConfig oracle_config(const Manifest& manifest) {
    auto store = std::make_shared<const LabelStore>(manifest);
    PipelineConfig cfg;
    cfg.foreground = oracle_node(Stage::Foreground, store);
    cfg.components = oracle_node(Stage::Components, store);
    cfg.defects[DefectClass::Cracking] = oracle_node(Stage::DefectCracking, store);
    cfg.defects[DefectClass::Spalling] = oracle_node(Stage::DefectSpalling, store);
    cfg.defects[DefectClass::ExposedRebar] = oracle_node(Stage::DefectRebar, store);
    cfg.damage = oracle_damage_node(store);
    return cfg;
}

bool all_stage_means_are_one(const EvaluationResult& result) {
    bool ok = result.stages.size() == 6;
    for (const auto& [key, report] : result.stages) {
        double value = report.kind == "segmentation" ? report.mean_iou : report.average_accuracy;
        double second =
            report.kind == "segmentation" ? report.mean_pixel_accuracy : report.macro_f1;
        ok = ok && value == 1.0 && second == 1.0;
    }
    return ok;
}

} // namespace

TEST_SUITE("pipeline") {

TEST_CASE("stage names and tables") {
    CHECK(stage_name(Stage::Foreground) == "foreground");
    CHECK(stage_name(Stage::DefectRebar) == "rebar");
    CHECK(defect_stage(DefectClass::Spalling) == Stage::DefectSpalling);
    CHECK(stage_code_table(Stage::Components) == CodeTable::Component);
    CHECK(stage_code_table(Stage::DefectCracking) == CodeTable::Binary);
    CHECK_THROWS_AS(stage_code_table(Stage::DamageState), Error);
}

TEST_CASE("label store caches decoded records") {
    Scene scene;
    LabelStore store(scene.manifest);
    const ImageRecord& first = store.record("scene");
    const ImageRecord& second = store.record("scene");
    CHECK(&first == &second);
    CHECK(first.rgb.width == 12);
    CHECK(testutil::throws_containing([&] { store.record("ghost"); }, "unknown image id"));
}

TEST_CASE("oracle node answers full-frame and cropped queries") {
    Scene scene;
    auto store = std::make_shared<const LabelStore>(scene.manifest);
    auto node = oracle_node(Stage::Components, store);
    CHECK(node->stage() == Stage::Components);
    CHECK(node->kind() == "oracle");

    ImageRecord record = scene.record();
    MaskLayer full = node->predict({"scene", record.rgb, PixelRect{0, 0, 12, 8}});
    CHECK(full == *record.components);

    PixelRect roi{2, 2, 4, 4};
    Raster view = crop(record.rgb, roi);
    MaskLayer sub = node->predict({"scene", view, roi});
    CHECK(sub == crop(*record.components, roi));

    CHECK(testutil::throws_containing(
        [&] { node->predict({"scene", view, PixelRect{10, 6, 4, 4}}); }, "bounds"));

    auto damage_stage = [&] { oracle_node(Stage::DamageState, store); };
    CHECK_THROWS_AS(damage_stage(), Error);
}

TEST_CASE("oracle node reports missing ground truth by stage") {
    Scene scene;
    scene.manifest.entries[0].foreground.reset();
    auto store = std::make_shared<const LabelStore>(scene.manifest);
    auto node = oracle_node(Stage::Foreground, store);
    ImageRecord record = load_record(scene.manifest, scene.manifest.entries[0]);
    CHECK(testutil::throws_containing(
        [&] { node->predict({"scene", record.rgb, PixelRect{0, 0, 12, 8}}); },
        "no ground truth layer"));
}

TEST_CASE("external node reads the per-stage directory layout") {
    Scene scene;
    TempDir ext;
    ImageRecord record = scene.record();
    write_png(ext.path / "components" / "scene.png", *record.components);
    auto node = external_mask_node(Stage::Components, ext.path);
    CHECK(node->kind() == "external");
    MaskLayer full = node->predict({"scene", record.rgb, PixelRect{0, 0, 12, 8}});
    CHECK(full == *record.components);

    // missing file names the id and the path it looked for
    CHECK(testutil::throws_containing(
        [&] { node->predict({"other", record.rgb, PixelRect{0, 0, 12, 8}}); }, "other"));

    // size mismatches surface as stage-tagged errors at the pipeline level
    TempDir wrong;
    MaskLayer small = MaskLayer::make(4, 4, CodeTable::Component);
    write_png(wrong.path / "components" / "scene.png", small);
    PipelineConfig cfg = oracle_config(scene.manifest);
    cfg.components = external_mask_node(Stage::Components, wrong.path);
    CHECK_THROWS_AS(run_pipeline(cfg, record), Error);
}

TEST_CASE("constant nodes emit one code, validated against the stage") {
    Scene scene;
    auto node = constant_node(Stage::Components, 3);
    MaskLayer mask = node->predict({"scene", scene.record().rgb, PixelRect{0, 0, 12, 8}});
    CHECK(mask.count(3) == 96);
    CHECK(mask.table == CodeTable::Component);
    CHECK_THROWS_AS(constant_node(Stage::Foreground, 7), Error);

    auto damage = constant_damage_node(DamageState::Light);
    ComponentInstance inst;
    inst.pixels = {{0, 0}};
    Raster patch = Raster::make(4, 4, 3);
    CHECK(damage->predict({"scene", inst, patch, FeatureVector{}}) == DamageState::Light);
}

TEST_CASE("classifier damage node wraps a fitted model") {
    std::vector<LabeledVector> data = {
        {FeatureVector{1, 0.1, 0, 0, 0}, DamageState::NoDamage},
        {FeatureVector{1, 0.1, 0.5, 0, 0}, DamageState::Light},
    };
    auto node = classifier_damage_node(ShallowModel(DecisionTree::fit(data)));
    CHECK(std::string(node->kind()).find("decision_tree") != std::string::npos);
    ComponentInstance inst;
    Raster patch = Raster::make(4, 4, 3);
    CHECK(node->predict({"x", inst, patch, FeatureVector{1, 0.1, 0.6, 0, 0}}) ==
          DamageState::Light);
    CHECK_THROWS_AS(classifier_damage_node(ShallowModel{}), Error);
}

TEST_CASE("config validation names the missing or mismatched slot") {
    Scene scene;
    PipelineConfig cfg = oracle_config(scene.manifest);
    CHECK_NOTHROW(cfg.validate());

    PipelineConfig missing = cfg;
    missing.damage.reset();
    CHECK_THROWS_AS(missing.validate(), Error);

    PipelineConfig swapped = cfg;
    auto store = std::make_shared<const LabelStore>(scene.manifest);
    swapped.foreground = oracle_node(Stage::Components, store);
    CHECK(testutil::throws_containing([&] { swapped.validate(); }, "foreground"));

    PipelineConfig bad = cfg;
    bad.params.padding_fraction = 2.0;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = cfg;
    bad.params.patch_side = 0;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = cfg;
    bad.params.min_instance_px = 0;
    CHECK_THROWS_AS(bad.validate(), Error);
    bad = cfg;
    bad.params.overlay_alpha = -0.5;
    CHECK_THROWS_AS(bad.validate(), Error);
}

TEST_CASE("all-oracle run reproduces the ground truth end to end") {
    Scene scene;
    PipelineConfig cfg = oracle_config(scene.manifest);
    cfg.params.min_instance_px = 1;
    cfg.params.patch_side = 16;
    ImageRecord record = scene.record();
    StructureReport report = run_pipeline(cfg, record);

    CHECK(report.image_id == "scene");
    CHECK(report.foreground == *record.foreground);
    CHECK(report.components == *record.components);
    CHECK(report.defect_layers.at(DefectClass::Cracking) ==
          record.defects.at(DefectClass::Cracking));
    CHECK(report.defect_layers.at(DefectClass::Spalling) ==
          record.defects.at(DefectClass::Spalling));
    CHECK(report.defect_layers.at(DefectClass::ExposedRebar) ==
          record.defects.at(DefectClass::ExposedRebar));

    REQUIRE(report.instances.size() == 2);
    const InstanceReport& wall = report.instances[0];
    CHECK(wall.component == 1);
    CHECK(wall.pixel_count == 16);
    CHECK(wall.bbox == PixelRect{2, 2, 4, 4});
    CHECK(wall.features.crack_ratio == doctest::Approx(4.0 / 16.0).epsilon(1e-12));
    CHECK(wall.features.spalling_ratio == doctest::Approx(2.0 / 16.0).epsilon(1e-12));
    CHECK(wall.features.element_size_ratio == doctest::Approx(16.0 / 96.0).epsilon(1e-12));
    CHECK(wall.state == DamageState::Moderate);
    const InstanceReport& column = report.instances[1];
    CHECK(column.component == 3);
    CHECK(column.state == DamageState::Severe);
    CHECK(column.features.rebar_ratio == doctest::Approx(1.0 / 6.0).epsilon(1e-12));

    CHECK(report.overlay.width == 12);
    CHECK(report.overlay.height == 8);

    auto doc = report.to_json();
    CHECK(doc["image_id"] == "scene");
    CHECK(doc["instances"].size() == 2);
    CHECK(doc["instances"][0]["features"].contains("crack_ratio"));
}

TEST_CASE("instance size threshold filters the pipeline too") {
    Scene scene;
    PipelineConfig cfg = oracle_config(scene.manifest);
    cfg.params.min_instance_px = 10;
    cfg.params.patch_side = 16;
    StructureReport report = run_pipeline(cfg, scene.record());
    REQUIRE(report.instances.size() == 1);
    CHECK(report.instances[0].component == 1);
    // the skipped column leaves its rebar undetected
    CHECK(report.defect_layers.at(DefectClass::ExposedRebar).count(1) == 0);
}

TEST_CASE("overlay renders only when alpha is positive") {
    Scene scene;
    PipelineConfig cfg = oracle_config(scene.manifest);
    cfg.params.min_instance_px = 1;
    cfg.params.patch_side = 16;
    cfg.params.overlay_alpha = 0.0;
    ImageRecord record = scene.record();
    StructureReport plain = run_pipeline(cfg, record);
    CHECK(plain.overlay == record.rgb);

    cfg.params.overlay_alpha = 0.6;
    StructureReport tinted = run_pipeline(cfg, record);
    CHECK(tinted.overlay.at(3, 3, 0) != record.rgb.at(3, 3, 0));
    // background pixels stay untouched
    CHECK(tinted.overlay.at(0, 0, 0) == record.rgb.at(0, 0, 0));
}

TEST_CASE("evaluation scores every stage at one under the oracle") {
    TempDir dir;
    FixtureSpec spec;
    spec.image_count = 4;
    spec.width = 48;
    spec.height = 48;
    FixtureResult fixture = generate_fixture_dataset(spec, 21, dir.path);
    PipelineConfig cfg = oracle_config(fixture.manifest);
    EvaluationResult result = evaluate_pipeline(cfg, fixture.manifest, 1);
    CHECK(result.images_evaluated == 4);
    CHECK(result.failures.empty());
    CHECK(all_stage_means_are_one(result));
    CHECK(result.stages.count("task0_foreground") == 1);
    CHECK(result.stages.count("task1_cracking") == 1);
    CHECK(result.stages.count("task1_spalling") == 1);
    CHECK(result.stages.count("task1_rebar") == 1);
    CHECK(result.stages.count("task2_components") == 1);
    CHECK(result.stages.count("task3_damage") == 1);
}

TEST_CASE("evaluation is independent of the job count") {
    TempDir dir;
    FixtureSpec spec;
    spec.image_count = 6;
    spec.width = 48;
    spec.height = 48;
    FixtureResult fixture = generate_fixture_dataset(spec, 33, dir.path);
    PipelineConfig cfg = oracle_config(fixture.manifest);
    cfg.damage = constant_damage_node(DamageState::Light); // imperfect, so order could matter
    cfg.components = constant_node(Stage::Components, 1);
    EvaluationResult seq = evaluate_pipeline(cfg, fixture.manifest, 1);
    EvaluationResult par = evaluate_pipeline(cfg, fixture.manifest, 4);
    CHECK(seq.to_json() == par.to_json());
}

TEST_CASE("constant damage scores exactly the planted share") {
    TempDir dir;
    FixtureSpec spec;
    spec.image_count = 5;
    spec.width = 48;
    spec.height = 48;
    FixtureResult fixture = generate_fixture_dataset(spec, 41, dir.path);
    FixtureSidecar sidecar = load_sidecar(fixture.sidecar_path);
    std::uint64_t severe = 0, total = 0;
    for (const auto& img : sidecar.images)
        for (const auto& inst : img.instances) {
            ++total;
            if (inst.state == DamageState::Severe) ++severe;
        }
    REQUIRE(total > 0);

    PipelineConfig cfg = oracle_config(fixture.manifest);
    cfg.damage = constant_damage_node(DamageState::Severe);
    EvaluationResult result = evaluate_pipeline(cfg, fixture.manifest, 1);
    const MetricsReport& report = result.stages.at("task3_damage");
    CHECK(report.average_accuracy ==
          doctest::Approx(static_cast<double>(severe) / static_cast<double>(total))
              .epsilon(1e-12));
    CHECK(report.confusion.total() == total);
}

TEST_CASE("a broken image is reported, not fatal") {
    TempDir dir;
    FixtureSpec spec;
    spec.image_count = 3;
    spec.width = 48;
    spec.height = 48;
    FixtureResult fixture = generate_fixture_dataset(spec, 55, dir.path);
    Manifest manifest = fixture.manifest;
    manifest.entries[1].components.reset(); // oracle components has nothing to answer

    PipelineConfig cfg = oracle_config(manifest);
    EvaluationResult result = evaluate_pipeline(cfg, manifest, 1);
    CHECK(result.images_evaluated == 2);
    REQUIRE(result.failures.size() == 1);
    CHECK(result.failures[0].find(manifest.entries[1].id) != std::string::npos);
    CHECK(result.stages.count("task2_components") == 1);
}

TEST_CASE("swapping one stage moves only its own metrics") {
    TempDir dir;
    FixtureSpec spec;
    spec.image_count = 4;
    spec.width = 48;
    spec.height = 48;
    FixtureResult fixture = generate_fixture_dataset(spec, 67, dir.path);

    PipelineConfig poor = oracle_config(fixture.manifest);
    poor.components = constant_node(Stage::Components, 1);
    EvaluationResult before = evaluate_pipeline(poor, fixture.manifest, 1);
    CHECK(before.stages.at("task2_components").mean_iou < 1.0);
    CHECK(before.stages.at("task0_foreground").mean_iou == 1.0);

    PipelineConfig fixed = oracle_config(fixture.manifest);
    EvaluationResult after = evaluate_pipeline(fixed, fixture.manifest, 1);
    CHECK(after.stages.at("task2_components").mean_iou == 1.0);
    CHECK(after.stages.at("task0_foreground").mean_iou ==
          before.stages.at("task0_foreground").mean_iou);
}

} // TEST_SUITE
