#include <cstdlib>
#include <fstream>
#include <string>
#include <sys/wait.h>
#include <vector>

#include "doctest.h"
#include "helpers.hpp"
#include "json.hpp"
#include "shmpipe/dataset.hpp"
#include "shmpipe/fixture.hpp"
#include "shmpipe/manifest.hpp"

using nlohmann::json;
using testutil::TempDir;

namespace {

struct CliResult {
    int code = -1;
    std::string out;
};

/// Runs the installed binary with stdout captured, stderr discarded.
CliResult run_cli(const std::string& args) {
    static const std::string exe = SHMPIPE_CLI_PATH;
    TempDir scratch;
    std::filesystem::path capture = scratch / "stdout.txt";
    std::string cmd = exe + " " + args + " > " + capture.string() + " 2>/dev/null";
    int raw = std::system(cmd.c_str());
    CliResult result;
    result.code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
    result.out = testutil::read_file(capture);
    return result;
}

json load_json(const std::filesystem::path& path) {
    std::ifstream in(path);
    REQUIRE(in.good());
    return json::parse(in);
}

/// Small on-disk dataset shared by the subcommand tests.
struct CliFixture {
    TempDir dir;
    std::filesystem::path manifest_path;

    explicit CliFixture(int images = 4, int seed = 7) {
        std::string args = "fixture --out " + (dir / "fix").string() +
                           " --seed " + std::to_string(seed) +
                           " --images " + std::to_string(images) + " --width 48 --height 48";
        REQUIRE(run_cli(args).code == 0);
        manifest_path = dir / "fix" / "manifest.json";
        REQUIRE(std::filesystem::exists(manifest_path));
    }
};

} // namespace

TEST_SUITE("cli") {

TEST_CASE("bad invocations exit with a usage failure") {
    CHECK(run_cli("").code == 1);
    CHECK(run_cli("frobnicate").code == 1);
    CliResult help = run_cli("--help");
    CHECK(help.code == 0);
    CHECK(help.out.find("fixture") != std::string::npos);
    CHECK(help.out.find("eval") != std::string::npos);
}

TEST_CASE("runtime failures exit separately from usage failures") {
    CliFixture fx(2);
    // absent manifest file is a runtime failure
    CHECK(run_cli("eval --manifest /nonexistent/m.json --oracle-all").code == 2);
    // malformed node spec is caught before any work starts
    CHECK(run_cli("eval --manifest " + fx.manifest_path.string() +
                  " --foreground bogus:spec --oracle-all")
              .code == 1);
    // unbound stages without --oracle-all are rejected
    CHECK(run_cli("eval --manifest " + fx.manifest_path.string()).code == 1);
    // the forest fit is stochastic, so it insists on a seed
    CHECK(run_cli("fit forest --manifest " + fx.manifest_path.string() + " --out " +
                  (fx.dir / "f.json").string())
              .code == 1);
}

TEST_CASE("oracle evaluation of a generated dataset is perfect") {
    CliFixture fx(3);
    std::filesystem::path report = fx.dir / "eval.json";
    CliResult r = run_cli("eval --manifest " + fx.manifest_path.string() +
                          " --oracle-all --out " + report.string());
    CHECK(r.code == 0);
    json doc = load_json(report);
    CHECK(doc["images_evaluated"] == 3);
    CHECK(doc["failures"].empty());
    REQUIRE(doc["stages"].size() == 6);
    for (const auto& [key, stage] : doc["stages"].items()) {
        if (stage["kind"] == "segmentation") {
            CHECK(stage["mean_iou"] == 1.0);
            CHECK(stage["mean_pixel_accuracy"] == 1.0);
        } else {
            CHECK(stage["average_accuracy"] == 1.0);
            CHECK(stage["macro_f1"] == 1.0);
        }
    }
}

TEST_CASE("fixture generation is reproducible byte for byte") {
    TempDir dir;
    std::string common = " --seed 99 --images 2 --width 48 --height 48";
    REQUIRE(run_cli("fixture --out " + (dir / "a").string() + common).code == 0);
    REQUIRE(run_cli("fixture --out " + (dir / "b").string() + common).code == 0);
    CHECK(testutil::read_file(dir / "a" / "manifest.json") ==
          testutil::read_file(dir / "b" / "manifest.json"));
    CHECK(testutil::read_file(dir / "a" / "sidecar.json") ==
          testutil::read_file(dir / "b" / "sidecar.json"));
}

TEST_CASE("split writes a stable disjoint partition") {
    CliFixture fx(5);
    std::string common = "split --manifest " + fx.manifest_path.string() +
                         " --test-fraction 0.2 --seed 11 --out ";
    REQUIRE(run_cli(common + (fx.dir / "s1").string()).code == 0);
    REQUIRE(run_cli(common + (fx.dir / "s2").string()).code == 0);
    CHECK(testutil::read_file(fx.dir / "s1" / "train.json") ==
          testutil::read_file(fx.dir / "s2" / "train.json"));
    CHECK(testutil::read_file(fx.dir / "s1" / "test.json") ==
          testutil::read_file(fx.dir / "s2" / "test.json"));

    shmpipe::Manifest train = shmpipe::load_manifest(fx.dir / "s1" / "train.json");
    shmpipe::Manifest test = shmpipe::load_manifest(fx.dir / "s1" / "test.json");
    CHECK(train.entries.size() == 4);
    CHECK(test.entries.size() == 1);
    CHECK(train.split == shmpipe::SplitTag::Train);
    CHECK(test.split == shmpipe::SplitTag::Test);
}

TEST_CASE("audit matches the in-process tallies") {
    CliFixture fx(4);
    std::filesystem::path out = fx.dir / "audit.json";
    REQUIRE(run_cli("audit --manifest " + fx.manifest_path.string() + " --out " + out.string())
                .code == 0);
    json doc = load_json(out);

    shmpipe::Manifest manifest = shmpipe::load_manifest(fx.manifest_path);
    shmpipe::CollisionReport collisions = shmpipe::audit_collisions(manifest);
    CHECK(doc["images"] == collisions.images_scanned);
    CHECK(doc["collisions"]["cracking+spalling"] ==
          collisions.at(shmpipe::DefectClass::Cracking, shmpipe::DefectClass::Spalling));
    CHECK(doc["collisions"]["cracking+exposed_rebar"] ==
          collisions.at(shmpipe::DefectClass::Cracking, shmpipe::DefectClass::ExposedRebar));
    CHECK(doc["collisions"]["spalling+exposed_rebar"] ==
          collisions.at(shmpipe::DefectClass::Spalling, shmpipe::DefectClass::ExposedRebar));
    CHECK(doc["pixel_stats"].contains("components"));
    CHECK(doc["pixel_stats"].contains("damage"));
}

TEST_CASE("prepare subcommands leave their artifacts behind") {
    CliFixture fx(3);
    std::string m = " --manifest " + fx.manifest_path.string();

    std::filesystem::path t0 = fx.dir / "t0";
    REQUIRE(run_cli("prepare task0" + m + " --out " + t0.string()).code == 0);
    CHECK(std::filesystem::exists(t0 / "manifest.json"));
    CHECK(std::filesystem::is_directory(t0 / "foreground"));

    std::filesystem::path crops = fx.dir / "crops";
    REQUIRE(run_cli("prepare defects" + m + " --out " + crops.string()).code == 0);
    CHECK(std::filesystem::exists(crops / "index.csv"));
    std::string index = testutil::read_file(crops / "index.csv");
    CHECK(index.find("file,source_id,instance_id,defect") != std::string::npos);

    std::filesystem::path surf = fx.dir / "surf";
    REQUIRE(run_cli("prepare surfaces" + m + " --out " + surf.string() + " --patch-side 32")
                .code == 0);
    CHECK(std::filesystem::exists(surf / "index.csv"));
}

TEST_CASE("fit produces a model the evaluator can consume") {
    CliFixture fx(6, 19);
    std::filesystem::path model = fx.dir / "tree.json";
    CliResult fit = run_cli("fit tree --manifest " + fx.manifest_path.string() + " --out " +
                            model.string());
    REQUIRE(fit.code == 0);
    json doc = load_json(model);
    CHECK(doc["kind"] == "decision_tree");

    std::filesystem::path report = fx.dir / "eval.json";
    CliResult ev = run_cli("eval --manifest " + fx.manifest_path.string() +
                           " --oracle-all --damage model:" + model.string() + " --out " +
                           report.string());
    REQUIRE(ev.code == 0);
    json evdoc = load_json(report);
    CHECK(evdoc["stages"]["task3_damage"]["average_accuracy"] == 1.0);
}

TEST_CASE("run writes reports, overlays and stage masks") {
    CliFixture fx(2);
    std::filesystem::path out = fx.dir / "run";
    REQUIRE(run_cli("run --manifest " + fx.manifest_path.string() + " --oracle-all --out " +
                    out.string())
                .code == 0);

    shmpipe::Manifest manifest = shmpipe::load_manifest(fx.manifest_path);
    for (const auto& entry : manifest.entries) {
        CHECK(std::filesystem::exists(out / "reports" / (entry.id + ".json")));
        CHECK(std::filesystem::exists(out / "overlays" / (entry.id + ".png")));
        CHECK(std::filesystem::exists(out / "masks" / "components" / (entry.id + ".png")));
        CHECK(std::filesystem::exists(out / "masks" / "foreground" / (entry.id + ".png")));
    }
    json report = load_json(out / "reports" / (manifest.entries[0].id + ".json"));
    CHECK(report.contains("instances"));

    // the per-stage mask layout doubles as an external-node directory
    std::filesystem::path report2 = fx.dir / "ext_eval.json";
    CliResult ev = run_cli("eval --manifest " + fx.manifest_path.string() +
                           " --foreground external:" + out.string() + "/masks" +
                           " --components external:" + out.string() + "/masks" +
                           " --oracle-all --out " + report2.string());
    REQUIRE(ev.code == 0);
    json evdoc = load_json(report2);
    CHECK(evdoc["stages"]["task2_components"]["mean_iou"] == 1.0);
}

} // TEST_SUITE
