#include <cstdlib>
#include <set>

#include "doctest.h"
#include "helpers.hpp"
#include "json.hpp"
#include "oracles.hpp"
#include "shmpipe/error.hpp"
#include "shmpipe/label_mapping.hpp"
#include "shmpipe/manifest.hpp"
#include "shmpipe/parallel.hpp"
#include "shmpipe/png_io.hpp"
#include "shmpipe/rng.hpp"

using namespace shmpipe;
using testutil::TempDir;

TEST_SUITE("core") {

TEST_CASE("class names and codes round trip") {
    CHECK(name_of(ComponentClass::WindowFrame) == "window_frame");
    CHECK(name_of(DefectClass::ExposedRebar) == "exposed_rebar");
    CHECK(name_of(DamageState::NoDamage) == "no_damage");
    for (int c = 0; c < kComponentClassCount; ++c) {
        auto cls = component_class_from_code(static_cast<std::uint8_t>(c));
        REQUIRE(cls.has_value());
        CHECK(component_class_from_name(name_of(*cls)) == *cls);
        CHECK(code_of(*cls) == c);
    }
    for (DefectClass d : kDefectClasses) {
        CHECK(defect_class_from_name(name_of(d)) == d);
        CHECK(defect_class_from_code(code_of(d)) == d);
    }
    for (int s = 0; s < kDamageStateCount; ++s) {
        auto state = damage_state_from_code(static_cast<std::uint8_t>(s));
        REQUIRE(state.has_value());
        CHECK(damage_state_from_name(name_of(*state)) == *state);
    }
    CHECK_FALSE(component_class_from_code(8).has_value());
    CHECK_FALSE(defect_class_from_code(0).has_value());
    CHECK_FALSE(defect_class_from_code(4).has_value());
    CHECK_FALSE(damage_state_from_code(4).has_value());
    CHECK_FALSE(component_class_from_name("roof").has_value());
}

TEST_CASE("code tables") {
    CHECK(code_table_max(CodeTable::Binary) == 1);
    CHECK(code_table_max(CodeTable::Component) == 7);
    CHECK(code_table_max(CodeTable::Damage) == 3);
    CHECK(code_table_size(CodeTable::Component) == 8);
    CHECK(code_table_from_name("damage") == CodeTable::Damage);
    CHECK_FALSE(code_table_from_name("other").has_value());
    CHECK(class_name_in_table(CodeTable::Component, 3) == "column");
    CHECK(class_name_in_table(CodeTable::Damage, 2) == "moderate");
    CHECK(class_name_in_table(CodeTable::Binary, 1) == "positive");
}

TEST_CASE("raster and mask basics") {
    Raster r = Raster::make(4, 3, 3, 9);
    CHECK(r.pixel_count() == 12);
    CHECK(r.at(3, 2, 2) == 9);
    r.at(1, 2, 0) = 77;
    CHECK(r.at(1, 2, 0) == 77);
    CHECK(r.contains(3, 2));
    CHECK_FALSE(r.contains(4, 2));

    MaskLayer m = MaskLayer::make(5, 2, CodeTable::Damage, 3);
    CHECK(m.codes_valid());
    CHECK(m.count(3) == 10);
    m.at(0, 0) = 4;
    CHECK_FALSE(m.codes_valid());
}

TEST_CASE("crop copies the requested window") {
    Raster r = testutil::patterned_rgb(10, 8);
    Raster sub = crop(r, PixelRect{3, 2, 4, 5});
    CHECK(sub.width == 4);
    CHECK(sub.height == 5);
    for (int y = 0; y < 5; ++y)
        for (int x = 0; x < 4; ++x)
            for (int c = 0; c < 3; ++c) CHECK(sub.at(x, y, c) == r.at(x + 3, y + 2, c));

    MaskLayer m = testutil::mask_from_rows({"0123", "4567", "0011"}, CodeTable::Component);
    MaskLayer msub = crop(m, PixelRect{1, 1, 3, 2});
    CHECK(msub.at(0, 0) == 5);
    CHECK(msub.at(2, 1) == 1);
    CHECK_THROWS_AS(crop(m, PixelRect{2, 0, 3, 2}), Error);
}

TEST_CASE("png round trips") {
    TempDir dir;
    Raster rgb = testutil::patterned_rgb(13, 7);
    write_png(dir / "a.png", rgb);
    CHECK(read_png(dir / "a.png") == rgb);

    PngSize size = probe_png_size(dir / "a.png");
    CHECK(size.width == 13);
    CHECK(size.height == 7);

    MaskLayer mask = testutil::mask_from_rows({"012", "345", "670"}, CodeTable::Component);
    write_png(dir / "m.png", mask);
    CHECK(read_mask_png(dir / "m.png", CodeTable::Component) == mask);

    // out-of-table codes are rejected at read time
    CHECK(testutil::throws_containing(
        [&] { read_mask_png(dir / "m.png", CodeTable::Damage); }, "damage"));
    // multi-channel files are not masks
    CHECK_THROWS_AS(read_mask_png(dir / "a.png", CodeTable::Binary), Error);
    CHECK_THROWS_AS(read_png(dir / "missing.png"), Error);
    CHECK_THROWS_AS(probe_png_size(dir / "missing.png"), Error);

    // parent directories are created on write
    write_png(dir / "deep/nested/x.png", mask);
    CHECK(std::filesystem::exists(dir / "deep/nested/x.png"));
}

TEST_CASE("grayscale rasters survive the png round trip") {
    TempDir dir;
    Raster gray = Raster::make(6, 4, 1);
    for (int y = 0; y < 4; ++y)
        for (int x = 0; x < 6; ++x) gray.at(x, y) = static_cast<std::uint8_t>(40 * y + x);
    write_png(dir / "g.png", gray);
    Raster back = read_png(dir / "g.png");
    CHECK(back == gray);
}

TEST_CASE("splitmix64 matches the reference stream") {
    // values computed with an independent implementation of the algorithm
    SplitMix64 rng(1234567);
    CHECK(rng.next() == 6457827717110365317ull);
    CHECK(rng.next() == 3203168211198807973ull);
    CHECK(rng.next() == 9817491932198370423ull);
    SplitMix64 zero(0);
    CHECK(zero.next() == 0xe220a8397b1dcdafull);

    CHECK(derive_seed(7, 0) == 0x63cbe1e459320dd7ull);
    CHECK(derive_seed(7, 1) == 0x044c3cd7f43c661cull);
    CHECK(derive_seed(7, 2) == 0xe6984080bab12a02ull);
}

TEST_CASE("derived seeds are distinct per stream") {
    std::set<std::uint64_t> seen;
    for (std::uint64_t stream = 0; stream < 64; ++stream) seen.insert(derive_seed(42, stream));
    CHECK(seen.size() == 64);
}

TEST_CASE("next_below and next_unit stay in range") {
    SplitMix64 rng(99);
    for (int i = 0; i < 1000; ++i) {
        CHECK(rng.next_below(7) < 7);
        double u = rng.next_unit();
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
}

TEST_CASE("shuffle is a seeded permutation") {
    std::vector<int> values(100);
    for (int i = 0; i < 100; ++i) values[i] = i;
    std::vector<int> a = values, b = values, c = values;
    SplitMix64 r1(5), r2(5), r3(6);
    shuffle(std::span<int>(a), r1);
    shuffle(std::span<int>(b), r2);
    shuffle(std::span<int>(c), r3);
    CHECK(a == b);
    CHECK(a != c);
    std::vector<int> sorted = a;
    std::sort(sorted.begin(), sorted.end());
    CHECK(sorted == values);
}

TEST_CASE("parallel_for fills per-index slots identically at any job count") {
    std::vector<int> seq(500, 0), par(500, 0);
    parallel_for(500, 1, [&](std::size_t i) { seq[i] = static_cast<int>(i * i % 97); });
    parallel_for(500, 4, [&](std::size_t i) { par[i] = static_cast<int>(i * i % 97); });
    CHECK(seq == par);
}

TEST_CASE("parallel_for propagates worker exceptions") {
    CHECK_THROWS_AS(parallel_for(8, 3,
                                 [&](std::size_t i) {
                                     if (i == 5) throw Error("boom");
                                 }),
                    Error);
}

TEST_CASE("default_jobs reads SHM_JOBS") {
    setenv("SHM_JOBS", "5", 1);
    CHECK(default_jobs() == 5);
    setenv("SHM_JOBS", "not a number", 1);
    CHECK(default_jobs() == 1);
    setenv("SHM_JOBS", "-3", 1);
    CHECK(default_jobs() == 1);
    unsetenv("SHM_JOBS");
    CHECK(default_jobs() == 1);
}

TEST_CASE("errors carry their stage tag") {
    Error plain("broken");
    CHECK(plain.stage().empty());
    Error tagged("components", "broken");
    CHECK(tagged.stage() == "components");
    CHECK(std::string(tagged.what()).find("stage components") != std::string::npos);
}

namespace {

/// Writes a two-entry dataset with every layer and returns the manifest path.
std::filesystem::path write_dataset(const TempDir& dir) {
    for (const char* id : {"img_a", "img_b"}) {
        write_png(dir.path / "rgb" / (std::string(id) + ".png"), testutil::patterned_rgb(8, 6));
        MaskLayer comp = MaskLayer::make(8, 6, CodeTable::Component);
        for (int y = 1; y < 4; ++y)
            for (int x = 1; x < 5; ++x) comp.at(x, y) = 1;
        write_png(dir.path / "comp" / (std::string(id) + ".png"), comp);
        MaskLayer crack = MaskLayer::make(8, 6, CodeTable::Binary);
        crack.at(2, 2) = 1;
        write_png(dir.path / "crack" / (std::string(id) + ".png"), crack);
        MaskLayer damage = MaskLayer::make(8, 6, CodeTable::Damage);
        damage.at(2, 2) = 1;
        write_png(dir.path / "dmg" / (std::string(id) + ".png"), damage);
    }
    nlohmann::ordered_json doc;
    doc["entries"] = nlohmann::ordered_json::array();
    for (const char* id : {"img_a", "img_b"}) {
        nlohmann::ordered_json e;
        e["id"] = id;
        e["rgb"] = "rgb/" + std::string(id) + ".png";
        e["components"] = "comp/" + std::string(id) + ".png";
        e["defects"] = {{"cracking", "crack/" + std::string(id) + ".png"}};
        e["damage"] = "dmg/" + std::string(id) + ".png";
        doc["entries"].push_back(e);
    }
    doc["split"] = "train";
    auto path = dir.path / "manifest.json";
    testutil::write_file(path, doc.dump(2));
    return path;
}

} // namespace

TEST_CASE("manifest load resolves and validates") {
    TempDir dir;
    auto path = write_dataset(dir);
    Manifest man = load_manifest(path);
    CHECK(man.entries.size() == 2);
    CHECK(man.split == SplitTag::Train);
    CHECK(man.entries[0].id == "img_a");
    CHECK(std::filesystem::exists(man.resolve(man.entries[0].rgb)));
    CHECK(man.entries[0].defects.count(DefectClass::Cracking) == 1);
    CHECK_FALSE(man.entries[0].foreground.has_value());

    const ManifestEntry& found = find_entry(man, "img_b");
    CHECK(found.id == "img_b");
    CHECK(testutil::throws_containing([&] { find_entry(man, "nope"); }, "unknown image id"));
}

TEST_CASE("manifest rejects duplicate ids and missing layers") {
    TempDir dir;
    auto path = write_dataset(dir);

    auto doc = nlohmann::ordered_json::parse(testutil::read_file(path));
    doc["entries"][1]["id"] = "img_a";
    testutil::write_file(dir / "dup.json", doc.dump());
    CHECK(testutil::throws_containing([&] { load_manifest(dir / "dup.json"); }, "duplicate"));

    doc = nlohmann::ordered_json::parse(testutil::read_file(path));
    doc["entries"][0]["damage"] = "dmg/gone.png";
    testutil::write_file(dir / "missing.json", doc.dump());
    CHECK(testutil::throws_containing([&] { load_manifest(dir / "missing.json"); },
                                      "missing layer"));

    // a mask whose header size differs from the frame is rejected at load
    MaskLayer small = MaskLayer::make(4, 4, CodeTable::Damage);
    write_png(dir.path / "dmg" / "small.png", small);
    doc = nlohmann::ordered_json::parse(testutil::read_file(path));
    doc["entries"][0]["damage"] = "dmg/small.png";
    testutil::write_file(dir / "shape.json", doc.dump());
    CHECK_THROWS_AS(load_manifest(dir / "shape.json"), Error);

    testutil::write_file(dir / "bad.json", "{not json");
    CHECK_THROWS_AS(load_manifest(dir / "bad.json"), Error);
    CHECK_THROWS_AS(load_manifest(dir / "absent.json"), Error);
}

TEST_CASE("manifest save rewrites paths relative to its new home") {
    TempDir dir;
    Manifest man = load_manifest(write_dataset(dir));
    std::filesystem::create_directories(dir / "elsewhere");
    save_manifest(man, dir.path / "elsewhere" / "manifest.json");
    Manifest moved = load_manifest(dir.path / "elsewhere" / "manifest.json");
    REQUIRE(moved.entries.size() == man.entries.size());
    for (std::size_t i = 0; i < man.entries.size(); ++i) {
        CHECK(moved.entries[i].id == man.entries[i].id);
        CHECK(std::filesystem::equivalent(moved.resolve(moved.entries[i].rgb),
                                          man.resolve(man.entries[i].rgb)));
    }
    CHECK(moved.split == SplitTag::Train);

    // byte-stable output
    save_manifest(man, dir.path / "elsewhere" / "again.json");
    CHECK(testutil::read_file(dir.path / "elsewhere" / "manifest.json") ==
          testutil::read_file(dir.path / "elsewhere" / "again.json"));
}

TEST_CASE("load_record decodes every layer") {
    TempDir dir;
    Manifest man = load_manifest(write_dataset(dir));
    ImageRecord record = load_record(man, man.entries[0]);
    CHECK(record.id == "img_a");
    CHECK(record.rgb.channels == 3);
    REQUIRE(record.components.has_value());
    CHECK(record.components->count(1) == 12);
    CHECK(record.defects.at(DefectClass::Cracking).count(1) == 1);
    REQUIRE(record.damage.has_value());
    CHECK_FALSE(record.foreground.has_value());
}

TEST_CASE("split tags round trip") {
    for (SplitTag tag : {SplitTag::Unsplit, SplitTag::Train, SplitTag::Test})
        CHECK(split_tag_from_name(split_tag_name(tag)) == tag);
    CHECK_FALSE(split_tag_from_name("validation").has_value());
}

TEST_CASE("label mapping converts colored rasters") {
    TempDir dir;
    nlohmann::ordered_json doc;
    doc["table"] = "component";
    doc["map"] = nlohmann::ordered_json::array();
    doc["map"].push_back({{"rgb", {0, 0, 0}}, {"code", 0}});
    doc["map"].push_back({{"rgb", {200, 30, 30}}, {"code", 3}});
    testutil::write_file(dir / "map.json", doc.dump());
    LabelMapping mapping = load_label_mapping(dir / "map.json");
    CHECK(mapping.table == CodeTable::Component);
    CHECK(mapping.colors.size() == 2);

    Raster colored = Raster::make(3, 2, 3);
    colored.at(1, 0, 0) = 200;
    colored.at(1, 0, 1) = 30;
    colored.at(1, 0, 2) = 30;
    MaskLayer mask = apply_label_mapping(colored, mapping);
    CHECK(mask.at(1, 0) == 3);
    CHECK(mask.at(0, 0) == 0);
    CHECK(mask.table == CodeTable::Component);

    colored.at(2, 1, 0) = 9; // unmapped color
    CHECK(testutil::throws_containing([&] { apply_label_mapping(colored, mapping); }, "(9,0,0)"));

    doc["map"].push_back({{"rgb", {200, 30, 30}}, {"code", 4}});
    testutil::write_file(dir / "dup.json", doc.dump());
    CHECK(testutil::throws_containing([&] { load_label_mapping(dir / "dup.json"); },
                                      "duplicate color"));

    doc["map"].erase(doc["map"].size() - 1);
    doc["map"].push_back({{"rgb", {1, 1, 1}}, {"code", 12}});
    testutil::write_file(dir / "range.json", doc.dump());
    CHECK_THROWS_AS(load_label_mapping(dir / "range.json"), Error);
}

} // TEST_SUITE
