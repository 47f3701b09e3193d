#include <cstring>
#include <memory>
#include <string>
#include <vector>

#include <pybind11/numpy.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>
#include <pybind11/stl/filesystem.h>

#include "shmpipe/dataset.hpp"
#include "shmpipe/error.hpp"
#include "shmpipe/fixture.hpp"
#include "shmpipe/manifest.hpp"
#include "shmpipe/metrics.hpp"
#include "shmpipe/pipeline.hpp"
#include "shmpipe/png_io.hpp"
#include "shmpipe/shallow.hpp"

namespace py = pybind11;
using namespace shmpipe;

namespace {

using U8Array = py::array_t<std::uint8_t, py::array::c_style | py::array::forcecast>;

MaskLayer mask_from_array(const py::array& a, CodeTable table) {
    U8Array arr = U8Array::ensure(a);
    if (!arr || arr.ndim() != 2) throw Error("mask arrays must be 2-d uint8");
    MaskLayer mask = MaskLayer::make(static_cast<int>(arr.shape(1)),
                                     static_cast<int>(arr.shape(0)), table);
    std::memcpy(mask.codes.data(), arr.data(), mask.codes.size());
    if (!mask.codes_valid())
        throw Error("mask holds codes outside the " + std::string(code_table_name(table)) +
                    " table");
    return mask;
}

py::array_t<std::uint8_t> mask_to_array(const MaskLayer& mask) {
    py::array_t<std::uint8_t> out({mask.height, mask.width});
    std::memcpy(out.mutable_data(), mask.codes.data(), mask.codes.size());
    return out;
}

Raster raster_from_array(const py::array& a) {
    U8Array arr = U8Array::ensure(a);
    if (arr && arr.ndim() == 2) {
        Raster r = Raster::make(static_cast<int>(arr.shape(1)), static_cast<int>(arr.shape(0)), 1);
        std::memcpy(r.data.data(), arr.data(), r.data.size());
        return r;
    }
    if (arr && arr.ndim() == 3 && arr.shape(2) == 3) {
        Raster r = Raster::make(static_cast<int>(arr.shape(1)), static_cast<int>(arr.shape(0)), 3);
        std::memcpy(r.data.data(), arr.data(), r.data.size());
        return r;
    }
    throw Error("image arrays must be HxW or HxWx3 uint8");
}

py::array_t<std::uint8_t> raster_to_array(const Raster& r) {
    py::array_t<std::uint8_t> out =
        r.channels == 1 ? py::array_t<std::uint8_t>({r.height, r.width})
                        : py::array_t<std::uint8_t>({r.height, r.width, r.channels});
    std::memcpy(out.mutable_data(), r.data.data(), r.data.size());
    return out;
}

std::vector<PixelPoint> points_from_array(const py::array& a) {
    auto arr = py::array_t<std::int64_t, py::array::c_style | py::array::forcecast>::ensure(a);
    if (!arr || arr.ndim() != 2 || arr.shape(1) != 2)
        throw Error("point arrays must be Nx2 integers (x, y)");
    std::vector<PixelPoint> points(static_cast<std::size_t>(arr.shape(0)));
    auto view = arr.unchecked<2>();
    for (py::ssize_t i = 0; i < arr.shape(0); ++i)
        points[static_cast<std::size_t>(i)] = {static_cast<int>(view(i, 0)),
                                               static_cast<int>(view(i, 1))};
    return points;
}

py::object json_to_py(const nlohmann::ordered_json& j) {
    return py::module_::import("json").attr("loads")(j.dump());
}

std::uint8_t stage_code_from_text(Stage stage, const std::string& text) {
    CodeTable table = stage_code_table(stage);
    for (int c = 0; c < code_table_size(table); ++c)
        if (class_name_in_table(table, c) == text) return static_cast<std::uint8_t>(c);
    try {
        int code = std::stoi(text);
        if (code >= 0 && code <= code_table_max(table)) return static_cast<std::uint8_t>(code);
    } catch (...) {
    }
    throw Error("constant code '" + text + "' is not in the " +
                std::string(code_table_name(table)) + " table");
}

std::shared_ptr<SegmentationNode> seg_node_from_spec(Stage stage, const std::string& spec,
                                                     const std::shared_ptr<const LabelStore>& store) {
    if (spec == "oracle") return oracle_node(stage, store);
    if (spec.rfind("external:", 0) == 0) return external_mask_node(stage, spec.substr(9));
    if (spec.rfind("constant:", 0) == 0)
        return constant_node(stage, stage_code_from_text(stage, spec.substr(9)));
    throw Error("unknown node binding '" + spec + "' for stage " +
                std::string(stage_name(stage)));
}

std::shared_ptr<DamageNode> damage_node_from_spec(const std::string& spec,
                                                  const std::shared_ptr<const LabelStore>& store) {
    if (spec == "oracle") return oracle_damage_node(store);
    if (spec.rfind("model:", 0) == 0)
        return classifier_damage_node(ShallowModel::load(spec.substr(6)));
    if (spec.rfind("constant:", 0) == 0) {
        const std::string text = spec.substr(9);
        auto state = damage_state_from_name(text);
        if (!state) {
            try {
                state = damage_state_from_code(static_cast<std::uint8_t>(std::stoi(text)));
            } catch (...) {
            }
        }
        if (!state) throw Error("unknown damage state '" + text + "'");
        return constant_damage_node(*state);
    }
    throw Error("unknown node binding '" + spec + "' for stage damage");
}

py::object evaluate_py(const std::string& manifest_path, const std::string& foreground,
                       const std::string& components, const std::string& cracking,
                       const std::string& spalling, const std::string& rebar,
                       const std::string& damage, int jobs, double padding, int patch_side,
                       int min_instance_px) {
    Manifest manifest = load_manifest(manifest_path);
    auto store = std::make_shared<const LabelStore>(manifest);
    PipelineConfig cfg;
    cfg.params.padding_fraction = padding;
    cfg.params.patch_side = patch_side;
    cfg.params.min_instance_px = min_instance_px;
    cfg.foreground = seg_node_from_spec(Stage::Foreground, foreground, store);
    cfg.components = seg_node_from_spec(Stage::Components, components, store);
    cfg.defects[DefectClass::Cracking] = seg_node_from_spec(Stage::DefectCracking, cracking, store);
    cfg.defects[DefectClass::Spalling] = seg_node_from_spec(Stage::DefectSpalling, spalling, store);
    cfg.defects[DefectClass::ExposedRebar] = seg_node_from_spec(Stage::DefectRebar, rebar, store);
    cfg.damage = damage_node_from_spec(damage, store);
    EvaluationResult result;
    {
        py::gil_scoped_release release;
        result = evaluate_pipeline(cfg, manifest, jobs);
    }
    return json_to_py(result.to_json());
}

} // namespace

PYBIND11_MODULE(_shmpipe, m) {
    m.doc() = "Staged structural-inspection toolkit core";
    m.attr("__version__") = "0.1.0";

    py::register_exception<Error>(m, "Error");

    py::enum_<ComponentClass>(m, "ComponentClass")
        .value("BACKGROUND", ComponentClass::Background)
        .value("WALL", ComponentClass::Wall)
        .value("BEAM", ComponentClass::Beam)
        .value("COLUMN", ComponentClass::Column)
        .value("WINDOW_FRAME", ComponentClass::WindowFrame)
        .value("WINDOW_PANE", ComponentClass::WindowPane)
        .value("BALCONY", ComponentClass::Balcony)
        .value("SLAB", ComponentClass::Slab);

    py::enum_<DefectClass>(m, "DefectClass")
        .value("CRACKING", DefectClass::Cracking)
        .value("SPALLING", DefectClass::Spalling)
        .value("EXPOSED_REBAR", DefectClass::ExposedRebar);

    py::enum_<DamageState>(m, "DamageState")
        .value("NO_DAMAGE", DamageState::NoDamage)
        .value("LIGHT", DamageState::Light)
        .value("MODERATE", DamageState::Moderate)
        .value("SEVERE", DamageState::Severe);

    py::enum_<CodeTable>(m, "CodeTable")
        .value("BINARY", CodeTable::Binary)
        .value("COMPONENT", CodeTable::Component)
        .value("DAMAGE", CodeTable::Damage);

    py::enum_<Sampling>(m, "Sampling")
        .value("BILINEAR", Sampling::Bilinear)
        .value("NEAREST", Sampling::Nearest);

    py::class_<PixelRect>(m, "PixelRect")
        .def(py::init<>())
        .def(py::init([](int x, int y, int w, int h) { return PixelRect{x, y, w, h}; }), py::arg("x"),
             py::arg("y"), py::arg("w"), py::arg("h"))
        .def_readwrite("x", &PixelRect::x)
        .def_readwrite("y", &PixelRect::y)
        .def_readwrite("w", &PixelRect::w)
        .def_readwrite("h", &PixelRect::h)
        .def("__repr__", [](const PixelRect& r) {
            return "PixelRect(x=" + std::to_string(r.x) + ", y=" + std::to_string(r.y) +
                   ", w=" + std::to_string(r.w) + ", h=" + std::to_string(r.h) + ")";
        });

    py::class_<RotatedRect>(m, "RotatedRect")
        .def(py::init<>())
        .def_readwrite("cx", &RotatedRect::cx)
        .def_readwrite("cy", &RotatedRect::cy)
        .def_readwrite("w", &RotatedRect::w)
        .def_readwrite("h", &RotatedRect::h)
        .def_readwrite("angle_deg", &RotatedRect::angle_deg)
        .def("area", &RotatedRect::area)
        .def("corners", &RotatedRect::corners)
        .def("contains", &RotatedRect::contains, py::arg("x"), py::arg("y"),
             py::arg("tolerance") = 0.0)
        .def("__repr__", [](const RotatedRect& r) {
            return "RotatedRect(cx=" + std::to_string(r.cx) + ", cy=" + std::to_string(r.cy) +
                   ", w=" + std::to_string(r.w) + ", h=" + std::to_string(r.h) +
                   ", angle_deg=" + std::to_string(r.angle_deg) + ")";
        });

    py::class_<ComponentInstance>(m, "ComponentInstance")
        .def_readonly("id", &ComponentInstance::id)
        .def_readonly("class_code", &ComponentInstance::class_code)
        .def_readonly("bbox", &ComponentInstance::bbox)
        .def_property_readonly("pixels",
                               [](const ComponentInstance& inst) {
                                   py::array_t<std::int32_t> out(
                                       {static_cast<py::ssize_t>(inst.pixels.size()),
                                        static_cast<py::ssize_t>(2)});
                                   auto view = out.mutable_unchecked<2>();
                                   for (std::size_t i = 0; i < inst.pixels.size(); ++i) {
                                       view(static_cast<py::ssize_t>(i), 0) = inst.pixels[i].x;
                                       view(static_cast<py::ssize_t>(i), 1) = inst.pixels[i].y;
                                   }
                                   return out;
                               })
        .def("__len__", [](const ComponentInstance& inst) { return inst.pixels.size(); });

    py::class_<FeatureVector>(m, "FeatureVector")
        .def(py::init<>())
        .def(py::init([](double et, double esr, double cr, double rr, double sr) {
                 return FeatureVector{et, esr, cr, rr, sr};
             }),
             py::arg("element_type"), py::arg("element_size_ratio"), py::arg("crack_ratio"),
             py::arg("rebar_ratio"), py::arg("spalling_ratio"))
        .def_readwrite("element_type", &FeatureVector::element_type)
        .def_readwrite("element_size_ratio", &FeatureVector::element_size_ratio)
        .def_readwrite("crack_ratio", &FeatureVector::crack_ratio)
        .def_readwrite("rebar_ratio", &FeatureVector::rebar_ratio)
        .def_readwrite("spalling_ratio", &FeatureVector::spalling_ratio)
        .def("values", &FeatureVector::values);

    py::class_<LabeledVector>(m, "LabeledVector")
        .def(py::init([](const FeatureVector& fv, DamageState label) {
                 return LabeledVector{fv, label};
             }),
             py::arg("features"), py::arg("label"))
        .def_readwrite("features", &LabeledVector::features)
        .def_readwrite("label", &LabeledVector::label);

    py::class_<Manifest>(m, "Manifest")
        .def_property_readonly("ids",
                               [](const Manifest& man) {
                                   std::vector<std::string> ids;
                                   ids.reserve(man.entries.size());
                                   for (const auto& e : man.entries) ids.push_back(e.id);
                                   return ids;
                               })
        .def_property_readonly(
            "split", [](const Manifest& man) { return std::string(split_tag_name(man.split)); })
        .def("__len__", [](const Manifest& man) { return man.entries.size(); });

    py::class_<ShallowModel>(m, "ShallowModel")
        .def("predict", &ShallowModel::predict, py::arg("features"))
        .def_property_readonly("kind",
                               [](const ShallowModel& model) { return std::string(model.kind()); })
        .def("save", &ShallowModel::save, py::arg("path"))
        .def_static("load", &ShallowModel::load, py::arg("path"))
        .def("to_json", [](const ShallowModel& model) { return json_to_py(model.to_json()); });

    m.def("feature_names", [] {
        std::vector<std::string> names;
        for (int i = 0; i < kFeatureCount; ++i) names.emplace_back(feature_name(i));
        return names;
    });

    // raster and mask I/O
    m.def(
        "read_png", [](const std::filesystem::path& p) { return raster_to_array(read_png(p)); },
        py::arg("path"));
    m.def(
        "read_mask_png",
        [](const std::filesystem::path& p, CodeTable table) {
            return mask_to_array(read_mask_png(p, table));
        },
        py::arg("path"), py::arg("table"));
    m.def(
        "write_png",
        [](const std::filesystem::path& p, const py::array& a) {
            write_png(p, raster_from_array(a));
        },
        py::arg("path"), py::arg("image"));
    m.def(
        "probe_png_size",
        [](const std::filesystem::path& p) {
            PngSize s = probe_png_size(p);
            return py::make_tuple(s.width, s.height);
        },
        py::arg("path"));

    // geometry
    m.def(
        "connected_components",
        [](const py::array& mask, CodeTable table, std::uint8_t code) {
            return connected_components(mask_from_array(mask, table), code);
        },
        py::arg("mask"), py::arg("table"), py::arg("code"));
    m.def(
        "component_instances",
        [](const py::array& components) {
            return component_instances(mask_from_array(components, CodeTable::Component));
        },
        py::arg("components"));
    m.def(
        "min_area_rect", [](const py::array& pts) { return min_area_rect(points_from_array(pts)); },
        py::arg("points"));
    m.def(
        "warp_to_square",
        [](const py::array& image, const RotatedRect& rect, int side, Sampling sampling) {
            return raster_to_array(warp_to_square(raster_from_array(image), rect, side, sampling));
        },
        py::arg("image"), py::arg("rect"), py::arg("side") = 224,
        py::arg("sampling") = Sampling::Bilinear);
    m.def(
        "apply_foreground_mask",
        [](const py::array& rgb, const py::array& fg, std::array<std::uint8_t, 3> fill) {
            return raster_to_array(apply_foreground_mask(
                raster_from_array(rgb), mask_from_array(fg, CodeTable::Binary), fill));
        },
        py::arg("rgb"), py::arg("foreground"), py::arg("fill") = std::array<std::uint8_t, 3>{0, 0, 0});
    m.def(
        "foreground_from_components",
        [](const py::array& components) {
            return mask_to_array(
                foreground_from_components(mask_from_array(components, CodeTable::Component)));
        },
        py::arg("components"));

    // features
    m.def(
        "build_feature_vector",
        [](const ComponentInstance& instance, std::uint64_t image_area_px, const py::dict& defects) {
            std::map<DefectClass, MaskLayer> layers;
            for (auto item : defects)
                layers.emplace(item.first.cast<DefectClass>(),
                               mask_from_array(item.second.cast<py::array>(), CodeTable::Binary));
            return build_feature_vector(instance, image_area_px, layers);
        },
        py::arg("instance"), py::arg("image_area_px"), py::arg("defects"));

    // manifests and datasets
    m.def("load_manifest", &load_manifest, py::arg("path"));
    m.def("save_manifest", &save_manifest, py::arg("manifest"), py::arg("path"));
    m.def(
        "split_dataset",
        [](const Manifest& man, double fraction, std::uint64_t seed) {
            return split_dataset(man, fraction, seed);
        },
        py::arg("manifest"), py::arg("test_fraction"), py::arg("seed"));
    m.def("split_test_count", &split_test_count, py::arg("total"), py::arg("test_fraction"));
    m.def(
        "audit_collisions",
        [](const Manifest& man) {
            CollisionReport report = audit_collisions(man);
            py::dict out;
            out["images"] = report.images_scanned;
            for (const auto& [pair, count] : report.counts)
                out[py::str(std::string(name_of(pair.first)) + "+" +
                            std::string(name_of(pair.second)))] = count;
            return out;
        },
        py::arg("manifest"));
    m.def(
        "feature_vectors_from_manifest",
        [](const Manifest& man, int min_instance_px) {
            ExtractParams params;
            params.min_instance_px = min_instance_px;
            return feature_vectors_from_manifest(man, params);
        },
        py::arg("manifest"), py::arg("min_instance_px") = 16);
    m.def(
        "balance_by_undersampling",
        [](const std::vector<LabeledVector>& samples, std::uint64_t seed) {
            return balance_by_undersampling(samples, seed);
        },
        py::arg("samples"), py::arg("seed"));

    // fixture
    m.def(
        "generate_fixture",
        [](const std::filesystem::path& out_dir, std::uint64_t seed, int images, int width,
           int height) {
            FixtureSpec spec;
            spec.image_count = images;
            spec.width = width;
            spec.height = height;
            FixtureResult result = generate_fixture_dataset(spec, seed, out_dir);
            py::dict out;
            out["manifest"] = result.manifest_path.string();
            out["sidecar"] = result.sidecar_path.string();
            return out;
        },
        py::arg("out_dir"), py::arg("seed"), py::arg("images") = 12, py::arg("width") = 64,
        py::arg("height") = 64);

    // metrics
    m.def(
        "segmentation_scores",
        [](const py::array& pred, const py::array& gt, CodeTable table) {
            PixelConfusion conf = accumulate_confusion(mask_from_array(pred, table),
                                                       mask_from_array(gt, table), table);
            return json_to_py(segmentation_report(conf).to_json());
        },
        py::arg("pred"), py::arg("gt"), py::arg("table"));
    m.def(
        "classification_scores",
        [](const std::vector<DamageState>& preds, const std::vector<DamageState>& gts) {
            return json_to_py(classification_metrics(preds, gts).to_json());
        },
        py::arg("preds"), py::arg("gts"));

    // shallow classifiers
    m.def(
        "fit_tree",
        [](const std::vector<LabeledVector>& data, int max_depth) {
            TreeParams params;
            params.max_depth = max_depth;
            return ShallowModel(DecisionTree::fit(data, params));
        },
        py::arg("data"), py::arg("max_depth") = 59);
    m.def(
        "fit_forest",
        [](const std::vector<LabeledVector>& data, std::uint64_t seed, int n_trees,
           int features_per_split, bool bootstrap, int max_depth) {
            ForestParams params;
            params.n_trees = n_trees;
            params.features_per_split = features_per_split;
            params.bootstrap = bootstrap;
            params.tree.max_depth = max_depth;
            return ShallowModel(RandomForest::fit(data, params, seed));
        },
        py::arg("data"), py::arg("seed"), py::arg("n_trees") = 200,
        py::arg("features_per_split") = 3, py::arg("bootstrap") = true, py::arg("max_depth") = 59);
    m.def(
        "fit_naive_bayes",
        [](const std::vector<LabeledVector>& data, bool normalized, double variance_floor) {
            BayesParams params;
            params.normalized = normalized;
            params.variance_floor = variance_floor;
            return ShallowModel(NaiveBayes::fit(data, params));
        },
        py::arg("data"), py::arg("normalized") = false, py::arg("variance_floor") = 1e-9);

    // pipeline evaluation
    m.def("evaluate", &evaluate_py, py::arg("manifest_path"), py::arg("foreground") = "oracle",
          py::arg("components") = "oracle", py::arg("cracking") = "oracle",
          py::arg("spalling") = "oracle", py::arg("rebar") = "oracle", py::arg("damage") = "oracle",
          py::arg("jobs") = 1, py::arg("padding") = 0.10, py::arg("patch_side") = 224,
          py::arg("min_instance_px") = 16);
}
