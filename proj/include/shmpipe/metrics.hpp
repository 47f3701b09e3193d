#pragma once

#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "shmpipe/classes.hpp"
#include "shmpipe/raster.hpp"

namespace shmpipe {

/// Exact per-pixel (ground truth, prediction) tally for one code table.
/// Integer counts merge associatively, so per-image tallies can be reduced
/// in any order.
struct PixelConfusion {
    CodeTable table = CodeTable::Binary;
    int classes = 2;
    std::vector<std::uint64_t> counts; // [gt * classes + pred]

    static PixelConfusion make(CodeTable table);

    void add(const MaskLayer& gt, const MaskLayer& pred);
    void add_pair(int gt, int pred, std::uint64_t n = 1);
    void merge(const PixelConfusion& other);

    std::uint64_t at(int gt, int pred) const;
    std::uint64_t gt_total(int cls) const;
    std::uint64_t pred_total(int cls) const;
    std::uint64_t total() const;
};

/// One-shot tally of a prediction against its ground truth.
PixelConfusion accumulate_confusion(const MaskLayer& pred, const MaskLayer& gt, CodeTable table);

/// TP / (TP + FP + FN). A class absent from both sides scores 1.0.
double iou(const PixelConfusion& conf, int cls);

/// Per-class recall TP / (TP + FN). A class absent from both sides scores
/// 1.0; absent from ground truth only, 0.0.
double pixel_accuracy(const PixelConfusion& conf, int cls);

/// Derived metric bundle. Means average over classes present in the ground
/// truth; the convention is recorded in every serialized report.
struct MetricsReport {
    std::string kind; // "segmentation" or "classification"
    PixelConfusion confusion;
    std::vector<bool> class_in_gt;

    // segmentation
    std::vector<double> class_iou;
    std::vector<double> class_pixel_accuracy;
    double mean_iou = 0;
    double mean_pixel_accuracy = 0;

    // classification
    std::vector<double> class_accuracy; // per-class recall
    std::vector<double> class_f1;
    double average_accuracy = 0; // overall fraction correct
    double macro_f1 = 0;

    nlohmann::ordered_json to_json() const;
};

MetricsReport segmentation_report(const PixelConfusion& conf);

/// Classification metrics over paired prediction/ground-truth lists.
MetricsReport classification_metrics(std::span<const DamageState> preds,
                                     std::span<const DamageState> gts);

MetricsReport classification_report(const PixelConfusion& conf);

/// Per-class CSV table in the usual per-class-columns layout.
std::string metrics_csv(const MetricsReport& report);

} // namespace shmpipe
