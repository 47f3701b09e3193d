#include "shmpipe/metrics.hpp"

#include <iomanip>
#include <sstream>

#include "shmpipe/error.hpp"

namespace shmpipe {

PixelConfusion PixelConfusion::make(CodeTable table) {
    PixelConfusion conf;
    conf.table = table;
    conf.classes = code_table_size(table);
    conf.counts.assign(static_cast<std::size_t>(conf.classes) * conf.classes, 0);
    return conf;
}

void PixelConfusion::add(const MaskLayer& gt, const MaskLayer& pred) {
    if (gt.width != pred.width || gt.height != pred.height)
        throw Error("confusion tally: mask sizes differ");
    if (gt.table != table || pred.table != table)
        throw Error("confusion tally: mask code table differs from the accumulator's");
    const std::size_t n = gt.codes.size();
    for (std::size_t i = 0; i < n; ++i)
        counts[static_cast<std::size_t>(gt.codes[i]) * classes + pred.codes[i]] += 1;
}

void PixelConfusion::add_pair(int gt, int pred, std::uint64_t n) {
    if (gt < 0 || gt >= classes || pred < 0 || pred >= classes)
        throw Error("confusion tally: class outside the table");
    counts[static_cast<std::size_t>(gt) * classes + pred] += n;
}

void PixelConfusion::merge(const PixelConfusion& other) {
    if (other.table != table || other.classes != classes)
        throw Error("confusion tally: cannot merge different tables");
    for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
}

std::uint64_t PixelConfusion::at(int gt, int pred) const {
    return counts[static_cast<std::size_t>(gt) * classes + pred];
}

std::uint64_t PixelConfusion::gt_total(int cls) const {
    std::uint64_t sum = 0;
    for (int p = 0; p < classes; ++p) sum += at(cls, p);
    return sum;
}

std::uint64_t PixelConfusion::pred_total(int cls) const {
    std::uint64_t sum = 0;
    for (int g = 0; g < classes; ++g) sum += at(g, cls);
    return sum;
}

std::uint64_t PixelConfusion::total() const {
    std::uint64_t sum = 0;
    for (std::uint64_t c : counts) sum += c;
    return sum;
}

PixelConfusion accumulate_confusion(const MaskLayer& pred, const MaskLayer& gt, CodeTable table) {
    PixelConfusion conf = PixelConfusion::make(table);
    conf.add(gt, pred);
    return conf;
}

double iou(const PixelConfusion& conf, int cls) {
    std::uint64_t tp = conf.at(cls, cls);
    std::uint64_t fp = conf.pred_total(cls) - tp;
    std::uint64_t fn = conf.gt_total(cls) - tp;
    std::uint64_t denom = tp + fp + fn;
    if (denom == 0) return 1.0;
    return static_cast<double>(tp) / static_cast<double>(denom);
}

double pixel_accuracy(const PixelConfusion& conf, int cls) {
    std::uint64_t gt = conf.gt_total(cls);
    if (gt == 0) return conf.pred_total(cls) == 0 ? 1.0 : 0.0;
    return static_cast<double>(conf.at(cls, cls)) / static_cast<double>(gt);
}

namespace {

double mean_over_gt(const std::vector<double>& values, const std::vector<bool>& in_gt) {
    double sum = 0;
    int n = 0;
    for (std::size_t c = 0; c < values.size(); ++c) {
        if (!in_gt[c]) continue;
        sum += values[c];
        ++n;
    }
    return n > 0 ? sum / n : 0.0;
}

} // namespace

MetricsReport segmentation_report(const PixelConfusion& conf) {
    MetricsReport report;
    report.kind = "segmentation";
    report.confusion = conf;
    for (int c = 0; c < conf.classes; ++c) {
        report.class_in_gt.push_back(conf.gt_total(c) > 0);
        report.class_iou.push_back(iou(conf, c));
        report.class_pixel_accuracy.push_back(pixel_accuracy(conf, c));
    }
    report.mean_iou = mean_over_gt(report.class_iou, report.class_in_gt);
    report.mean_pixel_accuracy = mean_over_gt(report.class_pixel_accuracy, report.class_in_gt);
    return report;
}

MetricsReport classification_report(const PixelConfusion& conf) {
    MetricsReport report;
    report.kind = "classification";
    report.confusion = conf;
    for (int c = 0; c < conf.classes; ++c) {
        std::uint64_t tp = conf.at(c, c);
        std::uint64_t gt = conf.gt_total(c);
        std::uint64_t pred = conf.pred_total(c);
        report.class_in_gt.push_back(gt > 0);
        report.class_accuracy.push_back(pixel_accuracy(conf, c));
        if (gt == 0 && pred == 0) {
            report.class_f1.push_back(1.0);
            continue;
        }
        double precision = pred > 0 ? static_cast<double>(tp) / pred : 0.0;
        double recall = gt > 0 ? static_cast<double>(tp) / gt : 0.0;
        double pr = precision + recall;
        report.class_f1.push_back(pr > 0 ? 2 * precision * recall / pr : 0.0);
    }
    std::uint64_t total = conf.total();
    std::uint64_t correct = 0;
    for (int c = 0; c < conf.classes; ++c) correct += conf.at(c, c);
    report.average_accuracy = total > 0 ? static_cast<double>(correct) / total : 0.0;
    report.macro_f1 = mean_over_gt(report.class_f1, report.class_in_gt);
    return report;
}

MetricsReport classification_metrics(std::span<const DamageState> preds,
                                     std::span<const DamageState> gts) {
    if (preds.size() != gts.size()) throw Error("prediction and label lists differ in length");
    if (preds.empty()) throw Error("no samples to score");
    PixelConfusion conf = PixelConfusion::make(CodeTable::Damage);
    for (std::size_t i = 0; i < preds.size(); ++i)
        conf.add_pair(static_cast<int>(code_of(gts[i])), static_cast<int>(code_of(preds[i])));
    return classification_report(conf);
}

nlohmann::ordered_json MetricsReport::to_json() const {
    nlohmann::ordered_json doc;
    doc["kind"] = kind;
    doc["table"] = std::string(code_table_name(confusion.table));
    doc["mean_convention"] = "classes absent from ground truth are excluded from means";
    nlohmann::ordered_json classes = nlohmann::ordered_json::array();
    for (int c = 0; c < confusion.classes; ++c)
        classes.push_back(std::string(class_name_in_table(confusion.table, c)));
    doc["classes"] = std::move(classes);
    doc["class_in_gt"] = class_in_gt;
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (int g = 0; g < confusion.classes; ++g) {
        nlohmann::ordered_json row = nlohmann::ordered_json::array();
        for (int p = 0; p < confusion.classes; ++p) row.push_back(confusion.at(g, p));
        rows.push_back(std::move(row));
    }
    doc["confusion"] = std::move(rows);
    if (kind == "segmentation") {
        doc["class_iou"] = class_iou;
        doc["class_pixel_accuracy"] = class_pixel_accuracy;
        doc["mean_iou"] = mean_iou;
        doc["mean_pixel_accuracy"] = mean_pixel_accuracy;
    } else {
        doc["class_accuracy"] = class_accuracy;
        doc["class_f1"] = class_f1;
        doc["average_accuracy"] = average_accuracy;
        doc["macro_f1"] = macro_f1;
    }
    return doc;
}

std::string metrics_csv(const MetricsReport& report) {
    std::ostringstream out;
    out << std::fixed << std::setprecision(6);
    out << "metric";
    for (int c = 0; c < report.confusion.classes; ++c)
        out << ',' << class_name_in_table(report.confusion.table, c);
    if (report.kind == "segmentation") {
        out << ",mean\n";
        out << "iou";
        for (double v : report.class_iou) out << ',' << v;
        out << ',' << report.mean_iou << '\n';
        out << "pixel_accuracy";
        for (double v : report.class_pixel_accuracy) out << ',' << v;
        out << ',' << report.mean_pixel_accuracy << '\n';
    } else {
        out << ",overall\n";
        out << "accuracy";
        for (double v : report.class_accuracy) out << ',' << v;
        out << ',' << report.average_accuracy << '\n';
        out << "f1";
        for (double v : report.class_f1) out << ',' << v;
        out << ',' << report.macro_f1 << '\n';
    }
    return out.str();
}

} // namespace shmpipe
