#include "shmpipe/shallow.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "shmpipe/error.hpp"

namespace shmpipe {

namespace {

constexpr double kTau = 6.283185307179586;

std::array<std::uint64_t, kDamageStateCount> label_counts(std::span<const LabeledVector> data,
                                                          std::span<const std::size_t> idx) {
    std::array<std::uint64_t, kDamageStateCount> counts{};
    for (std::size_t i : idx) ++counts[code_of(data[i].label)];
    return counts;
}

// Highest state among the most frequent ones.
std::uint8_t majority_class(const std::array<std::uint64_t, kDamageStateCount>& counts) {
    int best = 0;
    for (int s = 1; s < kDamageStateCount; ++s)
        if (counts[s] >= counts[best]) best = s;
    return static_cast<std::uint8_t>(best);
}

double gini(const std::array<std::uint64_t, kDamageStateCount>& counts, std::uint64_t total) {
    if (total == 0) return 0.0;
    double sum = 0;
    for (std::uint64_t c : counts) {
        double p = static_cast<double>(c) / static_cast<double>(total);
        sum += p * p;
    }
    return 1.0 - sum;
}

struct SplitChoice {
    bool found = false;
    double weighted_impurity = 0;
    int feature = -1;
    double threshold = 0;
};

class TreeBuilder {
public:
    TreeBuilder(std::span<const LabeledVector> data, const TreeParams& params, SplitMix64* rng,
                int features_per_split)
        : data_(data), params_(params), rng_(rng) {
        subsample_ = rng != nullptr && features_per_split > 0 && features_per_split < kFeatureCount;
        features_per_split_ = subsample_ ? features_per_split : kFeatureCount;
        values_.resize(data.size());
        for (std::size_t i = 0; i < data.size(); ++i) {
            values_[i] = data[i].features.values();
            for (double v : values_[i])
                if (!std::isfinite(v)) throw Error("features must be finite");
        }
    }

    std::vector<TreeNode> build() {
        std::vector<std::size_t> idx(data_.size());
        std::iota(idx.begin(), idx.end(), std::size_t{0});
        grow(std::move(idx), 0);
        return std::move(nodes_);
    }

private:
    int grow(std::vector<std::size_t> idx, int depth) {
        auto counts = label_counts(data_, idx);
        std::uint8_t majority = majority_class(counts);
        int node_id = static_cast<int>(nodes_.size());
        nodes_.push_back(TreeNode{true, majority, -1, 0, -1, -1});

        bool pure = counts[majority] == idx.size();
        if (pure || depth >= params_.max_depth) return node_id;

        SplitChoice split = choose_split(idx, counts);
        if (!split.found) return node_id;

        std::vector<std::size_t> left, right;
        for (std::size_t i : idx) {
            if (values_[i][static_cast<std::size_t>(split.feature)] <= split.threshold)
                left.push_back(i);
            else
                right.push_back(i);
        }
        idx.clear();
        idx.shrink_to_fit();

        nodes_[static_cast<std::size_t>(node_id)].is_leaf = false;
        nodes_[static_cast<std::size_t>(node_id)].feature = split.feature;
        nodes_[static_cast<std::size_t>(node_id)].threshold = split.threshold;
        int left_id = grow(std::move(left), depth + 1);
        int right_id = grow(std::move(right), depth + 1);
        nodes_[static_cast<std::size_t>(node_id)].left = left_id;
        nodes_[static_cast<std::size_t>(node_id)].right = right_id;
        return node_id;
    }

    std::array<int, kFeatureCount> candidate_features() {
        std::array<int, kFeatureCount> order{0, 1, 2, 3, 4};
        if (!subsample_) return order;
        for (int i = 0; i < features_per_split_; ++i) {
            int j = i + static_cast<int>(rng_->next_below(kFeatureCount - i));
            std::swap(order[i], order[j]);
        }
        // ascending candidates keep the lowest-feature tie-break meaningful
        std::sort(order.begin(), order.begin() + features_per_split_);
        return order;
    }

    SplitChoice choose_split(const std::vector<std::size_t>& idx,
                             const std::array<std::uint64_t, kDamageStateCount>& total_counts) {
        SplitChoice best;
        const double n = static_cast<double>(idx.size());
        auto features = candidate_features();

        std::vector<std::pair<double, std::uint8_t>> sorted;
        sorted.reserve(idx.size());
        for (int fi = 0; fi < features_per_split_; ++fi) {
            int f = features[static_cast<std::size_t>(fi)];
            sorted.clear();
            for (std::size_t i : idx)
                sorted.emplace_back(values_[i][static_cast<std::size_t>(f)],
                                    code_of(data_[i].label));
            std::sort(sorted.begin(), sorted.end(),
                      [](const auto& a, const auto& b) { return a.first < b.first; });

            std::array<std::uint64_t, kDamageStateCount> left_counts{};
            auto right_counts = total_counts;
            for (std::size_t k = 0; k + 1 < sorted.size(); ++k) {
                ++left_counts[sorted[k].second];
                --right_counts[sorted[k].second];
                if (sorted[k + 1].first <= sorted[k].first) continue;
                double threshold = (sorted[k].first + sorted[k + 1].first) / 2;
                // a midpoint rounded onto the upper value would leak it left
                if (threshold >= sorted[k + 1].first) continue;
                double nl = static_cast<double>(k + 1);
                double nr = n - nl;
                double weighted =
                    (nl * gini(left_counts, k + 1) + nr * gini(right_counts, idx.size() - k - 1)) /
                    n;
                if (!best.found || weighted < best.weighted_impurity) {
                    best = {true, weighted, f, threshold};
                }
            }
        }
        return best;
    }

    std::span<const LabeledVector> data_;
    TreeParams params_;
    SplitMix64* rng_;
    bool subsample_ = false;
    int features_per_split_ = kFeatureCount;
    std::vector<std::array<double, kFeatureCount>> values_;
    std::vector<TreeNode> nodes_;
};

} // namespace

DecisionTree DecisionTree::fit(std::span<const LabeledVector> data, const TreeParams& params) {
    return fit_subsampled(data, params, nullptr, 0);
}

DecisionTree DecisionTree::fit_subsampled(std::span<const LabeledVector> data,
                                          const TreeParams& params, SplitMix64* rng,
                                          int features_per_split) {
    if (data.empty()) throw Error("cannot fit a tree on empty data");
    if (params.max_depth < 0) throw Error("max depth must be nonnegative");
    DecisionTree tree;
    tree.nodes_ = TreeBuilder(data, params, rng, features_per_split).build();
    return tree;
}

DamageState DecisionTree::predict(const FeatureVector& fv) const {
    if (nodes_.empty()) throw Error("unfitted tree");
    auto values = fv.values();
    std::size_t at = 0;
    while (!nodes_[at].is_leaf) {
        const TreeNode& node = nodes_[at];
        at = static_cast<std::size_t>(
            values[static_cast<std::size_t>(node.feature)] <= node.threshold ? node.left
                                                                             : node.right);
    }
    return static_cast<DamageState>(nodes_[at].leaf_class);
}

int DecisionTree::depth() const {
    if (nodes_.empty()) return 0;
    std::vector<std::pair<std::size_t, int>> stack{{0, 0}};
    int deepest = 0;
    while (!stack.empty()) {
        auto [at, d] = stack.back();
        stack.pop_back();
        deepest = std::max(deepest, d);
        if (!nodes_[at].is_leaf) {
            stack.push_back({static_cast<std::size_t>(nodes_[at].left), d + 1});
            stack.push_back({static_cast<std::size_t>(nodes_[at].right), d + 1});
        }
    }
    return deepest;
}

nlohmann::ordered_json DecisionTree::to_json() const {
    nlohmann::ordered_json doc;
    doc["kind"] = "decision_tree";
    doc["version"] = 1;
    nlohmann::ordered_json nodes = nlohmann::ordered_json::array();
    for (const auto& node : nodes_) {
        nlohmann::ordered_json n;
        if (node.is_leaf) {
            n["class"] = node.leaf_class;
        } else {
            n["feature"] = node.feature;
            n["threshold"] = node.threshold;
            n["left"] = node.left;
            n["right"] = node.right;
        }
        nodes.push_back(std::move(n));
    }
    doc["nodes"] = std::move(nodes);
    return doc;
}

DecisionTree DecisionTree::from_json(const nlohmann::json& j) {
    DecisionTree tree;
    const auto& nodes = j.at("nodes");
    const int count = static_cast<int>(nodes.size());
    for (const auto& n : nodes) {
        TreeNode node;
        if (n.contains("class")) {
            node.leaf_class = n.at("class").get<std::uint8_t>();
            if (node.leaf_class >= kDamageStateCount) throw Error("tree leaf class out of range");
        } else {
            node.is_leaf = false;
            node.feature = n.at("feature").get<int>();
            node.threshold = n.at("threshold").get<double>();
            node.left = n.at("left").get<int>();
            node.right = n.at("right").get<int>();
            if (node.feature < 0 || node.feature >= kFeatureCount)
                throw Error("tree feature index out of range");
            if (node.left < 0 || node.left >= count || node.right < 0 || node.right >= count)
                throw Error("tree child index out of range");
        }
        tree.nodes_.push_back(node);
    }
    if (tree.nodes_.empty()) throw Error("tree has no nodes");
    return tree;
}

RandomForest RandomForest::fit(std::span<const LabeledVector> data, const ForestParams& params,
                               std::uint64_t seed) {
    if (data.empty()) throw Error("cannot fit a forest on empty data");
    if (params.n_trees <= 0) throw Error("forest needs at least one tree");
    RandomForest forest;
    forest.trees_.reserve(static_cast<std::size_t>(params.n_trees));
    std::vector<LabeledVector> sample;
    for (int t = 0; t < params.n_trees; ++t) {
        SplitMix64 rng(derive_seed(seed, static_cast<std::uint64_t>(t)));
        std::span<const LabeledVector> train = data;
        if (params.bootstrap) {
            sample.clear();
            sample.reserve(data.size());
            for (std::size_t i = 0; i < data.size(); ++i)
                sample.push_back(data[rng.next_below(data.size())]);
            train = sample;
        }
        forest.trees_.push_back(
            DecisionTree::fit_subsampled(train, params.tree, &rng, params.features_per_split));
    }
    return forest;
}

std::array<int, kDamageStateCount> RandomForest::vote_counts(const FeatureVector& fv) const {
    std::array<int, kDamageStateCount> votes{};
    for (const auto& tree : trees_) ++votes[code_of(tree.predict(fv))];
    return votes;
}

DamageState RandomForest::predict(const FeatureVector& fv) const {
    if (trees_.empty()) throw Error("unfitted forest");
    auto votes = vote_counts(fv);
    int best = 0;
    for (int s = 1; s < kDamageStateCount; ++s)
        if (votes[s] >= votes[best]) best = s;
    return static_cast<DamageState>(best);
}

nlohmann::ordered_json RandomForest::to_json() const {
    nlohmann::ordered_json doc;
    doc["kind"] = "random_forest";
    doc["version"] = 1;
    nlohmann::ordered_json trees = nlohmann::ordered_json::array();
    for (const auto& tree : trees_) trees.push_back(tree.to_json());
    doc["trees"] = std::move(trees);
    return doc;
}

RandomForest RandomForest::from_json(const nlohmann::json& j) {
    RandomForest forest;
    for (const auto& tree : j.at("trees")) forest.trees_.push_back(DecisionTree::from_json(tree));
    if (forest.trees_.empty()) throw Error("forest has no trees");
    return forest;
}

NaiveBayes NaiveBayes::fit(std::span<const LabeledVector> data, const BayesParams& params) {
    if (data.empty()) throw Error("cannot fit on empty data");
    if (!(params.variance_floor > 0)) throw Error("variance floor must be positive");
    NaiveBayes nb;
    nb.params_ = params;

    for (int f = 0; f < kFeatureCount; ++f) {
        nb.feat_min[static_cast<std::size_t>(f)] = 0;
        nb.feat_range[static_cast<std::size_t>(f)] = 1;
    }
    if (params.normalized) {
        auto first = data.front().features.values();
        std::array<double, kFeatureCount> lo = first, hi = first;
        for (const auto& sample : data) {
            auto v = sample.features.values();
            for (std::size_t f = 0; f < kFeatureCount; ++f) {
                lo[f] = std::min(lo[f], v[f]);
                hi[f] = std::max(hi[f], v[f]);
            }
        }
        for (std::size_t f = 0; f < kFeatureCount; ++f) {
            nb.feat_min[f] = lo[f];
            nb.feat_range[f] = hi[f] > lo[f] ? hi[f] - lo[f] : 1.0;
        }
    }

    std::array<std::uint64_t, kDamageStateCount> counts{};
    std::array<std::array<double, kFeatureCount>, kDamageStateCount> sums{};
    for (const auto& sample : data) {
        auto v = nb.transform(sample.features);
        std::size_t cls = code_of(sample.label);
        ++counts[cls];
        for (std::size_t f = 0; f < kFeatureCount; ++f) sums[cls][f] += v[f];
    }
    for (std::size_t cls = 0; cls < kDamageStateCount; ++cls) {
        if (counts[cls] == 0) continue;
        auto& st = nb.stats_[cls];
        st.present = true;
        st.log_prior = std::log(static_cast<double>(counts[cls]) /
                                static_cast<double>(data.size()));
        for (std::size_t f = 0; f < kFeatureCount; ++f)
            st.mean[f] = sums[cls][f] / static_cast<double>(counts[cls]);
    }
    for (const auto& sample : data) {
        auto v = nb.transform(sample.features);
        auto& st = nb.stats_[code_of(sample.label)];
        for (std::size_t f = 0; f < kFeatureCount; ++f) {
            double d = v[f] - st.mean[f];
            st.variance[f] += d * d;
        }
    }
    for (std::size_t cls = 0; cls < kDamageStateCount; ++cls) {
        auto& st = nb.stats_[cls];
        if (!st.present) continue;
        for (std::size_t f = 0; f < kFeatureCount; ++f)
            st.variance[f] =
                std::max(st.variance[f] / static_cast<double>(counts[cls]), params.variance_floor);
    }
    return nb;
}

std::array<double, kFeatureCount> NaiveBayes::transform(const FeatureVector& fv) const {
    auto v = fv.values();
    if (!params_.normalized) return v;
    for (std::size_t f = 0; f < kFeatureCount; ++f) v[f] = (v[f] - feat_min[f]) / feat_range[f];
    return v;
}

std::array<double, kDamageStateCount> NaiveBayes::posterior(const FeatureVector& fv) const {
    bool any = false;
    for (const auto& st : stats_) any = any || st.present;
    if (!any) throw Error("unfitted model");

    auto v = transform(fv);
    std::array<double, kDamageStateCount> log_score{};
    double top = -std::numeric_limits<double>::infinity();
    for (std::size_t cls = 0; cls < kDamageStateCount; ++cls) {
        const auto& st = stats_[cls];
        if (!st.present) continue;
        double score = st.log_prior;
        for (std::size_t f = 0; f < kFeatureCount; ++f) {
            double d = v[f] - st.mean[f];
            score += -0.5 * std::log(kTau * st.variance[f]) - d * d / (2 * st.variance[f]);
        }
        log_score[cls] = score;
        top = std::max(top, score);
    }

    std::array<double, kDamageStateCount> posterior{};
    double norm = 0;
    for (std::size_t cls = 0; cls < kDamageStateCount; ++cls) {
        if (!stats_[cls].present) continue;
        posterior[cls] = std::exp(log_score[cls] - top);
        norm += posterior[cls];
    }
    for (double& p : posterior) p /= norm;
    return posterior;
}

DamageState NaiveBayes::predict(const FeatureVector& fv) const {
    auto p = posterior(fv);
    int best = 0;
    for (int s = 1; s < kDamageStateCount; ++s)
        if (stats_[static_cast<std::size_t>(s)].present && p[s] >= p[best]) best = s;
    return static_cast<DamageState>(best);
}

nlohmann::ordered_json NaiveBayes::to_json() const {
    nlohmann::ordered_json doc;
    doc["kind"] = "naive_bayes";
    doc["version"] = 1;
    doc["normalized"] = params_.normalized;
    doc["variance_floor"] = params_.variance_floor;
    doc["feat_min"] = feat_min;
    doc["feat_range"] = feat_range;
    nlohmann::ordered_json classes = nlohmann::ordered_json::array();
    for (const auto& st : stats_) {
        nlohmann::ordered_json c;
        c["present"] = st.present;
        if (st.present) {
            c["log_prior"] = st.log_prior;
            c["mean"] = st.mean;
            c["variance"] = st.variance;
        }
        classes.push_back(std::move(c));
    }
    doc["classes"] = std::move(classes);
    return doc;
}

NaiveBayes NaiveBayes::from_json(const nlohmann::json& j) {
    NaiveBayes nb;
    nb.params_.normalized = j.at("normalized").get<bool>();
    nb.params_.variance_floor = j.at("variance_floor").get<double>();
    const auto& mins = j.at("feat_min");
    const auto& ranges = j.at("feat_range");
    for (std::size_t f = 0; f < kFeatureCount; ++f) {
        nb.feat_min[f] = mins.at(f).get<double>();
        nb.feat_range[f] = ranges.at(f).get<double>();
    }
    const auto& classes = j.at("classes");
    if (classes.size() != kDamageStateCount) throw Error("model file: wrong class count");
    bool any = false;
    for (std::size_t cls = 0; cls < kDamageStateCount; ++cls) {
        const auto& c = classes.at(cls);
        auto& st = nb.stats_[cls];
        st.present = c.at("present").get<bool>();
        if (!st.present) continue;
        any = true;
        st.log_prior = c.at("log_prior").get<double>();
        for (std::size_t f = 0; f < kFeatureCount; ++f) {
            st.mean[f] = c.at("mean").at(f).get<double>();
            st.variance[f] = c.at("variance").at(f).get<double>();
            if (!(st.variance[f] > 0)) throw Error("model file: variance must be positive");
        }
    }
    if (!any) throw Error("model file: no classes present");
    return nb;
}

DamageState ShallowModel::predict(const FeatureVector& fv) const {
    if (auto* t = std::get_if<DecisionTree>(&impl_)) return t->predict(fv);
    if (auto* f = std::get_if<RandomForest>(&impl_)) return f->predict(fv);
    if (auto* nb = std::get_if<NaiveBayes>(&impl_)) return nb->predict(fv);
    throw Error("unfitted model");
}

std::string_view ShallowModel::kind() const {
    if (std::holds_alternative<DecisionTree>(impl_)) return "decision_tree";
    if (std::holds_alternative<RandomForest>(impl_)) return "random_forest";
    if (std::holds_alternative<NaiveBayes>(impl_)) return "naive_bayes";
    return "unfitted";
}

nlohmann::ordered_json ShallowModel::to_json() const {
    if (auto* t = std::get_if<DecisionTree>(&impl_)) return t->to_json();
    if (auto* f = std::get_if<RandomForest>(&impl_)) return f->to_json();
    if (auto* nb = std::get_if<NaiveBayes>(&impl_)) return nb->to_json();
    throw Error("unfitted model");
}

ShallowModel ShallowModel::from_json(const nlohmann::json& j) {
    auto kind = j.at("kind").get<std::string>();
    if (j.at("version").get<int>() != 1)
        throw Error("model file: unsupported version");
    if (kind == "decision_tree") return ShallowModel(DecisionTree::from_json(j));
    if (kind == "random_forest") return ShallowModel(RandomForest::from_json(j));
    if (kind == "naive_bayes") return ShallowModel(NaiveBayes::from_json(j));
    throw Error("model file: unknown kind " + kind);
}

void ShallowModel::save(const std::filesystem::path& path) const {
    if (auto parent = path.parent_path(); !parent.empty())
        std::filesystem::create_directories(parent);
    std::ofstream out(path, std::ios::binary);
    if (!out) throw Error("cannot write model " + path.string());
    out << to_json().dump(2) << '\n';
    if (!out) throw Error("cannot write model " + path.string());
}

ShallowModel ShallowModel::load(const std::filesystem::path& path) {
    std::ifstream in(path);
    if (!in) throw Error("cannot open model " + path.string());
    nlohmann::json doc;
    try {
        doc = nlohmann::json::parse(in);
        return from_json(doc);
    } catch (const nlohmann::json::exception& e) {
        throw Error("model " + path.string() + ": " + e.what());
    }
}

} // namespace shmpipe
