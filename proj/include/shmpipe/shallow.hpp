#pragma once

#include <array>
#include <filesystem>
#include <span>
#include <variant>
#include <vector>

#include <json.hpp>

#include "shmpipe/features.hpp"
#include "shmpipe/rng.hpp"

namespace shmpipe {

struct TreeParams {
    int max_depth = 59;
};

struct TreeNode {
    bool is_leaf = true;
    std::uint8_t leaf_class = 0;
    int feature = -1;
    double threshold = 0;
    int left = -1;
    int right = -1;
};

/// CART-style classifier: Gini impurity, thresholds at midpoints of sorted
/// unique feature values. Split ties break toward the lowest feature index,
/// then the lowest threshold; leaf majorities break toward higher severity.
class DecisionTree {
public:
    static DecisionTree fit(std::span<const LabeledVector> data, const TreeParams& params = {});

    /// Forest helper: when `features_per_split` > 0, each node draws that
    /// many candidate features from `rng`.
    static DecisionTree fit_subsampled(std::span<const LabeledVector> data,
                                       const TreeParams& params, SplitMix64* rng,
                                       int features_per_split);

    DamageState predict(const FeatureVector& fv) const;
    int depth() const;
    const std::vector<TreeNode>& nodes() const { return nodes_; }

    nlohmann::ordered_json to_json() const;
    static DecisionTree from_json(const nlohmann::json& j);

private:
    std::vector<TreeNode> nodes_; // nodes_[0] is the root
};

struct ForestParams {
    int n_trees = 200;
    bool bootstrap = true;          // resample N with replacement per tree
    int features_per_split = 3;     // ceil(sqrt(5)); 0 = all features
    TreeParams tree;
};

/// Bagged trees with per-split feature subsampling. Tree t draws all its
/// randomness from derive_seed(seed, t), so fits replay exactly.
class RandomForest {
public:
    static RandomForest fit(std::span<const LabeledVector> data, const ForestParams& params,
                            std::uint64_t seed);

    DamageState predict(const FeatureVector& fv) const;
    std::array<int, kDamageStateCount> vote_counts(const FeatureVector& fv) const;
    const std::vector<DecisionTree>& trees() const { return trees_; }

    nlohmann::ordered_json to_json() const;
    static RandomForest from_json(const nlohmann::json& j);

private:
    std::vector<DecisionTree> trees_;
};

struct BayesParams {
    bool normalized = false; // min-max scale features, bounds fitted on train
    double variance_floor = 1e-9;
};

/// Gaussian naive Bayes over the five features, optional stored min-max
/// normalization. Posterior ties break toward higher severity.
class NaiveBayes {
public:
    static NaiveBayes fit(std::span<const LabeledVector> data, const BayesParams& params = {});

    DamageState predict(const FeatureVector& fv) const;
    /// Normalized posterior over the four states; absent classes get 0.
    std::array<double, kDamageStateCount> posterior(const FeatureVector& fv) const;

    nlohmann::ordered_json to_json() const;
    static NaiveBayes from_json(const nlohmann::json& j);

private:
    struct ClassStats {
        bool present = false;
        double log_prior = 0;
        std::array<double, kFeatureCount> mean{};
        std::array<double, kFeatureCount> variance{};
    };
    std::array<ClassStats, kDamageStateCount> stats_{};
    BayesParams params_;
    std::array<double, kFeatureCount> feat_min{};
    std::array<double, kFeatureCount> feat_range{};

    std::array<double, kFeatureCount> transform(const FeatureVector& fv) const;
};

/// Any fitted shallow classifier plus its versioned JSON form.
class ShallowModel {
public:
    ShallowModel() = default;
    explicit ShallowModel(DecisionTree t) : impl_(std::move(t)) {}
    explicit ShallowModel(RandomForest f) : impl_(std::move(f)) {}
    explicit ShallowModel(NaiveBayes nb) : impl_(std::move(nb)) {}

    DamageState predict(const FeatureVector& fv) const;
    std::string_view kind() const;

    template <class T>
    const T* get() const { return std::get_if<T>(&impl_); }

    nlohmann::ordered_json to_json() const;
    static ShallowModel from_json(const nlohmann::json& j);
    void save(const std::filesystem::path& path) const;
    static ShallowModel load(const std::filesystem::path& path);

private:
    std::variant<std::monostate, DecisionTree, RandomForest, NaiveBayes> impl_;
};

} // namespace shmpipe
