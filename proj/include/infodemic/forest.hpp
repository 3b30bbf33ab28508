#pragma once

#include "infodemic/textfeat.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace infodemic::forest {

/// How min_leaf_size is read: as a minimum number of (bootstrap) training
/// cases per leaf, or as a minimum number of leaves per tree.
enum class MinSizeRule { CasesPerLeaf, LeavesPerTree };

struct ForestHyperparams {
    int n_trees = 150;
    int max_terminal_nodes = 25;
    int min_leaf_size = 3;
    int features_per_split = 25;
    bool bootstrap_with_replacement = true;
    std::uint64_t seed = 1;
    MinSizeRule min_size_rule = MinSizeRule::CasesPerLeaf;

    /// Throws InvalidArgument when a bound is violated.
    void validate() const;
    bool operator==(const ForestHyperparams&) const = default;
};

/// Read-only view of one document's features: term counts then link flags.
struct FeatureRow {
    const textfeat::SparseVector* counts = nullptr;
    textfeat::LinkFlags flags;

    double value(std::uint32_t feature) const;
};

FeatureRow row_of(const textfeat::FeatureMatrix& m, std::size_t r);

/// Flat binary tree. Internal nodes send x <= threshold left; leaves keep the
/// (bootstrap-weighted) class counts that reached them.
struct TreeNode {
    std::int32_t feature = -1; // -1 marks a leaf
    double threshold = 0.0;
    std::int32_t left = -1;
    std::int32_t right = -1;
    double neg = 0.0;
    double pos = 0.0;

    bool is_leaf() const noexcept { return feature < 0; }
    bool operator==(const TreeNode&) const = default;
};

class DecisionTree {
public:
    DecisionTree() = default;
    explicit DecisionTree(std::vector<TreeNode> nodes);

    /// Positive-class fraction of the leaf reached by the row.
    double positive_fraction(const FeatureRow& row) const;
    const std::vector<TreeNode>& nodes() const noexcept { return nodes_; }
    std::size_t leaf_count() const;
    /// Smallest leaf weight (neg + pos) over all leaves.
    double min_leaf_weight() const;

    bool operator==(const DecisionTree&) const = default;

private:
    std::vector<TreeNode> nodes_;
};

struct TrainingMetadata {
    std::size_t n_pos = 0;
    std::size_t n_neg = 0;
    std::string trained_at;
    bool operator==(const TrainingMetadata&) const = default;
};

class ForestModel {
public:
    ForestModel() = default;
    ForestModel(ForestHyperparams hp, std::string vocab_hash, std::size_t n_features, std::vector<DecisionTree> trees,
                TrainingMetadata meta);

    /// Mean over trees of the leaf positive fraction. Throws InvalidArgument
    /// if the row's term dimension does not match the model.
    double predict_proba(const FeatureRow& row) const;
    /// proba >= 0.5, ties positive.
    bool predict(const FeatureRow& row) const { return predict_proba(row) >= 0.5; }

    const ForestHyperparams& hyperparams() const noexcept { return hp_; }
    const std::string& vocab_hash() const noexcept { return vocab_hash_; }
    std::size_t feature_count() const noexcept { return n_features_; }
    const std::vector<DecisionTree>& trees() const noexcept { return trees_; }
    const TrainingMetadata& metadata() const noexcept { return meta_; }

    /// Versioned JSON document; byte-stable for equal models.
    std::string to_json() const;
    static ForestModel from_json(std::string_view text);
    void save(const std::filesystem::path& path) const;
    static ForestModel load(const std::filesystem::path& path);

    bool operator==(const ForestModel&) const = default;

private:
    ForestHyperparams hp_;
    std::string vocab_hash_;
    std::size_t n_features_ = 0;
    std::vector<DecisionTree> trees_;
    TrainingMetadata meta_;
};

/// Grows each tree on a bootstrap sample with features_per_split candidate
/// features per node and best-first expansion by Gini decrease. Rows are put
/// in doc-id order first, so the result depends on the seed and not on the
/// input order. Throws InvalidArgument if either class has fewer than
/// min_leaf_size examples.
ForestModel train_forest(const textfeat::FeatureMatrix& matrix, const std::vector<bool>& labels,
                         const ForestHyperparams& hp, std::string trained_at = {});

struct Confusion {
    std::size_t tp = 0;
    std::size_t fp = 0;
    std::size_t fn = 0;
    std::size_t tn = 0;

    std::size_t n() const noexcept { return tp + fp + fn + tn; }
    bool operator==(const Confusion&) const = default;
};

struct Metrics {
    Confusion confusion;
    double accuracy = 0.0;
    double precision = 0.0;
    double recall = 0.0;
    double f1 = 0.0;
};

/// Zero denominators yield 0 for precision, recall and F1.
Metrics metrics_from_confusion(const Confusion& c);
/// F1 from published precision and recall.
double f1_score(double precision, double recall);

/// Throws InvalidArgument on an empty test set.
Metrics evaluate(const ForestModel& model, const textfeat::FeatureMatrix& test, const std::vector<bool>& labels);

struct LabeledId {
    std::string id;
    bool positive = false;
    bool operator==(const LabeledId&) const = default;
};

struct SplitResult {
    std::vector<LabeledId> train;
    std::vector<LabeledId> test;
};

/// Stratified train/test draw. The training pool takes floor(fraction * n)
/// items split across classes in proportion; with balance_train the larger
/// class is downsampled to the smaller and the surplus joins the test set.
SplitResult stratified_split(std::vector<LabeledId> examples, double train_fraction, bool balance_train,
                             std::uint64_t seed);

/// Downsamples the majority class to the minority count.
std::vector<LabeledId> balance_classes(std::vector<LabeledId> examples, std::uint64_t seed,
                                       std::vector<LabeledId>* surplus = nullptr);

} // namespace infodemic::forest
