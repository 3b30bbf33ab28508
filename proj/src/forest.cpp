#include "infodemic/forest.hpp"

#include "infodemic/error.hpp"
#include "infodemic/parallel.hpp"
#include "infodemic/rng.hpp"

#include <nlohmann/json.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <queue>
#include <set>

namespace infodemic::forest {

using textfeat::FeatureMatrix;
using textfeat::kLinkFeatureCount;

void ForestHyperparams::validate() const {
    if (n_trees < 1) throw InvalidArgument("n_trees must be >= 1");
    if (max_terminal_nodes < 2) throw InvalidArgument("max_terminal_nodes must be >= 2");
    if (min_leaf_size < 1) throw InvalidArgument("min_leaf_size must be >= 1");
    if (features_per_split < 1) throw InvalidArgument("features_per_split must be >= 1");
    if (min_size_rule == MinSizeRule::LeavesPerTree && min_leaf_size > max_terminal_nodes)
        throw InvalidArgument("minimum leaf count exceeds max_terminal_nodes");
}

double FeatureRow::value(std::uint32_t feature) const {
    const std::size_t terms = counts->dimension;
    if (feature < terms) return counts->at(feature);
    const auto flags_arr = flags.as_array();
    return flags_arr.at(feature - terms) ? 1.0 : 0.0;
}

FeatureRow row_of(const FeatureMatrix& m, std::size_t r) { return FeatureRow{&m.counts.at(r), m.link_flags.at(r)}; }

DecisionTree::DecisionTree(std::vector<TreeNode> nodes) : nodes_(std::move(nodes)) {
    if (nodes_.empty()) throw InvalidArgument("a tree needs at least one node");
}

double DecisionTree::positive_fraction(const FeatureRow& row) const {
    std::size_t i = 0;
    while (!nodes_[i].is_leaf()) {
        const auto& n = nodes_[i];
        i = static_cast<std::size_t>(row.value(static_cast<std::uint32_t>(n.feature)) <= n.threshold ? n.left
                                                                                                      : n.right);
    }
    const auto& leaf = nodes_[i];
    const double total = leaf.neg + leaf.pos;
    return total > 0 ? leaf.pos / total : 0.5;
}

std::size_t DecisionTree::leaf_count() const {
    return static_cast<std::size_t>(std::count_if(nodes_.begin(), nodes_.end(), [](const auto& n) { return n.is_leaf(); }));
}

double DecisionTree::min_leaf_weight() const {
    double m = std::numeric_limits<double>::infinity();
    for (const auto& n : nodes_)
        if (n.is_leaf()) m = std::min(m, n.neg + n.pos);
    return m;
}

ForestModel::ForestModel(ForestHyperparams hp, std::string vocab_hash, std::size_t n_features,
                         std::vector<DecisionTree> trees, TrainingMetadata meta)
    : hp_(hp), vocab_hash_(std::move(vocab_hash)), n_features_(n_features), trees_(std::move(trees)),
      meta_(std::move(meta)) {
    if (trees_.empty()) throw InvalidArgument("a forest needs at least one tree");
}

double ForestModel::predict_proba(const FeatureRow& row) const {
    if (!row.counts || row.counts->dimension + kLinkFeatureCount != n_features_)
        throw InvalidArgument("feature dimension " +
                              std::to_string(row.counts ? row.counts->dimension + kLinkFeatureCount : 0) +
                              " does not match model dimension " + std::to_string(n_features_));
    double sum = 0.0;
    for (const auto& t : trees_) sum += t.positive_fraction(row);
    return sum / static_cast<double>(trees_.size());
}

namespace {

const char* rule_name(MinSizeRule r) { return r == MinSizeRule::CasesPerLeaf ? "cases_per_leaf" : "leaves_per_tree"; }

MinSizeRule parse_rule(const std::string& s) {
    if (s == "cases_per_leaf") return MinSizeRule::CasesPerLeaf;
    if (s == "leaves_per_tree") return MinSizeRule::LeavesPerTree;
    throw ParseError("unknown min_size_rule '" + s + "'");
}

} // namespace

std::string ForestModel::to_json() const {
    nlohmann::ordered_json doc;
    doc["format"] = "infodemic.forest";
    doc["version"] = 1;
    doc["hyperparams"] = {{"n_trees", hp_.n_trees},
                          {"max_terminal_nodes", hp_.max_terminal_nodes},
                          {"min_leaf_size", hp_.min_leaf_size},
                          {"features_per_split", hp_.features_per_split},
                          {"bootstrap_with_replacement", hp_.bootstrap_with_replacement},
                          {"seed", hp_.seed},
                          {"min_size_rule", rule_name(hp_.min_size_rule)}};
    doc["vocab_hash"] = vocab_hash_;
    doc["n_features"] = n_features_;
    doc["metadata"] = {{"n_pos", meta_.n_pos}, {"n_neg", meta_.n_neg}, {"trained_at", meta_.trained_at}};
    auto trees = nlohmann::ordered_json::array();
    for (const auto& tree : trees_) {
        std::vector<std::int32_t> feature, left, right;
        std::vector<double> threshold, neg, pos;
        for (const auto& n : tree.nodes()) {
            feature.push_back(n.feature);
            threshold.push_back(n.threshold);
            left.push_back(n.left);
            right.push_back(n.right);
            neg.push_back(n.neg);
            pos.push_back(n.pos);
        }
        trees.push_back({{"feature", feature},
                         {"threshold", threshold},
                         {"left", left},
                         {"right", right},
                         {"neg", neg},
                         {"pos", pos}});
    }
    doc["trees"] = std::move(trees);
    return doc.dump() + "\n";
}

ForestModel ForestModel::from_json(std::string_view text) {
    try {
        const auto doc = nlohmann::json::parse(text);
        if (doc.at("format") != "infodemic.forest") throw ParseError("not a forest model document");
        if (doc.at("version").get<int>() != 1) throw ParseError("unsupported forest model version");
        const auto& h = doc.at("hyperparams");
        ForestHyperparams hp;
        hp.n_trees = h.at("n_trees");
        hp.max_terminal_nodes = h.at("max_terminal_nodes");
        hp.min_leaf_size = h.at("min_leaf_size");
        hp.features_per_split = h.at("features_per_split");
        hp.bootstrap_with_replacement = h.at("bootstrap_with_replacement");
        hp.seed = h.at("seed");
        hp.min_size_rule = parse_rule(h.at("min_size_rule"));
        TrainingMetadata meta;
        meta.n_pos = doc.at("metadata").at("n_pos");
        meta.n_neg = doc.at("metadata").at("n_neg");
        meta.trained_at = doc.at("metadata").at("trained_at");

        std::vector<DecisionTree> trees;
        const std::size_t n_features = doc.at("n_features");
        for (const auto& t : doc.at("trees")) {
            const auto feature = t.at("feature").get<std::vector<std::int32_t>>();
            const auto threshold = t.at("threshold").get<std::vector<double>>();
            const auto left = t.at("left").get<std::vector<std::int32_t>>();
            const auto right = t.at("right").get<std::vector<std::int32_t>>();
            const auto neg = t.at("neg").get<std::vector<double>>();
            const auto pos = t.at("pos").get<std::vector<double>>();
            const std::size_t n = feature.size();
            if (threshold.size() != n || left.size() != n || right.size() != n || neg.size() != n || pos.size() != n)
                throw ParseError("tree arrays differ in length");
            std::vector<TreeNode> nodes(n);
            for (std::size_t i = 0; i < n; ++i) {
                nodes[i] = {feature[i], threshold[i], left[i], right[i], neg[i], pos[i]};
                if (!nodes[i].is_leaf()) {
                    const auto in_range = [&](std::int32_t c) {
                        return c > static_cast<std::int32_t>(i) && c < static_cast<std::int32_t>(n);
                    };
                    if (static_cast<std::size_t>(feature[i]) >= n_features || !in_range(left[i]) ||
                        !in_range(right[i]))
                        throw ParseError("tree node " + std::to_string(i) + " is malformed");
                }
            }
            trees.emplace_back(std::move(nodes));
        }
        return ForestModel(hp, doc.at("vocab_hash"), n_features, std::move(trees), meta);
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(std::string("forest model: ") + e.what());
    }
}

void ForestModel::save(const std::filesystem::path& path) const { write_file(path, to_json()); }

ForestModel ForestModel::load(const std::filesystem::path& path) { return from_json(read_file(path)); }

namespace {

struct Sample {
    std::uint32_t row;
    double weight;
};

struct SplitChoice {
    std::int32_t feature = -1;
    double threshold = 0.0;
    double gain = 0.0;
};

struct NodeWork {
    std::int32_t node;
    std::vector<Sample> samples;
    SplitChoice split;
};

// Column-major copy of the training rows. Term counts in tweets are small, so
// float holds them exactly.
class DenseColumns {
public:
    DenseColumns(const FeatureMatrix& m, const std::vector<std::size_t>& order)
        : n_rows_(order.size()), n_features_(m.feature_count()), values_(n_rows_ * n_features_, 0.0f) {
        const std::size_t terms = m.vocab->size();
        for (std::size_t i = 0; i < n_rows_; ++i) {
            const std::size_t r = order[i];
            for (const auto& e : m.counts[r].entries) values_[e.index * n_rows_ + i] = static_cast<float>(e.count);
            const auto flags = m.link_flags[r].as_array();
            for (std::size_t k = 0; k < kLinkFeatureCount; ++k)
                values_[(terms + k) * n_rows_ + i] = flags[k] ? 1.0f : 0.0f;
        }
    }

    float at(std::size_t feature, std::size_t row) const { return values_[feature * n_rows_ + row]; }
    std::size_t features() const noexcept { return n_features_; }

private:
    std::size_t n_rows_;
    std::size_t n_features_;
    std::vector<float> values_;
};

// Weighted Gini impurity times node weight: W - (neg^2 + pos^2) / W.
double weighted_gini(double neg, double pos) {
    const double w = neg + pos;
    return w > 0 ? w - (neg * neg + pos * pos) / w : 0.0;
}

class TreeGrower {
public:
    TreeGrower(const DenseColumns& x, const std::vector<bool>& y, const ForestHyperparams& hp, std::uint64_t seed)
        : x_(x), y_(y), hp_(hp), rng_(seed),
          min_cases_(hp.min_size_rule == MinSizeRule::CasesPerLeaf ? hp.min_leaf_size : 1),
          min_leaves_(hp.min_size_rule == MinSizeRule::LeavesPerTree ? hp.min_leaf_size : 1) {}

    DecisionTree grow() {
        std::vector<Sample> root = draw_sample();

        struct Order {
            bool operator()(const NodeWork& a, const NodeWork& b) const {
                if (a.split.gain != b.split.gain) return a.split.gain < b.split.gain;
                return a.node > b.node;
            }
        };
        std::priority_queue<NodeWork, std::vector<NodeWork>, Order> frontier;

        nodes_.clear();
        add_leaf(root);
        std::size_t leaves = 1;
        if (auto w = prepare(0, std::move(root))) frontier.push(std::move(*w));

        while (!frontier.empty() && leaves < static_cast<std::size_t>(hp_.max_terminal_nodes)) {
            NodeWork work = frontier.top();
            frontier.pop();
            const auto& s = work.split;
            std::vector<Sample> left, right;
            for (const auto& sample : work.samples)
                (x_.at(static_cast<std::size_t>(s.feature), sample.row) <= s.threshold ? left : right)
                    .push_back(sample);

            const auto l = add_leaf(left);
            const auto r = add_leaf(right);
            auto& parent = nodes_[static_cast<std::size_t>(work.node)];
            parent.feature = s.feature;
            parent.threshold = s.threshold;
            parent.left = l;
            parent.right = r;
            ++leaves;
            if (auto w = prepare(l, std::move(left))) frontier.push(std::move(*w));
            if (auto w = prepare(r, std::move(right))) frontier.push(std::move(*w));
        }
        return DecisionTree(std::move(nodes_));
    }

private:
    std::vector<Sample> draw_sample() {
        const std::size_t n = y_.size();
        std::vector<double> weight(n, 0.0);
        if (hp_.bootstrap_with_replacement) {
            for (std::size_t i = 0; i < n; ++i) weight[rand_below(rng_, n)] += 1.0;
        } else {
            std::vector<std::uint32_t> idx(n);
            std::iota(idx.begin(), idx.end(), 0u);
            shuffle(std::span(idx), rng_);
            const auto m = static_cast<std::size_t>(std::ceil(0.632 * static_cast<double>(n)));
            for (std::size_t i = 0; i < m; ++i) weight[idx[i]] = 1.0;
        }
        std::vector<Sample> samples;
        for (std::size_t i = 0; i < n; ++i)
            if (weight[i] > 0) samples.push_back({static_cast<std::uint32_t>(i), weight[i]});
        return samples;
    }

    std::int32_t add_leaf(const std::vector<Sample>& samples) {
        TreeNode leaf;
        for (const auto& s : samples) (y_[s.row] ? leaf.pos : leaf.neg) += s.weight;
        nodes_.push_back(leaf);
        return static_cast<std::int32_t>(nodes_.size() - 1);
    }

    // Picks the split for a fresh leaf; nullopt leaves it terminal.
    std::optional<NodeWork> prepare(std::int32_t node, std::vector<Sample> samples) {
        const auto& leaf = nodes_[static_cast<std::size_t>(node)];
        if (leaf.neg == 0.0 || leaf.pos == 0.0) return std::nullopt;
        if (leaf.neg + leaf.pos < 2.0 * min_cases_) return std::nullopt;

        const double parent = weighted_gini(leaf.neg, leaf.pos);
        SplitChoice best;
        bool found = false;
        for (const std::uint32_t f : sample_features()) {
            const auto candidate = best_split_for(f, samples, parent);
            if (!candidate) continue;
            // features arrive in ascending order, so equal gains keep the lowest index
            if (!found || candidate->gain > best.gain) {
                best = *candidate;
                found = true;
            }
        }
        if (!found) return std::nullopt;
        const bool need_more_leaves = nodes_.size() < 2 * static_cast<std::size_t>(min_leaves_) - 1;
        if (best.gain <= 1e-12 && !need_more_leaves) return std::nullopt;
        return NodeWork{node, std::move(samples), best};
    }

    // Floyd's algorithm: features_per_split distinct indices, sorted.
    std::vector<std::uint32_t> sample_features() {
        const std::size_t total = x_.features();
        const std::size_t m = std::min<std::size_t>(static_cast<std::size_t>(hp_.features_per_split), total);
        std::set<std::uint32_t> chosen;
        for (std::size_t j = total - m; j < total; ++j) {
            const auto t = static_cast<std::uint32_t>(rand_below(rng_, j + 1));
            if (!chosen.insert(t).second) chosen.insert(static_cast<std::uint32_t>(j));
        }
        return {chosen.begin(), chosen.end()};
    }

    std::optional<SplitChoice> best_split_for(std::uint32_t feature, const std::vector<Sample>& samples,
                                              double parent) {
        scratch_.clear();
        bool constant = true;
        const float first = x_.at(feature, samples.front().row);
        for (const auto& s : samples) {
            const float v = x_.at(feature, s.row);
            constant = constant && v == first;
            scratch_.push_back({v, s.weight, y_[s.row]});
        }
        if (constant) return std::nullopt;
        std::sort(scratch_.begin(), scratch_.end(), [](const auto& a, const auto& b) { return a.value < b.value; });

        double total_neg = 0, total_pos = 0;
        for (const auto& e : scratch_) (e.positive ? total_pos : total_neg) += e.weight;

        std::optional<SplitChoice> best;
        double left_neg = 0, left_pos = 0;
        for (std::size_t i = 0; i + 1 < scratch_.size(); ++i) {
            (scratch_[i].positive ? left_pos : left_neg) += scratch_[i].weight;
            if (scratch_[i].value == scratch_[i + 1].value) continue;
            const double left_w = left_neg + left_pos;
            const double right_neg = total_neg - left_neg;
            const double right_pos = total_pos - left_pos;
            if (left_w < min_cases_ || right_neg + right_pos < min_cases_) continue;
            const double gain = parent - weighted_gini(left_neg, left_pos) - weighted_gini(right_neg, right_pos);
            if (!best || gain > best->gain) {
                best = SplitChoice{static_cast<std::int32_t>(feature),
                                   0.5 * (static_cast<double>(scratch_[i].value) + scratch_[i + 1].value), gain};
            }
        }
        return best;
    }

    struct Entry {
        float value;
        double weight;
        bool positive;
    };

    const DenseColumns& x_;
    const std::vector<bool>& y_;
    const ForestHyperparams& hp_;
    Rng rng_;
    double min_cases_;
    int min_leaves_;
    std::vector<TreeNode> nodes_;
    std::vector<Entry> scratch_;
};

} // namespace

ForestModel train_forest(const FeatureMatrix& matrix, const std::vector<bool>& labels, const ForestHyperparams& hp,
                         std::string trained_at) {
    hp.validate();
    if (!matrix.vocab) throw InvalidArgument("feature matrix has no vocabulary");
    if (labels.size() != matrix.rows()) throw InvalidArgument("label count does not match matrix rows");

    std::vector<std::size_t> order(matrix.rows());
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return matrix.doc_ids[a] < matrix.doc_ids[b]; });

    std::vector<bool> y(order.size());
    TrainingMetadata meta;
    meta.trained_at = std::move(trained_at);
    for (std::size_t i = 0; i < order.size(); ++i) {
        y[i] = labels[order[i]];
        ++(y[i] ? meta.n_pos : meta.n_neg);
    }
    const auto min_per_class = static_cast<std::size_t>(hp.min_leaf_size);
    if (meta.n_pos == 0 || meta.n_neg == 0)
        throw InvalidArgument("training data must contain both classes");
    if (hp.min_size_rule == MinSizeRule::CasesPerLeaf && (meta.n_pos < min_per_class || meta.n_neg < min_per_class))
        throw InvalidArgument("each class needs at least min_leaf_size examples");

    const DenseColumns x(matrix, order);
    std::vector<DecisionTree> trees(static_cast<std::size_t>(hp.n_trees));
    parallel_for(trees.size(), [&](std::size_t t) {
        TreeGrower grower(x, y, hp, derive_seed(hp.seed, t));
        trees[t] = grower.grow();
    });
    return ForestModel(hp, matrix.vocab->hash(), matrix.feature_count(), std::move(trees), std::move(meta));
}

double f1_score(double precision, double recall) {
    const double s = precision + recall;
    return s > 0 ? 2.0 * precision * recall / s : 0.0;
}

Metrics metrics_from_confusion(const Confusion& c) {
    Metrics m;
    m.confusion = c;
    const auto ratio = [](std::size_t num, std::size_t den) {
        return den == 0 ? 0.0 : static_cast<double>(num) / static_cast<double>(den);
    };
    m.accuracy = ratio(c.tp + c.tn, c.n());
    m.precision = ratio(c.tp, c.tp + c.fp);
    m.recall = ratio(c.tp, c.tp + c.fn);
    // 2PR/(P+R) == 2tp/(2tp+fp+fn), which avoids compounding rounding
    m.f1 = ratio(2 * c.tp, 2 * c.tp + c.fp + c.fn);
    return m;
}

Metrics evaluate(const ForestModel& model, const FeatureMatrix& test, const std::vector<bool>& labels) {
    if (test.rows() == 0) throw InvalidArgument("cannot evaluate on an empty test set");
    if (labels.size() != test.rows()) throw InvalidArgument("label count does not match test rows");
    std::vector<char> predicted(test.rows());
    parallel_for(test.rows(), [&](std::size_t r) { predicted[r] = model.predict(row_of(test, r)) ? 1 : 0; });
    Confusion c;
    for (std::size_t r = 0; r < test.rows(); ++r) {
        if (predicted[r])
            ++(labels[r] ? c.tp : c.fp);
        else
            ++(labels[r] ? c.fn : c.tn);
    }
    return metrics_from_confusion(c);
}

namespace {

void sort_by_id(std::vector<LabeledId>& v) {
    std::sort(v.begin(), v.end(), [](const LabeledId& a, const LabeledId& b) { return a.id < b.id; });
}

} // namespace

std::vector<LabeledId> balance_classes(std::vector<LabeledId> examples, std::uint64_t seed,
                                       std::vector<LabeledId>* surplus) {
    sort_by_id(examples);
    std::vector<LabeledId> pos, neg;
    for (auto& e : examples) (e.positive ? pos : neg).push_back(std::move(e));
    auto& major = pos.size() > neg.size() ? pos : neg;
    const std::size_t keep = std::min(pos.size(), neg.size());
    Rng rng(derive_seed(seed, 0xba1a));
    shuffle(std::span(major), rng);
    if (surplus) surplus->assign(major.begin() + static_cast<std::ptrdiff_t>(keep), major.end());
    major.resize(keep);

    std::vector<LabeledId> out;
    out.reserve(2 * keep);
    out.insert(out.end(), pos.begin(), pos.end());
    out.insert(out.end(), neg.begin(), neg.end());
    sort_by_id(out);
    if (surplus) sort_by_id(*surplus);
    return out;
}

SplitResult stratified_split(std::vector<LabeledId> examples, double train_fraction, bool balance_train,
                             std::uint64_t seed) {
    if (!(train_fraction > 0.0 && train_fraction < 1.0)) throw InvalidArgument("train_fraction must lie in (0, 1)");
    sort_by_id(examples);
    std::vector<LabeledId> classes[2];
    for (auto& e : examples) classes[e.positive ? 1 : 0].push_back(std::move(e));
    if (classes[0].empty() || classes[1].empty()) throw InvalidArgument("stratified split needs both classes present");

    // floor(f * n) overall, shared across classes by largest remainder
    const auto floor_eps = [](double v) { return static_cast<std::size_t>(std::floor(v + 1e-9)); };
    const std::size_t n = classes[0].size() + classes[1].size();
    const std::size_t target = floor_eps(train_fraction * static_cast<double>(n));
    std::size_t quota[2];
    double remainder[2];
    for (int c = 0; c < 2; ++c) {
        const double exact = train_fraction * static_cast<double>(classes[c].size());
        quota[c] = floor_eps(exact);
        remainder[c] = exact - static_cast<double>(quota[c]);
    }
    while (quota[0] + quota[1] < target) {
        const int c = remainder[1] >= remainder[0] ? 1 : 0;
        ++quota[c];
        remainder[c] = -1.0;
    }

    SplitResult result;
    std::vector<LabeledId> pool;
    for (int c = 0; c < 2; ++c) {
        Rng rng(derive_seed(seed, static_cast<std::uint64_t>(c)));
        shuffle(std::span(classes[c]), rng);
        const auto q = static_cast<std::ptrdiff_t>(std::min(quota[c], classes[c].size()));
        pool.insert(pool.end(), classes[c].begin(), classes[c].begin() + q);
        result.test.insert(result.test.end(), classes[c].begin() + q, classes[c].end());
    }
    if (balance_train) {
        std::vector<LabeledId> surplus;
        result.train = balance_classes(std::move(pool), seed, &surplus);
        result.test.insert(result.test.end(), surplus.begin(), surplus.end());
    } else {
        result.train = std::move(pool);
        sort_by_id(result.train);
    }
    sort_by_id(result.test);
    return result;
}

} // namespace infodemic::forest
