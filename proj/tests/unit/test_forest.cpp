#include "infodemic/error.hpp"
#include "infodemic/forest.hpp"
#include "infodemic/parallel.hpp"

#include "../support/synthetic.hpp"

#include <doctest.h>

#include <set>

using namespace infodemic;
using namespace infodemic::forest;

namespace {

struct Fixture {
    synth::LabeledCorpus corpus;
    std::shared_ptr<const textfeat::Vocabulary> vocab;
    textfeat::FeatureMatrix matrix;

    explicit Fixture(std::size_t n, std::uint64_t seed = 1)
        : corpus(synth::separable_corpus(n, seed)), vocab(synth::vocabulary_for(corpus.tweets)),
          matrix(synth::matrix_for(corpus.tweets, vocab)) {}
};

ForestHyperparams small(std::uint64_t seed = 3) {
    ForestHyperparams hp;
    hp.n_trees = 20;
    hp.seed = seed;
    return hp;
}

} // namespace

TEST_CASE("metrics from confusion counts") {
    const auto m = metrics_from_confusion({8, 2, 4, 6});
    CHECK(m.accuracy == doctest::Approx(14.0 / 20.0));
    CHECK(m.precision == doctest::Approx(0.8));
    CHECK(m.recall == doctest::Approx(8.0 / 12.0));
    CHECK(m.f1 == doctest::Approx(f1_score(m.precision, m.recall)));
    const auto empty = metrics_from_confusion({0, 0, 0, 5});
    CHECK(empty.precision == 0.0);
    CHECK(empty.f1 == 0.0);
    CHECK(f1_score(0.0, 0.0) == 0.0);
}

TEST_CASE("hyperparameter validation") {
    ForestHyperparams hp;
    CHECK_NOTHROW(hp.validate());
    hp.n_trees = 0;
    CHECK_THROWS_AS(hp.validate(), InvalidArgument);
    hp = {};
    hp.max_terminal_nodes = 1;
    CHECK_THROWS_AS(hp.validate(), InvalidArgument);
    hp = {};
    hp.min_size_rule = MinSizeRule::LeavesPerTree;
    hp.min_leaf_size = 30;
    CHECK_THROWS_AS(hp.validate(), InvalidArgument);
}

TEST_CASE("trees respect the leaf bounds") {
    const Fixture f(400);
    std::vector<bool> y = f.corpus.labels;
    // Some label noise forces deep trees.
    Rng rng(2);
    for (std::size_t i = 0; i < y.size(); ++i)
        if (rand_unit(rng) < 0.2) y[i] = !y[i];
    for (const int max_leaves : {2, 7, 25}) {
        auto hp = small();
        hp.max_terminal_nodes = max_leaves;
        hp.min_leaf_size = 5;
        const auto model = train_forest(f.matrix, y, hp);
        for (const auto& tree : model.trees()) {
            CHECK(tree.leaf_count() <= static_cast<std::size_t>(max_leaves));
            CHECK(tree.min_leaf_weight() >= 5.0);
            for (const auto& node : tree.nodes()) {
                if (node.is_leaf()) continue;
                CHECK(node.left > 0);
                CHECK(node.right > 0);
            }
        }
    }
}

TEST_CASE("leaves-per-tree rule grows at least that many leaves when it can") {
    const Fixture f(200);
    auto hp = small();
    hp.min_size_rule = MinSizeRule::LeavesPerTree;
    hp.min_leaf_size = 4;
    hp.features_per_split = 400;
    const auto model = train_forest(f.matrix, f.corpus.labels, hp);
    for (const auto& tree : model.trees()) CHECK(tree.leaf_count() >= 2);
}

TEST_CASE("probabilities are averages of leaf fractions") {
    const Fixture f(200);
    const auto model = train_forest(f.matrix, f.corpus.labels, small());
    for (std::size_t r = 0; r < f.matrix.rows(); r += 17) {
        const auto row = row_of(f.matrix, r);
        double sum = 0.0;
        for (const auto& tree : model.trees()) sum += tree.positive_fraction(row);
        CHECK(model.predict_proba(row) == doctest::Approx(sum / 20.0));
        CHECK(model.predict_proba(row) >= 0.0);
        CHECK(model.predict_proba(row) <= 1.0);
    }
}

TEST_CASE("serialization round trip is exact") {
    const Fixture f(200);
    const auto model = train_forest(f.matrix, f.corpus.labels, small(), "2020-05-01T00:00:00Z");
    const auto back = ForestModel::from_json(model.to_json());
    CHECK(back == model);
    CHECK(back.to_json() == model.to_json());
    CHECK(back.vocab_hash() == f.vocab->hash());
    CHECK(back.metadata().trained_at == "2020-05-01T00:00:00Z");
    const auto dir = synth::fresh_dir("forest_io");
    model.save(dir / "model.json");
    CHECK(ForestModel::load(dir / "model.json") == model);
    CHECK_THROWS_AS(ForestModel::from_json("{\"format\": 99}"), ParseError);
}

TEST_CASE("different seeds give different forests") {
    const Fixture f(200);
    CHECK(train_forest(f.matrix, f.corpus.labels, small(1)).to_json() !=
          train_forest(f.matrix, f.corpus.labels, small(2)).to_json());
}

TEST_CASE("thread count does not change the model") {
    const Fixture f(200);
    set_thread_count(1);
    const auto a = train_forest(f.matrix, f.corpus.labels, small());
    set_thread_count(4);
    const auto b = train_forest(f.matrix, f.corpus.labels, small());
    set_thread_count(0);
    CHECK(a.to_json() == b.to_json());
}

TEST_CASE("training rejects too few examples per class") {
    const Fixture f(10);
    std::vector<bool> y(10, false);
    y[0] = true;
    CHECK_THROWS_AS(train_forest(f.matrix, y, small()), InvalidArgument);
}

TEST_CASE("prediction rejects a foreign vocabulary") {
    const Fixture f(100);
    const auto model = train_forest(f.matrix, f.corpus.labels, small());
    const auto bigger = synth::vocabulary_for({synth::tweet("z", "entirely new words here")});
    const auto m = synth::matrix_for({synth::tweet("z", "entirely new words here")}, bigger);
    REQUIRE(bigger->size() != f.vocab->size());
    CHECK_THROWS_AS(model.predict_proba(row_of(m, 0)), InvalidArgument);
}

TEST_CASE("stratified split proportions") {
    std::vector<LabeledId> ex;
    for (int i = 0; i < 90; ++i) ex.push_back({fmt::format("a{:03d}", i), i < 30});
    const auto s = stratified_split(ex, 2.0 / 3.0, false, 4);
    CHECK(s.train.size() == 60);
    CHECK(s.test.size() == 30);
    CHECK(std::count_if(s.train.begin(), s.train.end(), [](const LabeledId& e) { return e.positive; }) == 20);

    const auto b = stratified_split(ex, 2.0 / 3.0, true, 4);
    const auto pos = std::count_if(b.train.begin(), b.train.end(), [](const LabeledId& e) { return e.positive; });
    CHECK(pos * 2 == static_cast<std::ptrdiff_t>(b.train.size()));
    CHECK(b.train.size() + b.test.size() == 90);

    std::set<std::string> ids;
    for (const auto& e : b.train) ids.insert(e.id);
    for (const auto& e : b.test) CHECK(ids.insert(e.id).second);

    auto reversed = ex;
    std::reverse(reversed.begin(), reversed.end());
    CHECK(stratified_split(reversed, 2.0 / 3.0, true, 4).train == b.train);
    CHECK_THROWS_AS(stratified_split(ex, 1.0, true, 4), InvalidArgument);
}

TEST_CASE("balance_classes downsamples the majority") {
    std::vector<LabeledId> ex;
    for (int i = 0; i < 50; ++i) ex.push_back({std::to_string(i), i % 5 == 0});
    std::vector<LabeledId> surplus;
    const auto bal = balance_classes(ex, 1, &surplus);
    CHECK(bal.size() == 20);
    CHECK(surplus.size() == 30);
    for (const auto& e : surplus) CHECK_FALSE(e.positive);
}
