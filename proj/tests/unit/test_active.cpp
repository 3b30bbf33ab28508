#include "infodemic/active.hpp"
#include "infodemic/error.hpp"

#include "../support/synthetic.hpp"

#include <doctest.h>

#include <cmath>
#include <set>

using namespace infodemic;
using namespace infodemic::active;

namespace {

struct Session {
    synth::LabeledCorpus corpus;
    std::shared_ptr<const ActiveDataset> data;
    std::vector<forest::LabeledId> seed, test;
    std::map<std::string, bool> truth;
};

Session make_session(std::size_t n = 240, std::uint64_t seed = 6) {
    Session s;
    s.corpus = synth::noisy_boundary_corpus(n, seed);
    // A planted near-duplicate of the first seed document.
    std::string near = s.corpus.tweets[100].text;
    near.back() = 's';
    s.corpus.tweets.push_back(synth::tweet("dup", near));
    s.corpus.labels.push_back(s.corpus.labels[100]);
    const auto vocab = synth::vocabulary_for(s.corpus.tweets);
    s.data = std::make_shared<const ActiveDataset>(
        make_dataset(s.corpus.tweets, {}, vocab, {}, textfeat::LinkageIndex(s.corpus.tweets)));
    for (std::size_t i = 0; i < s.corpus.tweets.size(); ++i) {
        const forest::LabeledId e{s.corpus.tweets[i].id, s.corpus.labels[i]};
        s.truth[e.id] = e.positive;
        if (i < 80) s.test.push_back(e);
        else if (i >= 100 && i < 120) s.seed.push_back(e);
    }
    return s;
}

ActiveConfig small_config() {
    ActiveConfig c;
    c.forest.n_trees = 15;
    c.forest.seed = 2;
    c.n_cycles = 3;
    return c;
}

struct TruthOracle : LabelOracle {
    const std::map<std::string, bool>* truth;
    int calls = 0;
    int abort_at = -1;
    std::vector<OracleRequest> seen;
    std::optional<OracleResponse> ask(const OracleRequest& r) override {
        if (calls++ == abort_at) return std::nullopt;
        seen.push_back(r);
        return OracleResponse{r.tweet_id, truth->at(r.tweet_id) ? Label::Misinfo : Label::NotMisinfo, "t"};
    }
};

} // namespace

TEST_CASE("labels parse and print") {
    for (const auto l : {Label::Misinfo, Label::NotMisinfo, Label::Uncertain}) CHECK(parse_label(to_string(l)) == l);
    CHECK_THROWS_AS(parse_label("maybe"), ParseError);
}

TEST_CASE("binary entropy") {
    CHECK(binary_entropy(0.5) == doctest::Approx(1.0));
    CHECK(binary_entropy(0.0) == 0.0);
    CHECK(binary_entropy(1.0) == 0.0);
    CHECK(binary_entropy(0.2) == doctest::Approx(binary_entropy(0.8)));
    CHECK_THROWS_AS(binary_entropy(1.5), InvalidArgument);
}

TEST_CASE("uncertainty selection order") {
    const std::vector<ScoredItem> pool{{"a", 0.9}, {"b", 0.5}, {"c", 0.45}, {"d", 0.55}, {"e", 0.1}};
    const auto top = select_uncertain(pool, 3);
    REQUIRE(top.size() == 3);
    CHECK(top[0].id == "b");
    CHECK(top[1].id == "c");
    CHECK(top[2].id == "d");
    CHECK_THROWS_AS(select_uncertain(pool, 6), InvalidArgument);
    CHECK(select_uncertain(pool, 0).empty());
}

TEST_CASE("levenshtein counts code points") {
    CHECK(levenshtein("kitten", "sitting") == 3);
    CHECK(levenshtein("", "abc") == 3);
    CHECK(levenshtein("caf\xc3\xa9", "cafe") == 1);
    CHECK(levenshtein("\xe2\x82\xac", "") == 1);
    CHECK(string_similarity("", "") == 1.0);
    CHECK(string_similarity("abcd", "abce") == doctest::Approx(0.75));

    Rng rng(1);
    for (int i = 0; i < 200; ++i) {
        std::string a, b, c;
        for (std::size_t j = rand_below(rng, 12); j > 0; --j) a += static_cast<char>('a' + rand_below(rng, 3));
        for (std::size_t j = rand_below(rng, 12); j > 0; --j) b += static_cast<char>('a' + rand_below(rng, 3));
        for (std::size_t j = rand_below(rng, 12); j > 0; --j) c += static_cast<char>('a' + rand_below(rng, 3));
        CHECK(levenshtein(a, b) == levenshtein(b, a));
        CHECK(levenshtein(a, c) <= levenshtein(a, b) + levenshtein(b, c));
        CHECK(levenshtein(a, b) >= (a.size() > b.size() ? a.size() - b.size() : b.size() - a.size()));
    }
}

TEST_CASE("propagation honours the threshold") {
    const std::vector<PoolText> pool{{"p1", "aaaaaaaaaaaaaaaaaaab"}, {"p2", "aaaaaaaaaaaaaaaaaabb"}, {"p3", "zzz"}};
    const LabeledExample human{"h", Label::Misinfo, {}, 2};
    const auto out = propagate_labels(human, "aaaaaaaaaaaaaaaaaaaa", pool, kDefaultSimilarityThreshold, 2);
    REQUIRE(out.size() == 1);
    CHECK(out[0].tweet_id == "p1");
    CHECK(out[0].label == Label::Misinfo);
    CHECK(out[0].source.kind == SourceKind::Propagated);
    CHECK(out[0].source.from_id == "h");
    CHECK(out[0].source.similarity == doctest::Approx(0.95));
    CHECK(out[0].round == 2);
    CHECK(propagate_labels(human, "aaaaaaaaaaaaaaaaaaaa", pool, 0.9).size() == 2);
}

TEST_CASE("cohen kappa on a worked table") {
    // 20 agree positive, 15 agree negative, 5 + 10 disagree.
    std::vector<std::string> a, b;
    for (int i = 0; i < 20; ++i) a.push_back("y"), b.push_back("y");
    for (int i = 0; i < 15; ++i) a.push_back("n"), b.push_back("n");
    for (int i = 0; i < 5; ++i) a.push_back("y"), b.push_back("n");
    for (int i = 0; i < 10; ++i) a.push_back("n"), b.push_back("y");
    const auto r = cohen_kappa(a, b);
    CHECK(r.n_overlap == 50);
    CHECK(r.agreement == doctest::Approx(0.7));
    CHECK(r.kappa == doctest::Approx((0.7 - 0.5) / 0.5));
    CHECK_THROWS_AS(cohen_kappa(std::vector<std::string>{"y"}, std::vector<std::string>{}), InvalidArgument);
    CHECK_THROWS_AS(cohen_kappa(std::vector<std::string>{}, std::vector<std::string>{}), InvalidArgument);
}

TEST_CASE("uncertain labels resolve only on unanimous co-raters") {
    const std::vector<LabeledExample> uncertain{{"a", Label::Uncertain, {}, 0}, {"b", Label::Uncertain, {}, 0},
                                                {"c", Label::Uncertain, {}, 0}};
    const std::map<std::string, std::vector<Label>> co{{"a", {Label::Misinfo, Label::Misinfo}},
                                                       {"b", {Label::Misinfo, Label::NotMisinfo}}};
    const auto out = resolve_uncertain(uncertain, co);
    REQUIRE(out.examples.size() == 3);
    CHECK(out.examples[0].label == Label::Misinfo);
    CHECK(out.examples[0].source.kind == SourceKind::Resolved);
    CHECK(out.examples[1].label == Label::Uncertain);
    CHECK(out.examples[2].label == Label::Uncertain);
    CHECK_FALSE(out.log.empty());
}

TEST_CASE("session bookkeeping through cycles") {
    const auto s = make_session();
    ActiveSession session(s.data, s.seed, s.test, small_config());
    CHECK(session.cycle() == 0);
    // The planted near-duplicate left the pool with the seed label.
    REQUIRE(session.labeled().count("dup"));
    CHECK(session.labeled().at("dup").source.kind == SourceKind::Propagated);
    CHECK(session.metrics_history().size() == 1);

    const std::size_t total = s.data->ids.size();
    TruthOracle oracle;
    oracle.truth = &s.truth;
    while (!session.complete()) {
        const auto before_pool = session.pool().size();
        const auto r = session.run_cycle(oracle);
        REQUIRE(r);
        CHECK(r->accepted == 3);
        CHECK(session.pool().size() == before_pool - 3 - r->propagated_count);
        CHECK(session.labeled().size() + session.pool().size() + session.test().size() == total);
        for (const auto& id : session.pool()) CHECK_FALSE(session.labeled().count(id));
    }
    CHECK(session.cycle() == 3);
    CHECK(session.metrics_history().size() == 4);
    for (const auto& req : oracle.seen) CHECK(req.cycle >= 1);
    CHECK(oracle.seen.back().cycle == 3);
    CHECK_THROWS_AS(session.run_cycle(oracle), OutOfRange);

    std::size_t seq = 0;
    for (const auto& e : session.audit()) CHECK(e.seq == seq++);
}

TEST_CASE("aborted cycles leave the session unchanged") {
    const auto s = make_session();
    ActiveSession session(s.data, s.seed, s.test, small_config());
    TruthOracle oracle;
    oracle.truth = &s.truth;
    oracle.abort_at = 1;
    const auto pool = session.pool();
    CHECK_FALSE(session.run_cycle(oracle));
    CHECK(session.cycle() == 0);
    CHECK(session.pool() == pool);
}

TEST_CASE("non-pool labels are rejected") {
    const auto s = make_session();
    ActiveSession session(s.data, s.seed, s.test, small_config());
    const auto r = session.apply_labels({{s.test[0].id, Label::Misinfo, "t"}, {"nope", Label::Misinfo, "t"}});
    CHECK(r.accepted == 0);
    CHECK(r.rejected.size() == 2);
    CHECK(session.cycle() == 0);
}

TEST_CASE("uncertain answers are recorded but not trained on") {
    const auto s = make_session();
    ActiveSession session(s.data, s.seed, s.test, small_config());
    const auto batch = session.next_batch(1);
    const auto before = session.training_set().size();
    session.apply_labels({{batch[0].id, Label::Uncertain, "t"}});
    CHECK(session.labeled().at(batch[0].id).label == Label::Uncertain);
    CHECK(session.training_set().size() <= before);
}

TEST_CASE("random strategy is seeded") {
    const auto s = make_session();
    auto c = small_config();
    c.strategy = QueryStrategy::Random;
    ActiveSession a(s.data, s.seed, s.test, c), b(s.data, s.seed, s.test, c);
    const auto ba = a.next_batch(3), bb = b.next_batch(3);
    for (std::size_t i = 0; i < 3; ++i) CHECK(ba[i].id == bb[i].id);
}

TEST_CASE("audit log round trip and replay") {
    const auto s = make_session();
    ActiveSession session(s.data, s.seed, s.test, small_config());
    TruthOracle oracle;
    oracle.truth = &s.truth;
    session.run_cycle(oracle);
    session.run_cycle(oracle);

    const auto dir = synth::fresh_dir("active_audit");
    std::string text;
    for (const auto& e : session.audit()) text += to_json_line(e) + "\n";
    write_file(dir / "audit.jsonl", text);
    const auto events = load_audit_log(dir / "audit.jsonl");
    REQUIRE(events.size() == session.audit().size());
    CHECK(to_json_line(events.back()) == to_json_line(session.audit().back()));

    const auto replayed = ActiveSession::replay(s.data, s.seed, s.test, small_config(), events);
    CHECK(replayed.cycle() == 2);
    CHECK(replayed.pool() == session.pool());
    CHECK(replayed.model().to_json() == session.model().to_json());
    CHECK(replayed.metrics_history().back().f1 == session.metrics_history().back().f1);

    auto truncated = events;
    truncated.pop_back();
    CHECK_THROWS_AS(ActiveSession::replay(s.data, s.seed, s.test, small_config(), truncated), ParseError);
    CHECK_THROWS_AS(parse_audit_line("{not json"), ParseError);
}

TEST_CASE("session construction validates inputs") {
    const auto s = make_session();
    CHECK_THROWS_AS(ActiveSession(s.data, s.seed, {}, small_config()), InvalidArgument);
    auto overlap = s.seed;
    overlap.push_back(s.test[0]);
    CHECK_THROWS_AS(ActiveSession(s.data, overlap, s.test, small_config()), InvalidArgument);
    auto c = small_config();
    c.sim_threshold = 0.0;
    CHECK_THROWS_AS(ActiveSession(s.data, s.seed, s.test, c), InvalidArgument);
    CHECK_THROWS_AS(s.data->row_of("missing"), InvalidArgument);
}
