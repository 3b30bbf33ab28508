#include "infodemic/error.hpp"
#include "infodemic/textfeat.hpp"

#include "../support/synthetic.hpp"

#include <doctest.h>

#include <map>
#include <set>

using namespace infodemic;
using namespace infodemic::textfeat;

TEST_CASE("tokenize strips punctuation and stopwords") {
    const StopwordSet stop{"the", "a"};
    CHECK(tokenize("RT @bob: The 5G towers, (really)! #Covid19 @who https://x.co/1", stop) ==
          std::vector<std::string>{"5g", "towers", "really", "#covid19", "@who"});
    CHECK(tokenize("  ...  # @ ", stop).empty());
    CHECK(tokenize("don't stop", {}) == std::vector<std::string>{"don't", "stop"});
}

TEST_CASE("bundled stopwords load") {
    const auto stop = load_stopwords(std::filesystem::path(INFODEMIC_SOURCE_DIR) / "data" / "stopwords_en.txt");
    CHECK(stop.contains("the"));
    CHECK_FALSE(stop.contains("vaccine"));
}

TEST_CASE("bigrams") {
    CHECK(bigrams({"a", "b", "c"}) == std::vector<std::string>{"a_b", "b_c"});
    CHECK(bigrams({"a"}).empty());
}

TEST_CASE("vocabulary keeps terms by document frequency") {
    Rng rng(21);
    std::vector<std::vector<std::string>> docs;
    for (int d = 0; d < 200; ++d) {
        std::vector<std::string> doc;
        const std::size_t n = 1 + rand_below(rng, 8);
        for (std::size_t i = 0; i < n; ++i) doc.push_back(synth::word("w", rand_below(rng, 60)));
        docs.push_back(doc);
    }
    for (const double min_df : {0.0, 0.01, 0.05}) {
        std::map<std::string, std::set<int>> seen;
        for (int d = 0; d < 200; ++d) {
            for (const auto& t : docs[d]) seen[t].insert(d);
            for (const auto& b : bigrams(docs[d])) seen[b].insert(d);
        }
        std::vector<std::string> expected;
        for (const auto& [term, ds] : seen)
            if (static_cast<double>(ds.size()) / 200.0 >= min_df) expected.push_back(term);
        const auto vocab = build_vocabulary(docs, min_df, true);
        CHECK(vocab.terms() == expected);
        for (std::size_t i = 0; i < vocab.size(); ++i) CHECK(vocab.df()[i] == seen[vocab.term(i)].size());
    }
    const auto uni = build_vocabulary(docs, 0.0, false);
    for (const auto& t : uni.terms()) CHECK(t.find('_') == std::string::npos);
    CHECK_THROWS_AS(build_vocabulary({}, 0.0), InvalidArgument);
    CHECK_THROWS_AS(build_vocabulary(docs, 1.0), InvalidArgument);
}

TEST_CASE("vocabulary save and load") {
    const auto vocab = build_vocabulary({{"a", "b"}, {"b", "c"}}, 0.0, true);
    const auto dir = synth::fresh_dir("textfeat_vocab");
    vocab.save(dir / "v.json");
    const auto back = Vocabulary::load(dir / "v.json");
    CHECK(back.terms() == vocab.terms());
    CHECK(back.df() == vocab.df());
    CHECK(back.hash() == vocab.hash());
    CHECK(back.index_of("b_c") == vocab.index_of("b_c"));
    CHECK(vocab.index_of("zzz") == -1);
    CHECK(vocab.hash() == sha256_hex("a\na_b\nb\nb_c\nc\n"));
}

TEST_CASE("vectorize counts unigrams and bigrams in the vocabulary") {
    const auto vocab = build_vocabulary({{"x", "y", "x", "y"}}, 0.0, true);
    const auto v = vectorize({"x", "y", "x", "y", "z"}, vocab);
    CHECK(v.dimension == vocab.size());
    CHECK(v.at(vocab.index_of("x")) == 2);
    CHECK(v.at(vocab.index_of("x_y")) == 2);
    CHECK(v.at(vocab.index_of("y_x")) == 1);
    CHECK(v.total() == 2 + 2 + 2 + 1);
    CHECK(std::is_sorted(v.entries.begin(), v.entries.end(),
                         [](const SparseEntry& a, const SparseEntry& b) { return a.index < b.index; }));
}

TEST_CASE("domains match subdomains") {
    const DomainList d({"bad.com"});
    CHECK(d.is_flagged("bad.com"));
    CHECK(d.is_flagged("news.bad.com"));
    CHECK_FALSE(d.is_flagged("notbad.com"));
    CHECK_FALSE(d.is_flagged("bad.com.au"));
    const auto bundled = load_domain_list(std::filesystem::path(INFODEMIC_SOURCE_DIR) / "data" / "domains.csv");
    CHECK(bundled.size() > 0);
}

TEST_CASE("link features follow reply and retweet chains") {
    const DomainList d({"bad.com"});
    auto origin = synth::tweet("o", "story https://bad.com/x");
    origin.linked_urls = {"https://bad.com/x"};
    auto reply = synth::tweet("r", "reply");
    reply.reply_to_id = "o";
    auto rt = synth::tweet("rt", "RT");
    rt.retweet_of_id = "o";
    auto hop2 = synth::tweet("h2", "deeper");
    hop2.reply_to_id = "r";
    auto hop3 = synth::tweet("h3", "deeper still");
    hop3.retweet_of_id = "h2";
    auto hop4 = synth::tweet("h4", "too deep");
    hop4.reply_to_id = "h3";
    auto dangling = synth::tweet("x", "dangling");
    dangling.reply_to_id = "missing";
    const std::vector<corpus::Tweet> all{origin, reply, rt, hop2, hop3, hop4, dangling};
    const LinkageIndex index(all);

    CHECK(domain_link_features(origin, d, index) == LinkFlags{true, false, false, false});
    CHECK(domain_link_features(reply, d, index) == LinkFlags{false, true, false, false});
    CHECK(domain_link_features(rt, d, index) == LinkFlags{false, false, true, false});
    CHECK(domain_link_features(hop2, d, index) == LinkFlags{false, false, false, true});
    CHECK(domain_link_features(hop3, d, index) == LinkFlags{false, false, false, true});
    CHECK(domain_link_features(hop4, d, index) == LinkFlags{});
    CHECK(domain_link_features(dangling, d, index) == LinkFlags{});

    auto by_domain = synth::tweet("s", "no url");
    by_domain.source_domain = "www.bad.com";
    CHECK(originates_from_flagged(by_domain, d));
}

TEST_CASE("feature matrix rows align with tweets") {
    const auto corpus = synth::separable_corpus(30, 2);
    const auto vocab = synth::vocabulary_for(corpus.tweets);
    const auto m = synth::matrix_for(corpus.tweets, vocab);
    REQUIRE(m.rows() == 30);
    CHECK(m.feature_count() == vocab->size() + 4);
    for (std::size_t i = 0; i < m.rows(); ++i) {
        CHECK(m.doc_ids[i] == corpus.tweets[i].id);
        CHECK(m.counts[i] == vectorize(tokenize(corpus.tweets[i].text, {}), *vocab));
    }
    const auto dir = synth::fresh_dir("textfeat_matrix");
    write_triplets_csv(m, dir / "t.csv");
    write_link_flags_csv(m, dir / "l.csv");
    CHECK(read_csv(dir / "l.csv").rows.size() == 30);
    std::size_t nnz = 0;
    for (const auto& c : m.counts) nnz += c.entries.size();
    CHECK(read_csv(dir / "t.csv").rows.size() == nnz);
}
