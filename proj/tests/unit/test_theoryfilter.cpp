#include "infodemic/error.hpp"
#include "infodemic/theoryfilter.hpp"

#include "../support/synthetic.hpp"

#include <doctest.h>

#include <regex>

using namespace infodemic;
using namespace infodemic::theoryfilter;

namespace {

std::vector<TheoryConfig> bundled() {
    return load_theory_config(std::filesystem::path(INFODEMIC_SOURCE_DIR) / "data" / "theories.conf");
}

const std::vector<std::string> kFragments{"5G",        "5 g",     "five g",     "cell towers", "Bill Gates",
                                          "melinda",   "#billgates", "lab leaked", "man-made",    "bioweapon",
                                          "vaccine",   "VAX",     "microchips", "antivaxxers", "weather",
                                          "lockdown",  "gatesway", "vaccination", "labs",       "radio tower"};

std::string random_text(Rng& rng) {
    std::string s;
    const std::size_t n = 1 + rand_below(rng, 5);
    for (std::size_t i = 0; i < n; ++i) s += kFragments[rand_below(rng, kFragments.size())] + " and ";
    return s;
}

} // namespace

TEST_CASE("config parsing") {
    const auto configs = parse_theory_config(
        "# comment\n[theory]\nname = A\npattern = \\ba\\b\npattern = x=y\n; other\n[theory]\nname = B\n"
        "case_insensitive = false\npattern = B\n");
    REQUIRE(configs.size() == 2);
    CHECK(configs[0].name == "A");
    CHECK(configs[0].include_patterns == std::vector<std::string>{"\\ba\\b", "x=y"});
    CHECK(configs[1].case_insensitive == false);
    CHECK_THROWS_AS(parse_theory_config("name = orphan\n"), ParseError);
    CHECK_THROWS_AS(compile_theory({"Bad", {"(unclosed"}, true}), InvalidArgument);
}

TEST_CASE("case sensitivity follows the config") {
    const auto ci = compile_theory({"A", {"gates"}, true});
    const auto cs = compile_theory({"A", {"gates"}, false});
    CHECK(ci.matches("Bill GATES"));
    CHECK_FALSE(cs.matches("Bill GATES"));
    CHECK(cs.matches("bill gates"));
}

TEST_CASE("bundled theories match representative tweets") {
    const auto theories = compile_theories(bundled());
    const auto names = [&](const char* text) { return match_theories(synth::tweet("x", text), theories); };
    CHECK(names("5G towers cause it") == std::vector<std::string>{"5G"});
    CHECK(names("Bill Gates wants vaccines") == std::vector<std::string>{"Gates", "Vax"});
    CHECK(names("the Wuhan lab leaked it") == std::vector<std::string>{"Lab"});
    CHECK(names("wash your hands").empty());
}

TEST_CASE("partition counts match an independent regex scan") {
    const auto configs = bundled();
    std::vector<std::vector<std::regex>> oracle;
    for (const auto& c : configs) {
        std::vector<std::regex> rs;
        for (const auto& p : c.include_patterns)
            rs.emplace_back(p, c.case_insensitive ? std::regex::ECMAScript | std::regex::icase : std::regex::ECMAScript);
        oracle.push_back(std::move(rs));
    }
    Rng rng(12);
    std::vector<corpus::Tweet> tweets;
    for (int i = 0; i < 500; ++i) tweets.push_back(synth::tweet(std::to_string(i), random_text(rng)));

    std::map<std::string, std::size_t> count, multi;
    std::map<TheoryPair, std::size_t> pairs;
    std::size_t unique = 0;
    for (const auto& t : tweets) {
        std::vector<std::string> hit;
        for (std::size_t k = 0; k < configs.size(); ++k)
            for (const auto& r : oracle[k])
                if (std::regex_search(t.text, r)) {
                    hit.push_back(configs[k].name);
                    break;
                }
        unique += !hit.empty();
        for (const auto& h : hit) {
            ++count[h];
            if (hit.size() > 1) ++multi[h];
        }
        for (std::size_t a = 0; a < hit.size(); ++a)
            for (std::size_t b = a + 1; b < hit.size(); ++b)
                ++pairs[std::minmax(hit[a], hit[b])];
    }

    const auto partition = partition_corpus(tweets, compile_theories(configs));
    for (const auto& c : configs) {
        CHECK(partition.report.per_theory_count.at(c.name) == count[c.name]);
        CHECK(partition.report.multi_theory_count.at(c.name) == multi[c.name]);
        CHECK(partition.datasets.at(c.name).size() == count[c.name]);
    }
    for (const auto& [pair, n] : pairs) CHECK(partition.report.overlap(pair.first, pair.second) == n);
    CHECK(partition.report.total_unique == unique);
}

TEST_CASE("report invariants") {
    Rng rng(4);
    const std::vector<std::string> order{"A", "B", "C"};
    std::vector<std::vector<std::string>> sets;
    for (int i = 0; i < 300; ++i) {
        std::vector<std::string> s;
        for (const auto& t : order)
            if (rand_unit(rng) < 0.3) s.push_back(t);
        sets.push_back(s);
    }
    const auto r = summarize_matches(order, sets);
    auto shuffled = sets;
    shuffle(std::span(shuffled), rng);
    const auto r2 = summarize_matches(order, shuffled);
    CHECK(r.per_theory_count == r2.per_theory_count);
    CHECK(r.pairwise_overlap == r2.pairwise_overlap);

    double pct = 0.0;
    for (const auto& t : order) {
        pct += r.percent_of_total(t);
        CHECK(r.multi_theory_count.at(t) <= r.per_theory_count.at(t));
        CHECK(r.overlap(t, t == "A" ? "B" : "A") <= r.multi_theory_count.at(t));
        CHECK(r.overlap("A", "B") == r.overlap("B", "A"));
    }
    CHECK(pct == doctest::Approx(100.0));
    CHECK(r.total_memberships() >= r.total_unique);
}

TEST_CASE("partition csv round trip") {
    const auto r = summarize_matches({"A", "B"}, {{"A"}, {"A", "B"}, {"B"}, {}});
    const auto dir = synth::fresh_dir("theory_csv");
    write_partition_csv(r, dir / "p.csv");
    write_edge_csv(r, dir / "e.csv");
    const auto back = read_partition_csv(dir / "p.csv", dir / "e.csv");
    CHECK(back.theories == r.theories);
    CHECK(back.per_theory_count == r.per_theory_count);
    CHECK(back.multi_theory_count == r.multi_theory_count);
    CHECK(back.overlap("A", "B") == 1);
}
