// Writes the bundled fixture corpus and hand-label files used by the
// pipeline tests. Usage: make_fixtures OUT_DIR [THEORIES_CONF]

#include "infodemic/corpus.hpp"
#include "infodemic/io.hpp"
#include "infodemic/rng.hpp"
#include "infodemic/theoryfilter.hpp"

#include <fmt/format.h>

#include <array>
#include <fstream>
#include <iostream>
#include <map>

using namespace infodemic;

namespace {

struct TheoryWords {
    const char* name;
    std::vector<std::string> hooks;
    std::vector<std::string> misinfo;
    std::vector<std::string> factual;
    double misinfo_rate;
};

const std::vector<TheoryWords>& theories() {
    static const std::vector<TheoryWords> t{
        {"5G",
         {"5G towers", "the 5G rollout", "5g masts", "cell towers"},
         {"radiation", "weakens", "immune", "spreads", "frequency", "burn", "cover-up", "poison", "dangerous", "truth"},
         {"debunked", "physics", "radio", "waves", "cannot", "carry", "experts", "explain", "myth", "engineers"},
         0.5},
        {"Gates",
         {"Bill Gates", "the Gates Foundation", "billgates", "Melinda and Bill Gates"},
         {"patent", "profit", "depopulation", "agenda", "control", "planned", "evil", "fraud", "owns", "scam"},
         {"donates", "funding", "research", "charity", "pledge", "grant", "support", "global", "health", "help"},
         0.5},
        {"Lab",
         {"the Wuhan lab", "a bioweapon", "man-made virus", "the lab leaked"},
         {"engineered", "cover-up", "leaked", "weapon", "deliberately", "secret", "liar", "hide", "evil", "fake"},
         {"scientists", "natural", "origin", "bats", "evidence", "genome", "analysis", "zoonotic", "study", "peer"},
         0.45},
        {"Vax",
         {"the vaccine", "vaccines", "mandatory vaccination", "microchip vaccine"},
         {"microchip", "tracking", "poison", "sterilize", "kill", "dna", "alter", "toxic", "harm", "forced"},
         {"trial", "phase", "volunteers", "approved", "safe", "effective", "doses", "immunity", "research", "hope"},
         0.2},
    };
    return t;
}

const std::vector<std::string> kFiller{"people", "today", "news", "think", "really", "everyone", "covid",
                                       "coronavirus", "pandemic", "world", "week", "read", "share", "new",
                                       "report", "video", "watch", "government", "media", "know"};
const std::vector<std::string> kNoTheory{"stay home", "wash your hands", "flatten the curve", "lockdown day",
                                         "social distancing", "masks on"};
const std::vector<std::string> kFlagged{"infowars.com", "naturalnews.com", "zerohedge.com", "beforeitsnews.com"};
const std::vector<std::string> kCredible{"reuters.com", "apnews.com", "who.int", "cdc.gov"};

template <typename T>
const T& pick(const std::vector<T>& v, Rng& rng) {
    return v[rand_below(rng, v.size())];
}

std::string words(const std::vector<std::string>& pool, std::size_t n, Rng& rng) {
    std::string s;
    for (std::size_t i = 0; i < n; ++i) s += (i ? " " : "") + pick(pool, rng);
    return s;
}

} // namespace

int main(int argc, char** argv) {
    if (argc < 2) {
        std::cerr << "usage: make_fixtures OUT_DIR [THEORIES_CONF]\n";
        return 2;
    }
    const std::filesystem::path out(argv[1]);
    const std::filesystem::path conf = argc > 2 ? argv[2] : "data/theories.conf";
    ensure_directory(out);
    Rng rng(20200121);

    const Timestamp start = *parse_timestamp("2020-01-21T00:00:00Z");
    const std::int64_t span = 108 * 86400; // to 2020-05-08
    std::vector<corpus::Tweet> tweets;
    std::map<std::string, bool> truth;
    std::vector<std::string> raw_lines;

    const std::size_t n = 1400;
    for (std::size_t i = 0; i < n; ++i) {
        corpus::Tweet t;
        t.id = fmt::format("t{:05d}", i + 1);
        t.author_id = fmt::format("u{:03d}", rand_below(rng, 300));
        t.lang = rand_unit(rng) < 0.03 ? "es" : "en";
        const double u = rand_unit(rng);
        // Later tweets lean toward misinformation.
        t.created_at = start + std::chrono::seconds(static_cast<std::int64_t>(u * static_cast<double>(span)));

        if (rand_unit(rng) < 0.08) {
            t.text = fmt::format("{} {} {}", pick(kNoTheory, rng), words(kFiller, 4, rng), "#covid19");
            tweets.push_back(t);
            continue;
        }
        const auto& th = theories()[rand_below(rng, theories().size())];
        const bool misinfo = rand_unit(rng) < th.misinfo_rate * (0.7 + 0.6 * u);
        truth[t.id] = misinfo;
        const auto& own = misinfo ? th.misinfo : th.factual;
        const auto& other = misinfo ? th.factual : th.misinfo;
        std::string body = pick(th.hooks, rng) + " " + words(own, 3 + rand_below(rng, 3), rng);
        if (rand_unit(rng) < 0.2) body += " " + pick(other, rng);
        body += " " + words(kFiller, 2 + rand_below(rng, 3), rng);
        if (rand_unit(rng) < 0.15) {
            const auto& th2 = theories()[rand_below(rng, theories().size())];
            body += " and " + pick(th2.hooks, rng) + " " + pick(misinfo ? th2.misinfo : th2.factual, rng);
        }
        if (misinfo && rand_unit(rng) < 0.3) {
            const auto& d = pick(kFlagged, rng);
            t.source_domain = d;
            t.linked_urls.push_back(fmt::format("https://www.{}/story/{}", d, i));
            body += " https://www." + d + "/story/" + std::to_string(i);
        } else if (!misinfo && rand_unit(rng) < 0.3) {
            const auto& d = pick(kCredible, rng);
            t.linked_urls.push_back(fmt::format("https://{}/article/{}", d, i));
            body += " https://" + d + "/article/" + std::to_string(i);
        }
        if (rand_unit(rng) < 0.3) body += misinfo ? " fear panic lies" : " hope safe";
        t.text = body;

        if (!tweets.empty() && rand_unit(rng) < 0.12) {
            // Retweet or reply to an earlier tweet.
            const auto& target = tweets[rand_below(rng, tweets.size())];
            if (truth.count(target.id)) {
                if (rand_unit(rng) < 0.6) {
                    t.retweet_of_id = target.id;
                    t.text = "RT @" + target.author_id + ": " + target.text;
                    t.linked_urls = target.linked_urls;
                    t.source_domain.reset();
                    truth[t.id] = truth[target.id];
                } else {
                    t.reply_to_id = target.id;
                }
            }
        }
        tweets.push_back(std::move(t));
    }

    for (const auto& t : tweets) raw_lines.push_back(corpus::to_json_line(t));
    // A few records ingest must reject or drop.
    raw_lines.insert(raw_lines.begin() + 10, "{\"id\": \"broken\", \"text\": ");
    raw_lines.insert(raw_lines.begin() + 500, "{\"id\": \"t99999\", \"created_at\": \"not a date\", \"text\": \"x\"}");
    raw_lines.push_back(corpus::to_json_line(tweets[42]));
    raw_lines.push_back(corpus::to_json_line(tweets[43]));
    {
        std::string s;
        for (const auto& l : raw_lines) s += l + "\n";
        write_file(out / "corpus_raw.jsonl", s);
    }

    // Hand labels: up to 140 tweets of each theory dataset, a few uncertain,
    // with a second rater on a subset.
    std::vector<corpus::Tweet> english;
    for (const auto& t : tweets)
        if (t.lang == "en") english.push_back(t);
    const auto partition = theoryfilter::partition_corpus(
        english, theoryfilter::compile_theories(theoryfilter::load_theory_config(conf)));
    for (const auto& [name, data] : partition.datasets) {
        std::ofstream l(out / fmt::format("labels_{}.csv", name), std::ios::binary);
        std::ofstream c(out / fmt::format("corater_{}.csv", name), std::ios::binary);
        CsvWriter lab(l), co(c);
        lab.row({"tweet_id", "label", "annotator_id"});
        co.row({"tweet_id", "label", "annotator_id"});
        std::size_t written = 0;
        for (const auto& t : data) {
            if (written == 140) break;
            const auto it = truth.find(t.id);
            if (it == truth.end()) continue;
            const bool m = it->second;
            const double r = rand_unit(rng);
            std::string label = m ? "misinfo" : "not_misinfo";
            if (r < 0.06) label = "uncertain";
            lab.row({t.id, label, "rater1"});
            if (r < 0.06 || rand_unit(rng) < 0.2) co.row({t.id, m ? "misinfo" : "not_misinfo", "rater2"});
            ++written;
        }
    }
    std::cout << "wrote " << tweets.size() << " tweets to " << (out / "corpus_raw.jsonl").string() << '\n';
    return 0;
}
