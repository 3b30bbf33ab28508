#pragma once

// Seeded generators for synthetic corpora shared by the unit and acceptance
// tests.

#include "infodemic/active.hpp"
#include "infodemic/corpus.hpp"
#include "infodemic/dtm.hpp"
#include "infodemic/io.hpp"
#include "infodemic/rng.hpp"
#include "infodemic/textfeat.hpp"

#include <fmt/format.h>

#include <filesystem>
#include <string>
#include <vector>

namespace synth {

using infodemic::Rng;
using infodemic::rand_below;
using infodemic::rand_unit;

inline infodemic::Timestamp day(int d, int seconds = 0) {
    return *infodemic::parse_timestamp("2020-01-21T00:00:00Z") + std::chrono::days{d} + std::chrono::seconds{seconds};
}

inline infodemic::corpus::Tweet tweet(std::string id, std::string text, int d = 0) {
    infodemic::corpus::Tweet t;
    t.id = std::move(id);
    t.text = std::move(text);
    t.created_at = day(d);
    t.lang = "en";
    t.author_id = "u1";
    return t;
}

inline std::string word(const char* stem, std::uint64_t i) { return fmt::format("{}{}", stem, i); }

struct LabeledCorpus {
    std::vector<infodemic::corpus::Tweet> tweets;
    std::vector<bool> labels;
};

/// Each document has 4 words from its class vocabulary and 4 shared filler
/// words, so a single word always decides the class.
inline LabeledCorpus separable_corpus(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    LabeledCorpus c;
    for (std::size_t i = 0; i < n; ++i) {
        const bool pos = i % 2 == 0;
        std::string text;
        for (int j = 0; j < 4; ++j) text += word(pos ? "pos" : "neg", rand_below(rng, 20)) + " ";
        for (int j = 0; j < 4; ++j) text += word("fill", rand_below(rng, 40)) + " ";
        c.tweets.push_back(tweet(fmt::format("d{:05d}", i), text, static_cast<int>(i % 50)));
        c.labels.push_back(pos);
    }
    return c;
}

/// Documents mix "up" and "down" cue words; the label is the majority cue
/// with some flips, so a band of documents sits near the decision boundary.
inline LabeledCorpus noisy_boundary_corpus(std::size_t n, std::uint64_t seed, double flip = 0.05) {
    Rng rng(seed);
    LabeledCorpus c;
    for (std::size_t i = 0; i < n; ++i) {
        const int cues = 15;
        // Share of "up" cues: most documents sit clearly on one side, a minority near one half.
        const double u = rand_unit(rng);
        const double share = rand_unit(rng) < 0.3 ? 0.5 + (u - 0.5) * 0.3 : (u < 0.5 ? u * 0.3 : 1.0 - (u - 0.5) * 0.3);
        int up = 0;
        std::string text;
        for (int j = 0; j < cues; ++j) {
            const bool is_up = rand_unit(rng) < share;
            up += is_up;
            text += is_up ? "up " : "down ";
        }
        for (int j = 0; j < 3; ++j) text += word("noise", rand_below(rng, 30)) + " ";
        bool label = 2 * up > cues;
        if (rand_unit(rng) < flip) label = !label;
        c.tweets.push_back(tweet(fmt::format("n{:05d}", i), text, 0));
        c.labels.push_back(label);
    }
    return c;
}

inline std::shared_ptr<const infodemic::textfeat::Vocabulary>
vocabulary_for(const std::vector<infodemic::corpus::Tweet>& tweets, double min_df = 0.0, bool bigrams = true) {
    std::vector<std::vector<std::string>> docs;
    for (const auto& t : tweets) docs.push_back(infodemic::textfeat::tokenize(t.text, {}));
    return std::make_shared<const infodemic::textfeat::Vocabulary>(
        infodemic::textfeat::build_vocabulary(docs, min_df, bigrams));
}

inline infodemic::textfeat::FeatureMatrix matrix_for(const std::vector<infodemic::corpus::Tweet>& tweets,
                                                      std::shared_ptr<const infodemic::textfeat::Vocabulary> vocab) {
    return infodemic::textfeat::build_feature_matrix(tweets, {}, std::move(vocab), {},
                                                     infodemic::textfeat::LinkageIndex(tweets));
}

/// Planted topic drift: each topic owns a block of words whose favoured
/// subset moves one step per slice.
struct PlantedDrift {
    infodemic::dtm::SlicedCorpus corpus;
    /// truth[t][k] = word distribution used to generate topic k in slice t
    std::vector<std::vector<std::vector<double>>> truth;
};

inline PlantedDrift planted_drift(std::size_t n_topics, std::size_t n_slices, std::size_t vocab, std::size_t n_docs,
                                  std::size_t doc_len, std::uint64_t seed) {
    Rng rng(seed);
    PlantedDrift p;
    p.corpus.vocab_size = vocab;
    p.corpus.slices.resize(n_slices);
    p.truth.assign(n_slices, std::vector<std::vector<double>>(n_topics, std::vector<double>(vocab, 0.0)));
    const std::size_t block = vocab / n_topics;
    for (std::size_t t = 0; t < n_slices; ++t)
        for (std::size_t k = 0; k < n_topics; ++k) {
            auto& w = p.truth[t][k];
            double total = 0.0;
            for (std::size_t v = 0; v < vocab; ++v) {
                double weight = 0.02;
                if (v / block == k) {
                    const std::size_t pos = v % block;
                    // Ten heavy words, sliding by three per slice, so the top ten are unambiguous.
                    weight = pos >= 3 * t && pos < 3 * t + 10 ? 3.0 : 0.1;
                }
                w[v] = weight;
                total += weight;
            }
            for (auto& x : w) x /= total;
        }
    const std::size_t per_slice = n_docs / n_slices;
    for (std::size_t t = 0; t < n_slices; ++t) {
        for (std::size_t d = 0; d < per_slice; ++d) {
            // Mostly single-topic documents with a little mixing.
            const std::size_t main_topic = rand_below(rng, n_topics);
            std::vector<std::uint32_t> counts(vocab, 0);
            for (std::size_t i = 0; i < doc_len; ++i) {
                const std::size_t k = rand_unit(rng) < 0.9 ? main_topic : rand_below(rng, n_topics);
                double u = rand_unit(rng), acc = 0.0;
                std::size_t v = 0;
                for (; v + 1 < vocab; ++v) {
                    acc += p.truth[t][k][v];
                    if (u < acc) break;
                }
                ++counts[v];
            }
            infodemic::dtm::Document doc;
            doc.id = fmt::format("s{}d{:04d}", t, d);
            for (std::uint32_t v = 0; v < vocab; ++v)
                if (counts[v]) doc.words.push_back({v, counts[v]});
            p.corpus.slices[t].push_back(std::move(doc));
        }
    }
    return p;
}

/// Random short strings over a small alphabet, with near-duplicate families
/// produced by single-character edits.
inline std::vector<infodemic::active::PoolText> near_duplicate_pool(std::size_t n, std::uint64_t seed) {
    Rng rng(seed);
    static const std::string alphabet = "abcde fgh";
    std::vector<infodemic::active::PoolText> pool;
    std::vector<std::string> bases;
    for (std::size_t i = 0; i < n; ++i) {
        std::string s;
        if (!bases.empty() && rand_unit(rng) < 0.6) {
            s = bases[rand_below(rng, bases.size())];
            const std::size_t edits = rand_below(rng, 3);
            for (std::size_t e = 0; e < edits; ++e) {
                const std::size_t pos = rand_below(rng, s.size() + 1);
                switch (rand_below(rng, 3)) {
                case 0: s.insert(pos, 1, alphabet[rand_below(rng, alphabet.size())]); break;
                case 1: if (pos < s.size()) s.erase(pos, 1); break;
                default: if (pos < s.size()) s[pos] = alphabet[rand_below(rng, alphabet.size())]; break;
                }
            }
            if (rand_unit(rng) < 0.1) s += "\xc3\xa9"; // a two-byte code point
        } else {
            const std::size_t len = 15 + rand_below(rng, 40);
            for (std::size_t j = 0; j < len; ++j) s += alphabet[rand_below(rng, alphabet.size())];
            bases.push_back(s);
        }
        pool.push_back({fmt::format("p{:04d}", i), s});
    }
    return pool;
}

inline std::filesystem::path fresh_dir(const std::string& name) {
    const auto dir = std::filesystem::temp_directory_path() / ("infodemic_test_" + name);
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

} // namespace synth
