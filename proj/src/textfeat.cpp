#include "infodemic/textfeat.hpp"

#include "infodemic/error.hpp"
#include "infodemic/parallel.hpp"

#include <nlohmann/json.hpp>
#include <unicode/uchar.h>
#include <unicode/utf8.h>

#include <algorithm>
#include <fstream>
#include <map>

namespace infodemic::textfeat {

namespace {

// A leading '#' or '@' stops the left-hand strip.
std::string strip_punctuation(std::string_view token) {
    const auto* bytes = reinterpret_cast<const std::uint8_t*>(token.data());
    const auto length = static_cast<std::int32_t>(token.size());

    std::int32_t begin = 0;
    while (begin < length) {
        std::int32_t next = begin;
        UChar32 cp;
        U8_NEXT(bytes, next, length, cp);
        if (cp == '#' || cp == '@' || cp < 0 || !u_ispunct(cp)) break;
        begin = next;
    }
    std::int32_t end = length;
    while (end > begin) {
        std::int32_t prev = end;
        UChar32 cp;
        U8_PREV(bytes, 0, prev, cp);
        if (cp < 0 || !u_ispunct(cp)) break;
        end = prev;
    }
    return std::string(token.substr(static_cast<std::size_t>(begin), static_cast<std::size_t>(end - begin)));
}

} // namespace

StopwordSet load_stopwords(const std::filesystem::path& path) {
    StopwordSet words;
    for (const auto& raw : split(read_file(path), '\n')) {
        std::string w = trim(raw);
        if (w.empty() || w[0] == '#') continue;
        words.insert(corpus::normalize_tweet(w));
    }
    return words;
}

std::vector<std::string> tokenize(std::string_view text, const StopwordSet& stopwords) {
    const std::string normalized = corpus::normalize_tweet(text);
    std::vector<std::string> tokens;
    for (const auto& piece : split(normalized, ' ')) {
        if (piece.empty()) continue;
        std::string token = strip_punctuation(piece);
        if (token.empty() || token == "#" || token == "@") continue;
        if (stopwords.contains(token)) continue;
        tokens.push_back(std::move(token));
    }
    return tokens;
}

std::vector<std::string> bigrams(const std::vector<std::string>& tokens) {
    std::vector<std::string> pairs;
    if (tokens.size() < 2) return pairs;
    pairs.reserve(tokens.size() - 1);
    for (std::size_t i = 0; i + 1 < tokens.size(); ++i) pairs.push_back(tokens[i] + kBigramJoiner + tokens[i + 1]);
    return pairs;
}

Vocabulary::Vocabulary(std::vector<std::string> terms, std::vector<std::uint32_t> df, std::size_t n_docs,
                       bool with_bigrams)
    : terms_(std::move(terms)), df_(std::move(df)), n_docs_(n_docs), bigrams_(with_bigrams) {
    if (terms_.size() != df_.size()) throw InvalidArgument("vocabulary terms and df differ in length");
    if (!std::is_sorted(terms_.begin(), terms_.end())) throw InvalidArgument("vocabulary terms must be sorted");
    index_.reserve(terms_.size());
    for (std::size_t i = 0; i < terms_.size(); ++i)
        if (!index_.emplace(terms_[i], static_cast<std::uint32_t>(i)).second)
            throw InvalidArgument("duplicate vocabulary term '" + terms_[i] + "'");
}

std::int64_t Vocabulary::index_of(std::string_view term) const {
    const auto it = index_.find(std::string(term));
    return it == index_.end() ? -1 : static_cast<std::int64_t>(it->second);
}

std::string Vocabulary::hash() const {
    std::string joined;
    for (const auto& t : terms_) {
        joined += t;
        joined += '\n';
    }
    return sha256_hex(joined);
}

void Vocabulary::save(const std::filesystem::path& path) const {
    nlohmann::ordered_json doc;
    doc["format"] = "infodemic.vocabulary";
    doc["version"] = 1;
    doc["n_docs"] = n_docs_;
    doc["bigrams"] = bigrams_;
    doc["hash"] = hash();
    doc["terms"] = terms_;
    doc["df"] = df_;
    write_file(path, doc.dump(1) + "\n");
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
    try {
        const auto doc = nlohmann::json::parse(read_file(path));
        if (doc.at("format") != "infodemic.vocabulary") throw ParseError(path.string() + ": not a vocabulary file");
        Vocabulary v(doc.at("terms").get<std::vector<std::string>>(), doc.at("df").get<std::vector<std::uint32_t>>(),
                     doc.at("n_docs").get<std::size_t>(), doc.value("bigrams", true));
        if (doc.contains("hash") && doc["hash"] != v.hash())
            throw ParseError(path.string() + ": vocabulary hash mismatch");
        return v;
    } catch (const nlohmann::json::exception& e) {
        throw ParseError(path.string() + ": " + e.what());
    }
}

Vocabulary build_vocabulary(const std::vector<std::vector<std::string>>& token_docs, double min_df_fraction,
                            bool with_bigrams) {
    if (token_docs.empty()) throw InvalidArgument("cannot build a vocabulary from an empty corpus");
    if (!(min_df_fraction >= 0.0 && min_df_fraction < 1.0))
        throw InvalidArgument("min_df_fraction must lie in [0, 1)");

    std::map<std::string, std::uint32_t> df;
    for (const auto& doc : token_docs) {
        std::vector<std::string> terms(doc.begin(), doc.end());
        if (with_bigrams) {
            auto pairs = bigrams(doc);
            terms.insert(terms.end(), std::make_move_iterator(pairs.begin()), std::make_move_iterator(pairs.end()));
        }
        std::sort(terms.begin(), terms.end());
        terms.erase(std::unique(terms.begin(), terms.end()), terms.end());
        for (auto& t : terms) ++df[std::move(t)];
    }

    const double n = static_cast<double>(token_docs.size());
    std::vector<std::string> kept;
    std::vector<std::uint32_t> kept_df;
    for (auto& [term, count] : df) {
        if (static_cast<double>(count) / n >= min_df_fraction) {
            kept.push_back(term);
            kept_df.push_back(count);
        }
    }
    return Vocabulary(std::move(kept), std::move(kept_df), token_docs.size(), with_bigrams);
}

std::uint32_t SparseVector::at(std::uint32_t index) const {
    const auto it = std::lower_bound(entries.begin(), entries.end(), index,
                                     [](const SparseEntry& e, std::uint32_t i) { return e.index < i; });
    return it != entries.end() && it->index == index ? it->count : 0;
}

std::uint64_t SparseVector::total() const {
    std::uint64_t sum = 0;
    for (const auto& e : entries) sum += e.count;
    return sum;
}

SparseVector vectorize(const std::vector<std::string>& tokens, const Vocabulary& vocab) {
    std::map<std::uint32_t, std::uint32_t> counts;
    const auto add = [&](std::string_view term) {
        if (const auto idx = vocab.index_of(term); idx >= 0) ++counts[static_cast<std::uint32_t>(idx)];
    };
    for (const auto& t : tokens) add(t);
    if (vocab.has_bigrams())
        for (const auto& b : bigrams(tokens)) add(b);

    SparseVector v;
    v.dimension = vocab.size();
    v.entries.reserve(counts.size());
    for (const auto& [i, c] : counts) v.entries.push_back({i, c});
    return v;
}

DomainList::DomainList(std::unordered_set<std::string> flagged) {
    for (const auto& d : flagged) flagged_.insert(corpus::url_host(d));
}

bool DomainList::is_flagged(std::string_view host) const {
    if (flagged_.empty() || host.empty()) return false;
    std::string h = corpus::url_host(host);
    for (std::string_view rest = h;;) {
        if (flagged_.contains(std::string(rest))) return true;
        const auto dot = rest.find('.');
        if (dot == std::string_view::npos) return false;
        rest.remove_prefix(dot + 1);
    }
}

DomainList load_domain_list(const std::filesystem::path& path) {
    const auto table = read_csv(path);
    const auto dcol = table.column("domain");
    const auto fcol = table.column("flag");
    std::unordered_set<std::string> flagged;
    for (std::size_t r = 0; r < table.rows.size(); ++r) {
        const std::string flag = ascii_lower(trim(table.rows[r][fcol]));
        if (flag == "not_credible")
            flagged.insert(trim(table.rows[r][dcol]));
        else if (flag != "credible")
            throw ParseError(path.string() + ": flag must be not_credible or credible", r + 2);
    }
    return DomainList(std::move(flagged));
}

LinkageIndex::LinkageIndex(const std::vector<corpus::Tweet>& tweets) {
    by_id_.reserve(tweets.size());
    for (const auto& t : tweets) by_id_.emplace(t.id, &t);
}

const corpus::Tweet* LinkageIndex::find(const std::string& id) const {
    const auto it = by_id_.find(id);
    return it == by_id_.end() ? nullptr : it->second;
}

bool originates_from_flagged(const corpus::Tweet& tweet, const DomainList& domains) {
    if (tweet.source_domain && domains.is_flagged(*tweet.source_domain)) return true;
    return std::any_of(tweet.linked_urls.begin(), tweet.linked_urls.end(),
                       [&](const std::string& url) { return domains.is_flagged(corpus::url_host(url)); });
}

LinkFlags domain_link_features(const corpus::Tweet& tweet, const DomainList& domains, const LinkageIndex& index) {
    LinkFlags flags;
    flags.originates = originates_from_flagged(tweet, domains);

    const auto resolve = [&](const std::optional<std::string>& id) -> const corpus::Tweet* {
        return id ? index.find(*id) : nullptr;
    };
    const corpus::Tweet* reply_target = resolve(tweet.reply_to_id);
    const corpus::Tweet* retweet_target = resolve(tweet.retweet_of_id);
    flags.replies_to_origin = reply_target && originates_from_flagged(*reply_target, domains);
    flags.retweets_origin = retweet_target && originates_from_flagged(*retweet_target, domains);
    if (flags.replies_to_origin || flags.retweets_origin) return flags;

    // breadth-first over parents; depth 1 was covered above
    std::vector<const corpus::Tweet*> frontier;
    if (reply_target) frontier.push_back(reply_target);
    if (retweet_target) frontier.push_back(retweet_target);
    for (int depth = 2; depth <= kMaxLinkDepth && !frontier.empty(); ++depth) {
        std::vector<const corpus::Tweet*> next;
        for (const auto* t : frontier) {
            for (const auto* parent : {resolve(t->reply_to_id), resolve(t->retweet_of_id)}) {
                if (!parent) continue;
                if (originates_from_flagged(*parent, domains)) {
                    flags.otherwise_linked = true;
                    return flags;
                }
                next.push_back(parent);
            }
        }
        frontier = std::move(next);
    }
    return flags;
}

FeatureMatrix build_feature_matrix(const std::vector<corpus::Tweet>& tweets, const StopwordSet& stopwords,
                                   std::shared_ptr<const Vocabulary> vocab, const DomainList& domains,
                                   const LinkageIndex& index) {
    if (!vocab) throw InvalidArgument("feature matrix requires a vocabulary");
    FeatureMatrix m;
    m.vocab = std::move(vocab);
    m.doc_ids.resize(tweets.size());
    m.counts.resize(tweets.size());
    m.link_flags.resize(tweets.size());
    parallel_for(tweets.size(), [&](std::size_t i) {
        m.doc_ids[i] = tweets[i].id;
        m.counts[i] = vectorize(tokenize(tweets[i].text, stopwords), *m.vocab);
        m.link_flags[i] = domain_link_features(tweets[i], domains, index);
    });
    return m;
}

void write_triplets_csv(const FeatureMatrix& m, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    CsvWriter csv(out);
    csv.row({"doc_id", "term", "count"});
    for (std::size_t r = 0; r < m.rows(); ++r)
        for (const auto& e : m.counts[r].entries)
            csv.row({m.doc_ids[r], m.vocab->term(e.index), std::to_string(e.count)});
}

void write_link_flags_csv(const FeatureMatrix& m, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    CsvWriter csv(out);
    csv.row({"doc_id", "originates", "replies_to_origin", "retweets_origin", "otherwise_linked"});
    const auto b = [](bool v) { return v ? "1" : "0"; };
    for (std::size_t r = 0; r < m.rows(); ++r) {
        const auto& f = m.link_flags[r];
        csv.row({m.doc_ids[r], b(f.originates), b(f.replies_to_origin), b(f.retweets_origin), b(f.otherwise_linked)});
    }
}

} // namespace infodemic::textfeat
