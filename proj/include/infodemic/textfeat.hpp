#pragma once

#include "infodemic/corpus.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <string>
#include <unordered_map>
#include <unordered_set>
#include <vector>

namespace infodemic::textfeat {

using StopwordSet = std::unordered_set<std::string>;

/// One token per line; blank lines and lines starting with '#' are ignored.
StopwordSet load_stopwords(const std::filesystem::path& path);

/// Normalizes the text, splits on whitespace, strips leading and trailing
/// punctuation (a leading '#' or '@' survives), then drops stopwords and
/// empty tokens. Token order is preserved.
std::vector<std::string> tokenize(std::string_view text, const StopwordSet& stopwords);

inline constexpr char kBigramJoiner = '_';

/// Adjacent pairs joined with '_'.
std::vector<std::string> bigrams(const std::vector<std::string>& tokens);

/// Frozen term index: unigrams and underscore-joined bigrams in byte order.
class Vocabulary {
public:
    Vocabulary() = default;
    Vocabulary(std::vector<std::string> terms, std::vector<std::uint32_t> df, std::size_t n_docs,
               bool bigrams = true);

    std::size_t size() const noexcept { return terms_.size(); }
    const std::vector<std::string>& terms() const noexcept { return terms_; }
    const std::vector<std::uint32_t>& df() const noexcept { return df_; }
    std::size_t n_docs() const noexcept { return n_docs_; }
    bool has_bigrams() const noexcept { return bigrams_; }
    const std::string& term(std::size_t i) const { return terms_.at(i); }
    /// Index of a term or -1.
    std::int64_t index_of(std::string_view term) const;
    /// SHA-256 over the terms, each followed by a newline.
    std::string hash() const;

    void save(const std::filesystem::path& path) const;
    static Vocabulary load(const std::filesystem::path& path);

private:
    std::vector<std::string> terms_;
    std::vector<std::uint32_t> df_;
    std::size_t n_docs_ = 0;
    bool bigrams_ = true;
    std::unordered_map<std::string, std::uint32_t> index_;
};

inline constexpr double kDefaultMinDfFraction = 0.0005;

/// Keeps a candidate term iff df / n_docs >= min_df_fraction. Throws
/// InvalidArgument on an empty corpus or a fraction outside [0, 1).
Vocabulary build_vocabulary(const std::vector<std::vector<std::string>>& token_docs,
                            double min_df_fraction = kDefaultMinDfFraction, bool with_bigrams = true);

struct SparseEntry {
    std::uint32_t index;
    std::uint32_t count;
    bool operator==(const SparseEntry&) const = default;
};

/// Non-zero counts sorted by index.
struct SparseVector {
    std::vector<SparseEntry> entries;
    std::size_t dimension = 0;

    std::uint32_t at(std::uint32_t index) const;
    std::uint64_t total() const;
    bool operator==(const SparseVector&) const = default;
};

SparseVector vectorize(const std::vector<std::string>& tokens, const Vocabulary& vocab);

/// originates, replies_to_origin, retweets_origin, otherwise_linked
struct LinkFlags {
    bool originates = false;
    bool replies_to_origin = false;
    bool retweets_origin = false;
    bool otherwise_linked = false;

    std::array<bool, 4> as_array() const { return {originates, replies_to_origin, retweets_origin, otherwise_linked}; }
    bool operator==(const LinkFlags&) const = default;
};

inline constexpr std::size_t kLinkFeatureCount = 4;

/// Domains rated not credible. A host matches a listed domain when equal to
/// it or a subdomain of it.
class DomainList {
public:
    DomainList() = default;
    explicit DomainList(std::unordered_set<std::string> flagged);

    bool is_flagged(std::string_view host) const;
    std::size_t size() const noexcept { return flagged_.size(); }

private:
    std::unordered_set<std::string> flagged_;
};

/// CSV with header domain,flag where flag is not_credible or credible.
DomainList load_domain_list(const std::filesystem::path& path);

class LinkageIndex {
public:
    LinkageIndex() = default;
    explicit LinkageIndex(const std::vector<corpus::Tweet>& tweets);
    const corpus::Tweet* find(const std::string& id) const;

private:
    std::unordered_map<std::string, const corpus::Tweet*> by_id_;
};

/// True when the tweet's source domain or any linked URL host is flagged.
bool originates_from_flagged(const corpus::Tweet& tweet, const DomainList& domains);

inline constexpr int kMaxLinkDepth = 3;

/// Reply/retweet links are followed through the index; unresolvable targets
/// contribute false. otherwise_linked covers chains of 2..kMaxLinkDepth hops
/// and is suppressed when a direct reply or retweet flag fired.
LinkFlags domain_link_features(const corpus::Tweet& tweet, const DomainList& domains, const LinkageIndex& index);

struct FeatureMatrix {
    std::vector<std::string> doc_ids;
    std::shared_ptr<const Vocabulary> vocab;
    std::vector<SparseVector> counts;
    std::vector<LinkFlags> link_flags;

    std::size_t rows() const noexcept { return doc_ids.size(); }
    /// Term columns followed by the four 0/1 link columns.
    std::size_t feature_count() const noexcept { return (vocab ? vocab->size() : 0) + kLinkFeatureCount; }
};

FeatureMatrix build_feature_matrix(const std::vector<corpus::Tweet>& tweets, const StopwordSet& stopwords,
                                   std::shared_ptr<const Vocabulary> vocab, const DomainList& domains,
                                   const LinkageIndex& index);

/// doc_id,term,count
void write_triplets_csv(const FeatureMatrix& m, const std::filesystem::path& path);
/// doc_id,originates,replies_to_origin,retweets_origin,otherwise_linked
void write_link_flags_csv(const FeatureMatrix& m, const std::filesystem::path& path);

} // namespace infodemic::textfeat
