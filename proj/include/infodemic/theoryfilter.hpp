#pragma once

#include "infodemic/corpus.hpp"

#include <filesystem>
#include <map>
#include <memory>
#include <set>
#include <string>
#include <utility>
#include <vector>

namespace infodemic::theoryfilter {

struct TheoryConfig {
    std::string name;
    std::vector<std::string> include_patterns;
    bool case_insensitive = true;
};

/// Matcher for one theory: fires when any include pattern matches somewhere
/// in the raw tweet text (Perl syntax, inline flags such as "(?i)" allowed).
class CompiledTheory {
public:
    /// Throws InvalidArgument naming the offending pattern.
    explicit CompiledTheory(const TheoryConfig& config);
    CompiledTheory(const CompiledTheory&);
    CompiledTheory(CompiledTheory&&) noexcept;
    CompiledTheory& operator=(const CompiledTheory&);
    CompiledTheory& operator=(CompiledTheory&&) noexcept;
    ~CompiledTheory();

    const std::string& name() const noexcept { return name_; }
    bool matches(std::string_view text) const;

private:
    struct Impl;
    std::string name_;
    std::shared_ptr<const Impl> impl_;
};

CompiledTheory compile_theory(const TheoryConfig& config);
std::vector<CompiledTheory> compile_theories(const std::vector<TheoryConfig>& configs);

/// Config file format: one "[theory]" section per theory with keys
///   name = 5G
///   case_insensitive = true
///   pattern = \b5g\b          (repeatable)
/// Lines starting with '#' or ';' are comments. Values are taken verbatim
/// after the first '=' with surrounding whitespace trimmed.
std::vector<TheoryConfig> parse_theory_config(std::string_view text);
std::vector<TheoryConfig> load_theory_config(const std::filesystem::path& path);

/// Names of the theories whose matcher fires on the raw text, in config order.
std::vector<std::string> match_theories(const corpus::Tweet& tweet, const std::vector<CompiledTheory>& theories);

using TheoryPair = std::pair<std::string, std::string>;

struct PartitionReport {
    std::vector<std::string> theories; // config order
    std::map<std::string, std::size_t> per_theory_count;
    std::map<std::string, std::size_t> multi_theory_count;
    /// Keyed by (a, b) with a < b; see overlap().
    std::map<TheoryPair, std::size_t> pairwise_overlap;
    /// Tweets matching at least one theory.
    std::size_t total_unique = 0;

    std::size_t overlap(const std::string& a, const std::string& b) const;
    /// Sum of per_theory_count, i.e. dataset memberships counted with
    /// multiplicity. This is the denominator of the dataset-size percentages.
    std::size_t total_memberships() const;
    /// 100 * per_theory_count / total_memberships().
    double percent_of_total(const std::string& theory) const;
    /// 100 * multi_theory_count / per_theory_count.
    double multi_percent(const std::string& theory) const;
};

/// Builds the report from per-tweet match sets. Order of the input does not
/// affect the result.
PartitionReport summarize_matches(const std::vector<std::string>& theory_order,
                                  const std::vector<std::vector<std::string>>& match_sets);

struct Partition {
    std::map<std::string, std::vector<corpus::Tweet>> datasets;
    PartitionReport report;
};

/// Copies each tweet into every matching theory dataset, preserving input order.
Partition partition_corpus(const std::vector<corpus::Tweet>& tweets, const std::vector<CompiledTheory>& theories);

/// theory,count,pct,multi_count,multi_pct
void write_partition_csv(const PartitionReport& report, const std::filesystem::path& path);
/// theory_a,theory_b,count
void write_edge_csv(const PartitionReport& report, const std::filesystem::path& path);
PartitionReport read_partition_csv(const std::filesystem::path& counts, const std::filesystem::path& edges);

} // namespace infodemic::theoryfilter
