#pragma once

#include "infodemic/io.hpp"

#include <chrono>
#include <cstdint>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace infodemic::corpus {

struct Tweet {
    std::string id;
    std::string text;
    Timestamp created_at;
    std::string lang;
    std::string author_id;
    std::optional<std::string> reply_to_id;
    std::optional<std::string> retweet_of_id;
    std::vector<std::string> linked_urls;
    std::optional<std::string> source_domain;

    bool operator==(const Tweet&) const = default;
};

struct LoadReport {
    std::size_t lines_read = 0;
    std::size_t parsed = 0;
    std::size_t skipped = 0;
    std::size_t language_rejected = 0;
};

/// Streams tweets from a line-delimited JSON file. Malformed lines are counted
/// in the report and skipped; blank lines are ignored. Throws IoError when the
/// file cannot be opened.
LoadReport load_jsonl(const std::filesystem::path& path, const std::optional<std::string>& lang_filter,
                      const std::function<void(Tweet&&)>& sink);

std::vector<Tweet> load_jsonl(const std::filesystem::path& path,
                              const std::optional<std::string>& lang_filter = std::nullopt,
                              LoadReport* report = nullptr);

/// Parses one JSONL record. Returns nullopt on any schema violation.
std::optional<Tweet> parse_tweet(std::string_view line);
std::string to_json_line(const Tweet& tweet);

void write_jsonl(const std::filesystem::path& path, const std::vector<Tweet>& tweets);

/// "en" accepts "en", "en-GB", "en_US"; comparison is case-insensitive.
bool language_matches(std::string_view lang, std::string_view filter);

/// Canonical text: NFC, lowercase, leading "rt @handle:" removed, URLs
/// removed, whitespace collapsed to single spaces and trimmed.
std::string normalize_tweet(std::string_view text);

enum class DedupKey { Id, NormalizedText };

/// Keeps the first occurrence of each key. `dropped` receives the number of
/// records removed.
std::vector<Tweet> deduplicate(std::vector<Tweet> tweets, DedupKey key, std::size_t* dropped = nullptr);

using SliceWidth = std::chrono::seconds;
inline constexpr SliceWidth kWeek = std::chrono::days{7};

/// floor((created_at - epoch) / width). Throws OutOfRange before the epoch.
std::int64_t assign_time_slice(Timestamp created_at, Timestamp epoch, SliceWidth width = kWeek);
inline std::int64_t assign_time_slice(const Tweet& tweet, Timestamp epoch, SliceWidth width = kWeek) {
    return assign_time_slice(tweet.created_at, epoch, width);
}

/// Number of slices needed to cover [epoch, last] inclusive.
std::int64_t slice_count(Timestamp epoch, Timestamp last, SliceWidth width = kWeek);

/// Lowercased host of a URL with a leading "www." removed; empty if none.
std::string url_host(std::string_view url);

} // namespace infodemic::corpus
