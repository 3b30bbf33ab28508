#pragma once

#include "infodemic/corpus.hpp"
#include "infodemic/textfeat.hpp"

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

namespace infodemic::sentiment {

inline constexpr std::size_t kEmotionCount = 10;

enum class Emotion {
    Anger,
    Anticipation,
    Disgust,
    Fear,
    Joy,
    Sadness,
    Surprise,
    Trust,
    Positive,
    Negative
};

inline constexpr std::array<std::string_view, kEmotionCount> kEmotionNames = {
    "anger", "anticipation", "disgust", "fear", "joy", "sadness", "surprise", "trust", "positive", "negative"};

std::optional<Emotion> parse_emotion(std::string_view name);

using SignedLexicon = std::unordered_map<std::string, int>;
/// Bit c set when the term carries category c.
using EmotionLexicon = std::unordered_map<std::string, std::uint16_t>;

/// term<TAB>score with an integer score in [-5, 5]. Blank lines and '#'
/// comments are skipped; a repeated term keeps its last score and adds a
/// warning. Malformed lines throw ParseError with the line number.
SignedLexicon parse_signed_lexicon(std::string_view text, std::vector<std::string>* warnings = nullptr);
SignedLexicon load_signed_lexicon(const std::filesystem::path& path, std::vector<std::string>* warnings = nullptr);

/// term<TAB>category<TAB>0|1, one line per (term, category).
EmotionLexicon parse_emotion_lexicon(std::string_view text, std::vector<std::string>* warnings = nullptr);
EmotionLexicon load_emotion_lexicon(const std::filesystem::path& path, std::vector<std::string>* warnings = nullptr);

std::int64_t score_signed(const std::vector<std::string>& tokens, const SignedLexicon& lexicon);

using EmotionCounts = std::array<std::uint32_t, kEmotionCount>;
EmotionCounts score_emotions(const std::vector<std::string>& tokens, const EmotionLexicon& lexicon);

struct SentimentRecord {
    std::string tweet_id;
    Timestamp created_at{};
    std::int64_t afinn_sum = 0;
    EmotionCounts emotion_counts{};
    std::uint32_t n_tokens = 0;
};

SentimentRecord score_tweet(const corpus::Tweet& tweet, const textfeat::StopwordSet& stopwords,
                            const SignedLexicon& signed_lex, const EmotionLexicon& emotion_lex);
std::vector<SentimentRecord> score_corpus(const std::vector<corpus::Tweet>& tweets,
                                          const textfeat::StopwordSet& stopwords, const SignedLexicon& signed_lex,
                                          const EmotionLexicon& emotion_lex);

inline constexpr std::string_view kMisinfoClass = "misinfo";
inline constexpr std::string_view kNotMisinfoClass = "not_misinfo";

/// One (day, class) cell. Means are absent when the cell has no tweets.
struct SeriesCell {
    std::string date;
    std::string label_class;
    std::size_t n = 0;
    std::optional<double> afinn_mean;
    std::array<std::optional<double>, kEmotionCount> emotion_means{};
};

/// Daily UTC means per class over every day between the first and last
/// labeled record, both classes on each day. Records without a label are
/// ignored.
std::vector<SeriesCell> aggregate_series(const std::vector<SentimentRecord>& records,
                                         const std::unordered_map<std::string, bool>& misinfo_labels);

/// date,class,afinn_mean,anger_mean,...,negative_mean,n
void write_series_csv(const std::vector<SeriesCell>& cells, const std::filesystem::path& path);
std::vector<SeriesCell> read_series_csv(const std::filesystem::path& path);
void write_records_csv(const std::vector<SentimentRecord>& records, const std::filesystem::path& path);

} // namespace infodemic::sentiment
