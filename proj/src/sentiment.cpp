#include "infodemic/sentiment.hpp"

#include "infodemic/error.hpp"
#include "infodemic/io.hpp"
#include "infodemic/parallel.hpp"

#include <charconv>
#include <fstream>
#include <map>

namespace infodemic::sentiment {

std::optional<Emotion> parse_emotion(std::string_view name) {
    const std::string n = ascii_lower(trim(name));
    for (std::size_t i = 0; i < kEmotionCount; ++i)
        if (kEmotionNames[i] == n) return static_cast<Emotion>(i);
    return std::nullopt;
}

namespace {

template <typename Fn>
void for_each_line(std::string_view text, Fn&& fn) {
    std::size_t line_no = 0;
    std::size_t pos = 0;
    while (pos < text.size()) {
        std::size_t end = text.find('\n', pos);
        if (end == std::string_view::npos) end = text.size();
        std::string_view line = text.substr(pos, end - pos);
        pos = end + 1;
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        fn(line, line_no);
    }
}

std::string lexicon_term(std::string_view raw, std::size_t line_no) {
    std::string term = corpus::normalize_tweet(trim(raw));
    if (term.empty()) throw ParseError("empty lexicon term", line_no);
    return term;
}

} // namespace

SignedLexicon parse_signed_lexicon(std::string_view text, std::vector<std::string>* warnings) {
    SignedLexicon lex;
    for_each_line(text, [&](std::string_view line, std::size_t line_no) {
        const auto fields = split(line, '\t');
        if (fields.size() != 2) throw ParseError("expected term<TAB>score", line_no);
        const std::string term = lexicon_term(fields[0], line_no);
        const std::string s = trim(fields[1]);
        int score = 0;
        const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), score);
        if (ec != std::errc{} || ptr != s.data() + s.size()) throw ParseError("score is not an integer", line_no);
        if (score < -5 || score > 5) throw ParseError("score outside [-5, 5]", line_no);
        const auto [it, inserted] = lex.insert_or_assign(term, score);
        if (!inserted && warnings)
            warnings->push_back("line " + std::to_string(line_no) + ": duplicate term '" + term + "', last wins");
    });
    return lex;
}

SignedLexicon load_signed_lexicon(const std::filesystem::path& path, std::vector<std::string>* warnings) {
    return parse_signed_lexicon(read_file(path), warnings);
}

EmotionLexicon parse_emotion_lexicon(std::string_view text, std::vector<std::string>* warnings) {
    EmotionLexicon lex;
    std::map<std::pair<std::string, std::size_t>, std::size_t> seen;
    for_each_line(text, [&](std::string_view line, std::size_t line_no) {
        const auto fields = split(line, '\t');
        if (fields.size() != 3) throw ParseError("expected term<TAB>category<TAB>flag", line_no);
        const std::string term = lexicon_term(fields[0], line_no);
        const auto emotion = parse_emotion(fields[1]);
        if (!emotion) throw ParseError("unknown emotion category '" + trim(fields[1]) + "'", line_no);
        const std::string flag = trim(fields[2]);
        if (flag != "0" && flag != "1") throw ParseError("flag must be 0 or 1", line_no);
        const auto bit = static_cast<std::size_t>(*emotion);
        if (const auto [it, inserted] = seen.emplace(std::make_pair(term, bit), line_no); !inserted && warnings)
            warnings->push_back("line " + std::to_string(line_no) + ": duplicate entry for '" + term + "' / " +
                                std::string(kEmotionNames[bit]) + ", last wins");
        auto& mask = lex[term];
        if (flag == "1")
            mask = static_cast<std::uint16_t>(mask | (1u << bit));
        else
            mask = static_cast<std::uint16_t>(mask & ~(1u << bit));
    });
    return lex;
}

EmotionLexicon load_emotion_lexicon(const std::filesystem::path& path, std::vector<std::string>* warnings) {
    return parse_emotion_lexicon(read_file(path), warnings);
}

std::int64_t score_signed(const std::vector<std::string>& tokens, const SignedLexicon& lexicon) {
    std::int64_t sum = 0;
    for (const auto& t : tokens)
        if (const auto it = lexicon.find(t); it != lexicon.end()) sum += it->second;
    return sum;
}

EmotionCounts score_emotions(const std::vector<std::string>& tokens, const EmotionLexicon& lexicon) {
    EmotionCounts counts{};
    for (const auto& t : tokens) {
        const auto it = lexicon.find(t);
        if (it == lexicon.end()) continue;
        for (std::size_t c = 0; c < kEmotionCount; ++c)
            if (it->second & (1u << c)) ++counts[c];
    }
    return counts;
}

SentimentRecord score_tweet(const corpus::Tweet& tweet, const textfeat::StopwordSet& stopwords,
                            const SignedLexicon& signed_lex, const EmotionLexicon& emotion_lex) {
    const auto tokens = textfeat::tokenize(tweet.text, stopwords);
    SentimentRecord r;
    r.tweet_id = tweet.id;
    r.created_at = tweet.created_at;
    r.afinn_sum = score_signed(tokens, signed_lex);
    r.emotion_counts = score_emotions(tokens, emotion_lex);
    r.n_tokens = static_cast<std::uint32_t>(tokens.size());
    return r;
}

std::vector<SentimentRecord> score_corpus(const std::vector<corpus::Tweet>& tweets,
                                          const textfeat::StopwordSet& stopwords, const SignedLexicon& signed_lex,
                                          const EmotionLexicon& emotion_lex) {
    std::vector<SentimentRecord> out(tweets.size());
    parallel_for(tweets.size(),
                 [&](std::size_t i) { out[i] = score_tweet(tweets[i], stopwords, signed_lex, emotion_lex); });
    return out;
}

std::vector<SeriesCell> aggregate_series(const std::vector<SentimentRecord>& records,
                                         const std::unordered_map<std::string, bool>& misinfo_labels) {
    struct Acc {
        std::size_t n = 0;
        std::int64_t afinn = 0;
        std::array<std::uint64_t, kEmotionCount> emotions{};
    };
    using Days = std::chrono::sys_days;
    std::map<std::pair<Days, int>, Acc> cells;
    std::optional<Days> first, last;
    for (const auto& r : records) {
        const auto it = misinfo_labels.find(r.tweet_id);
        if (it == misinfo_labels.end()) continue;
        const Days day = std::chrono::floor<std::chrono::days>(r.created_at);
        if (!first || day < *first) first = day;
        if (!last || day > *last) last = day;
        auto& acc = cells[{day, it->second ? 0 : 1}];
        ++acc.n;
        acc.afinn += r.afinn_sum;
        for (std::size_t c = 0; c < kEmotionCount; ++c) acc.emotions[c] += r.emotion_counts[c];
    }
    std::vector<SeriesCell> out;
    if (!first) return out;
    for (Days d = *first; d <= *last; d += std::chrono::days{1}) {
        for (int cls = 0; cls < 2; ++cls) {
            SeriesCell cell;
            cell.date = format_date(Timestamp(d));
            cell.label_class = std::string(cls == 0 ? kMisinfoClass : kNotMisinfoClass);
            if (const auto it = cells.find({d, cls}); it != cells.end()) {
                const Acc& a = it->second;
                const auto n = static_cast<double>(a.n);
                cell.n = a.n;
                cell.afinn_mean = static_cast<double>(a.afinn) / n;
                for (std::size_t c = 0; c < kEmotionCount; ++c)
                    cell.emotion_means[c] = static_cast<double>(a.emotions[c]) / n;
            }
            out.push_back(std::move(cell));
        }
    }
    return out;
}

void write_series_csv(const std::vector<SeriesCell>& cells, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    CsvWriter csv(out);
    std::vector<std::string> header{"date", "class", "afinn_mean"};
    for (const auto name : kEmotionNames) header.push_back(std::string(name) + "_mean");
    header.push_back("n");
    csv.row(header);
    const auto opt = [](const std::optional<double>& v) { return v ? format_fixed(*v, 6) : std::string{}; };
    for (const auto& c : cells) {
        std::vector<std::string> row{c.date, c.label_class, opt(c.afinn_mean)};
        for (const auto& m : c.emotion_means) row.push_back(opt(m));
        row.push_back(std::to_string(c.n));
        csv.row(row);
    }
    if (!out) throw IoError("write failed for " + path.string());
}

std::vector<SeriesCell> read_series_csv(const std::filesystem::path& path) {
    const CsvTable table = read_csv(path);
    const std::size_t c_date = table.column("date"), c_class = table.column("class"),
                      c_afinn = table.column("afinn_mean"), c_n = table.column("n");
    std::array<std::size_t, kEmotionCount> c_emotion{};
    for (std::size_t e = 0; e < kEmotionCount; ++e) c_emotion[e] = table.column(std::string(kEmotionNames[e]) + "_mean");
    const auto opt = [&](const std::string& v, std::size_t line) -> std::optional<double> {
        if (v.empty()) return std::nullopt;
        try {
            return std::stod(v);
        } catch (const std::exception&) {
            throw ParseError("bad number '" + v + "' in " + path.string(), line);
        }
    };
    std::vector<SeriesCell> cells;
    for (std::size_t i = 0; i < table.rows.size(); ++i) {
        const auto& row = table.rows[i];
        SeriesCell c;
        c.date = row.at(c_date);
        c.label_class = row.at(c_class);
        c.afinn_mean = opt(row.at(c_afinn), i + 2);
        for (std::size_t e = 0; e < kEmotionCount; ++e) c.emotion_means[e] = opt(row.at(c_emotion[e]), i + 2);
        try {
            c.n = std::stoull(row.at(c_n));
        } catch (const std::exception&) {
            throw ParseError("bad count in " + path.string(), i + 2);
        }
        cells.push_back(std::move(c));
    }
    return cells;
}

void write_records_csv(const std::vector<SentimentRecord>& records, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    CsvWriter csv(out);
    std::vector<std::string> header{"tweet_id", "created_at", "afinn_sum"};
    for (const auto name : kEmotionNames) header.emplace_back(name);
    header.push_back("n_tokens");
    csv.row(header);
    for (const auto& r : records) {
        std::vector<std::string> row{r.tweet_id, format_timestamp(r.created_at), std::to_string(r.afinn_sum)};
        for (const auto c : r.emotion_counts) row.push_back(std::to_string(c));
        row.push_back(std::to_string(r.n_tokens));
        csv.row(row);
    }
    if (!out) throw IoError("write failed for " + path.string());
}

} // namespace infodemic::sentiment
