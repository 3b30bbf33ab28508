#include "infodemic/corpus.hpp"

#include "infodemic/error.hpp"

#include <nlohmann/json.hpp>
#include <unicode/locid.h>
#include <unicode/normalizer2.h>
#include <unicode/uchar.h>
#include <unicode/unistr.h>
#include <unicode/utf8.h>

#include <fstream>
#include <unordered_set>

namespace infodemic::corpus {

using nlohmann::json;

namespace {

std::optional<std::string> optional_string(const json& obj, const char* key, bool& ok) {
    const auto it = obj.find(key);
    if (it == obj.end() || it->is_null()) return std::nullopt;
    if (!it->is_string()) {
        ok = false;
        return std::nullopt;
    }
    return it->get<std::string>();
}

bool is_handle_char(char c) {
    return (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
}

std::string strip_retweet_marker(std::string s) {
    if (!s.starts_with("rt @")) return s;
    std::size_t i = 4;
    while (i < s.size() && is_handle_char(s[i])) ++i;
    if (i == 4 || i >= s.size() || s[i] != ':') return s;
    return s.substr(i + 1);
}

std::string remove_urls(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    std::size_t i = 0;
    while (i < s.size()) {
        const std::string_view rest(s.data() + i, s.size() - i);
        const bool at_token_start = i == 0 || std::isspace(static_cast<unsigned char>(s[i - 1]));
        if (rest.starts_with("http://") || rest.starts_with("https://") ||
            (at_token_start && rest.starts_with("www."))) {
            while (i < s.size() && !std::isspace(static_cast<unsigned char>(s[i]))) ++i;
            out += ' ';
            continue;
        }
        out += s[i++];
    }
    return out;
}

std::string collapse_whitespace(const std::string& s) {
    std::string out;
    out.reserve(s.size());
    bool pending_space = false;
    std::int32_t i = 0;
    const auto length = static_cast<std::int32_t>(s.size());
    const auto* bytes = reinterpret_cast<const std::uint8_t*>(s.data());
    while (i < length) {
        const std::int32_t start = i;
        UChar32 cp;
        U8_NEXT(bytes, i, length, cp);
        if (cp >= 0 && (u_isUWhiteSpace(cp) || cp == 0x200B)) {
            pending_space = !out.empty();
            continue;
        }
        if (pending_space) {
            out += ' ';
            pending_space = false;
        }
        out.append(s, static_cast<std::size_t>(start), static_cast<std::size_t>(i - start));
    }
    return out;
}

} // namespace

bool language_matches(std::string_view lang, std::string_view filter) {
    if (filter.empty()) return true;
    if (lang.size() < filter.size()) return false;
    if (ascii_lower(lang.substr(0, filter.size())) != ascii_lower(filter)) return false;
    return lang.size() == filter.size() || lang[filter.size()] == '-' || lang[filter.size()] == '_';
}

std::optional<Tweet> parse_tweet(std::string_view line) {
    json obj = json::parse(line, nullptr, /*allow_exceptions=*/false);
    if (obj.is_discarded() || !obj.is_object()) return std::nullopt;

    const auto required = [&](const char* key) -> const json* {
        const auto it = obj.find(key);
        if (it == obj.end() || !it->is_string()) return nullptr;
        return &*it;
    };
    const json* id = required("id");
    const json* text = required("text");
    const json* created = required("created_at");
    const json* lang = required("lang");
    if (!id || !text || !created || !lang) return std::nullopt;

    Tweet t;
    t.id = id->get<std::string>();
    if (t.id.empty()) return std::nullopt;
    t.text = text->get<std::string>();
    const auto ts = parse_timestamp(created->get<std::string>());
    if (!ts) return std::nullopt;
    t.created_at = *ts;
    t.lang = lang->get<std::string>();

    bool ok = true;
    if (const auto author = optional_string(obj, "author_id", ok)) t.author_id = *author;
    t.reply_to_id = optional_string(obj, "reply_to_id", ok);
    t.retweet_of_id = optional_string(obj, "retweet_of_id", ok);
    t.source_domain = optional_string(obj, "source_domain", ok);
    if (!ok) return std::nullopt;

    if (const auto urls = obj.find("urls"); urls != obj.end() && !urls->is_null()) {
        if (!urls->is_array()) return std::nullopt;
        for (const auto& u : *urls) {
            if (!u.is_string()) return std::nullopt;
            t.linked_urls.push_back(u.get<std::string>());
        }
    }
    return t;
}

std::string to_json_line(const Tweet& t) {
    const auto opt = [](const std::optional<std::string>& v) -> json { return v ? json(*v) : json(nullptr); };
    // ordered_json keeps the documented field order in the output
    nlohmann::ordered_json obj;
    obj["id"] = t.id;
    obj["text"] = t.text;
    obj["created_at"] = format_timestamp(t.created_at);
    obj["lang"] = t.lang;
    obj["author_id"] = t.author_id;
    obj["reply_to_id"] = opt(t.reply_to_id);
    obj["retweet_of_id"] = opt(t.retweet_of_id);
    obj["urls"] = t.linked_urls;
    obj["source_domain"] = opt(t.source_domain);
    return obj.dump(-1, ' ', false, json::error_handler_t::replace);
}

LoadReport load_jsonl(const std::filesystem::path& path, const std::optional<std::string>& lang_filter,
                      const std::function<void(Tweet&&)>& sink) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read corpus file " + path.string());
    LoadReport report;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        if (trim(line).empty()) continue;
        ++report.lines_read;
        auto tweet = parse_tweet(line);
        if (!tweet) {
            ++report.skipped;
            continue;
        }
        ++report.parsed;
        if (lang_filter && !language_matches(tweet->lang, *lang_filter)) {
            ++report.language_rejected;
            continue;
        }
        sink(std::move(*tweet));
    }
    if (in.bad()) throw IoError("read error on " + path.string());
    return report;
}

std::vector<Tweet> load_jsonl(const std::filesystem::path& path, const std::optional<std::string>& lang_filter,
                              LoadReport* report) {
    std::vector<Tweet> tweets;
    const auto r = load_jsonl(path, lang_filter, [&](Tweet&& t) { tweets.push_back(std::move(t)); });
    if (report) *report = r;
    return tweets;
}

void write_jsonl(const std::filesystem::path& path, const std::vector<Tweet>& tweets) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    for (const auto& t : tweets) out << to_json_line(t) << '\n';
    if (!out) throw IoError("write failed for " + path.string());
}

std::string normalize_tweet(std::string_view text) {
    if (text.empty()) return {};
    UErrorCode status = U_ZERO_ERROR;
    const icu::Normalizer2* nfc = icu::Normalizer2::getNFCInstance(status);
    icu::UnicodeString ustr = icu::UnicodeString::fromUTF8(
        icu::StringPiece(text.data(), static_cast<std::int32_t>(text.size())));
    icu::UnicodeString normalized = U_SUCCESS(status) ? nfc->normalize(ustr, status) : ustr;
    if (U_FAILURE(status)) normalized = ustr;
    normalized.toLower(icu::Locale::getRoot());
    std::string lowered;
    normalized.toUTF8String(lowered);

    lowered = collapse_whitespace(lowered);
    lowered = strip_retweet_marker(std::move(lowered));
    return collapse_whitespace(remove_urls(lowered));
}

std::vector<Tweet> deduplicate(std::vector<Tweet> tweets, DedupKey key, std::size_t* dropped) {
    std::unordered_set<std::string> seen;
    std::vector<Tweet> kept;
    kept.reserve(tweets.size());
    for (auto& t : tweets) {
        std::string k = key == DedupKey::Id ? t.id : normalize_tweet(t.text);
        if (seen.insert(std::move(k)).second) kept.push_back(std::move(t));
    }
    if (dropped) *dropped = tweets.size() - kept.size();
    return kept;
}

std::int64_t assign_time_slice(Timestamp created_at, Timestamp epoch, SliceWidth width) {
    if (width.count() <= 0) throw InvalidArgument("slice width must be positive");
    if (created_at < epoch)
        throw OutOfRange("timestamp " + format_timestamp(created_at) + " precedes epoch " + format_timestamp(epoch));
    return (created_at - epoch).count() / width.count();
}

std::int64_t slice_count(Timestamp epoch, Timestamp last, SliceWidth width) {
    return assign_time_slice(last, epoch, width) + 1;
}

std::string url_host(std::string_view url) {
    auto pos = url.find("://");
    std::string_view rest = pos == std::string_view::npos ? url : url.substr(pos + 3);
    const auto end = rest.find_first_of("/?#");
    std::string_view host = rest.substr(0, end);
    if (const auto at = host.rfind('@'); at != std::string_view::npos) host.remove_prefix(at + 1);
    if (const auto colon = host.find(':'); colon != std::string_view::npos) host = host.substr(0, colon);
    std::string h = ascii_lower(host);
    while (!h.empty() && h.back() == '.') h.pop_back();
    if (h.starts_with("www.")) h.erase(0, 4);
    return h;
}

} // namespace infodemic::corpus
