#include "infodemic/error.hpp"
#include "infodemic/io.hpp"
#include "infodemic/parallel.hpp"

#include <fmt/format.h>
#include <openssl/evp.h>

#include <array>
#include <atomic>
#include <cctype>
#include <charconv>
#include <fstream>
#include <memory>
#include <sstream>

namespace infodemic {

namespace {
std::atomic<std::size_t> g_threads{0};

bool parse_int(std::string_view s, int& out) {
    if (s.empty()) return false;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc{} && ptr == s.data() + s.size();
}
} // namespace

std::size_t thread_count() {
    const std::size_t n = g_threads.load();
    if (n != 0) return n;
    const unsigned hw = std::thread::hardware_concurrency();
    return hw == 0 ? 1 : hw;
}

void set_thread_count(std::size_t n) { g_threads.store(n); }

std::optional<Timestamp> parse_timestamp(std::string_view text) {
    using namespace std::chrono;
    const std::string s = trim(text);
    // YYYY-MM-DD[T ]HH:MM:SS
    if (s.size() < 19 || s[4] != '-' || s[7] != '-' || (s[10] != 'T' && s[10] != ' ') || s[13] != ':' ||
        s[16] != ':')
        return std::nullopt;
    int y, mo, d, h, mi, se;
    std::string_view v(s);
    if (!parse_int(v.substr(0, 4), y) || !parse_int(v.substr(5, 2), mo) || !parse_int(v.substr(8, 2), d) ||
        !parse_int(v.substr(11, 2), h) || !parse_int(v.substr(14, 2), mi) || !parse_int(v.substr(17, 2), se))
        return std::nullopt;
    const year_month_day ymd{year{y}, month{static_cast<unsigned>(mo)}, day{static_cast<unsigned>(d)}};
    if (!ymd.ok() || h > 23 || mi > 59 || se > 60) return std::nullopt;

    std::size_t pos = 19;
    if (pos < s.size() && s[pos] == '.') {
        ++pos;
        const std::size_t start = pos;
        while (pos < s.size() && std::isdigit(static_cast<unsigned char>(s[pos]))) ++pos;
        if (pos == start) return std::nullopt;
    }
    int offset_minutes = 0;
    if (pos < s.size()) {
        const std::string_view zone = v.substr(pos);
        if (zone == "Z" || zone == "z") {
        } else if ((zone[0] == '+' || zone[0] == '-') && (zone.size() == 6 || zone.size() == 5)) {
            int oh, om;
            const bool colon = zone.size() == 6;
            if (colon && zone[3] != ':') return std::nullopt;
            if (!parse_int(zone.substr(1, 2), oh) || !parse_int(zone.substr(colon ? 4 : 3, 2), om))
                return std::nullopt;
            offset_minutes = (oh * 60 + om) * (zone[0] == '-' ? -1 : 1);
        } else {
            return std::nullopt;
        }
    }
    const sys_seconds t = sys_days{ymd} + hours{h} + minutes{mi} + seconds{se};
    return t - minutes{offset_minutes};
}

std::string format_timestamp(Timestamp t) {
    using namespace std::chrono;
    const auto day_point = floor<days>(t);
    const year_month_day ymd{day_point};
    const hh_mm_ss hms{t - day_point};
    return fmt::format("{:04d}-{:02d}-{:02d}T{:02d}:{:02d}:{:02d}Z", static_cast<int>(ymd.year()),
                       static_cast<unsigned>(ymd.month()), static_cast<unsigned>(ymd.day()), hms.hours().count(),
                       hms.minutes().count(), hms.seconds().count());
}

std::string format_date(Timestamp t) {
    using namespace std::chrono;
    const year_month_day ymd{floor<days>(t)};
    return fmt::format("{:04d}-{:02d}-{:02d}", static_cast<int>(ymd.year()), static_cast<unsigned>(ymd.month()),
                       static_cast<unsigned>(ymd.day()));
}

std::string format_double(double v) { return fmt::format("{}", v); }

std::string format_fixed(double v, int decimals) {
    if (v == 0.0) v = 0.0; // no "-0.000"
    std::string s = fmt::format("{:.{}f}", v, decimals);
    if (s.front() == '-' && s.find_first_not_of("-0.") == std::string::npos) s.erase(0, 1);
    return s;
}

std::string csv_escape(std::string_view field) {
    if (field.find_first_of(",\"\r\n") == std::string_view::npos) return std::string(field);
    std::string out = "\"";
    for (char c : field) {
        if (c == '"') out += '"';
        out += c;
    }
    out += '"';
    return out;
}

void CsvWriter::row(std::initializer_list<std::string_view> fields) {
    bool first = true;
    for (auto f : fields) {
        if (!first) out_ << ',';
        out_ << csv_escape(f);
        first = false;
    }
    out_ << '\n';
}

void CsvWriter::row(const std::vector<std::string>& fields) {
    for (std::size_t i = 0; i < fields.size(); ++i) {
        if (i) out_ << ',';
        out_ << csv_escape(fields[i]);
    }
    out_ << '\n';
}

std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
    std::vector<std::vector<std::string>> records;
    std::vector<std::string> record;
    std::string field;
    bool in_quotes = false;
    bool field_started = false;
    std::size_t line = 1;
    for (std::size_t i = 0; i < text.size(); ++i) {
        const char c = text[i];
        if (in_quotes) {
            if (c == '"') {
                if (i + 1 < text.size() && text[i + 1] == '"') {
                    field += '"';
                    ++i;
                } else {
                    in_quotes = false;
                }
            } else {
                if (c == '\n') ++line;
                field += c;
            }
            continue;
        }
        switch (c) {
        case '"':
            if (!field.empty()) throw ParseError("unexpected quote inside unquoted CSV field", line);
            in_quotes = true;
            field_started = true;
            break;
        case ',':
            record.push_back(std::move(field));
            field.clear();
            field_started = true;
            break;
        case '\r':
            break;
        case '\n':
            if (field_started || !field.empty() || !record.empty()) {
                record.push_back(std::move(field));
                records.push_back(std::move(record));
            }
            record.clear();
            field.clear();
            field_started = false;
            ++line;
            break;
        default:
            field += c;
            field_started = true;
        }
    }
    if (in_quotes) throw ParseError("unterminated quoted CSV field", line);
    if (field_started || !field.empty() || !record.empty()) {
        record.push_back(std::move(field));
        records.push_back(std::move(record));
    }
    return records;
}

std::size_t CsvTable::column(std::string_view name) const {
    for (std::size_t i = 0; i < header.size(); ++i)
        if (header[i] == name) return i;
    throw ParseError("missing CSV column '" + std::string(name) + "'", 1);
}

CsvTable read_csv(const std::filesystem::path& path) {
    auto records = parse_csv(read_file(path));
    CsvTable table;
    if (records.empty()) return table;
    table.header = std::move(records.front());
    if (!table.header.empty() && table.header[0].starts_with("\xEF\xBB\xBF")) table.header[0].erase(0, 3);
    for (std::size_t i = 1; i < records.size(); ++i) {
        if (records[i].size() != table.header.size())
            throw ParseError(path.string() + ": expected " + std::to_string(table.header.size()) + " fields",
                             i + 1);
        table.rows.push_back(std::move(records[i]));
    }
    return table;
}

std::string read_file(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw IoError("cannot read " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void write_file(const std::filesystem::path& path, std::string_view content) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    out.write(content.data(), static_cast<std::streamsize>(content.size()));
    if (!out) throw IoError("write failed for " + path.string());
}

void ensure_directory(const std::filesystem::path& dir) {
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec || !std::filesystem::is_directory(dir)) throw IoError("cannot create directory " + dir.string());
}

std::string sha256_hex(std::string_view data) {
    std::array<unsigned char, EVP_MAX_MD_SIZE> digest{};
    unsigned int len = 0;
    if (EVP_Digest(data.data(), data.size(), digest.data(), &len, EVP_sha256(), nullptr) != 1)
        throw Error("sha256 digest failed");
    std::string hex;
    hex.reserve(len * 2);
    for (unsigned int i = 0; i < len; ++i) hex += fmt::format("{:02x}", digest[i]);
    return hex;
}

std::string sha256_file(const std::filesystem::path& path) { return sha256_hex(read_file(path)); }

std::string trim(std::string_view s) {
    const auto is_space = [](char c) { return std::isspace(static_cast<unsigned char>(c)) != 0; };
    std::size_t b = 0, e = s.size();
    while (b < e && is_space(s[b])) ++b;
    while (e > b && is_space(s[e - 1])) --e;
    return std::string(s.substr(b, e - b));
}

std::string ascii_lower(std::string_view s) {
    std::string out(s);
    for (char& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

std::vector<std::string> split(std::string_view s, char sep) {
    std::vector<std::string> parts;
    std::size_t start = 0;
    for (;;) {
        const auto pos = s.find(sep, start);
        parts.emplace_back(s.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return parts;
}

} // namespace infodemic
