#pragma once

#include <chrono>
#include <filesystem>
#include <initializer_list>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace infodemic {

using Timestamp = std::chrono::sys_seconds;

/// Parses ISO-8601 instants such as "2020-01-21T10:00:00Z",
/// "2020-01-21T10:00:00.123+02:00" or "2020-01-21 10:00:00". Fractional
/// seconds are truncated. Returns nullopt when the text is not a valid instant.
std::optional<Timestamp> parse_timestamp(std::string_view text);

/// Canonical UTC form "YYYY-MM-DDTHH:MM:SSZ".
std::string format_timestamp(Timestamp t);

/// "YYYY-MM-DD" of the UTC day containing t.
std::string format_date(Timestamp t);

/// Shortest decimal text that round-trips the double.
std::string format_double(double v);

/// Fixed-point text with the given number of decimals.
std::string format_fixed(double v, int decimals);

// CSV per RFC 4180: fields containing comma, quote, CR or LF are quoted and
// embedded quotes doubled. Rows end with "\n".
std::string csv_escape(std::string_view field);

class CsvWriter {
public:
    explicit CsvWriter(std::ostream& out) : out_(out) {}
    void row(std::initializer_list<std::string_view> fields);
    void row(const std::vector<std::string>& fields);

private:
    std::ostream& out_;
};

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<std::string>> rows;

    /// Index of a header column; throws ParseError if absent.
    std::size_t column(std::string_view name) const;
};

/// Reads an RFC-4180 file whose first record is a header.
CsvTable read_csv(const std::filesystem::path& path);
std::vector<std::vector<std::string>> parse_csv(std::string_view text);

std::string read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::string_view content);
void ensure_directory(const std::filesystem::path& dir);

/// Lowercase hex SHA-256.
std::string sha256_hex(std::string_view data);
std::string sha256_file(const std::filesystem::path& path);

std::string trim(std::string_view s);
std::string ascii_lower(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);

} // namespace infodemic
