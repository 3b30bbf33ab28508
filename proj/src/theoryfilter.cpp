#include "infodemic/theoryfilter.hpp"

#include "infodemic/error.hpp"
#include "infodemic/parallel.hpp"

#include <boost/regex.hpp>

#include <fstream>
#include <set>

namespace infodemic::theoryfilter {

struct CompiledTheory::Impl {
    std::vector<boost::regex> patterns;
};

CompiledTheory::CompiledTheory(const TheoryConfig& config) : name_(config.name) {
    if (config.name.empty()) throw InvalidArgument("theory name must not be empty");
    auto impl = std::make_shared<Impl>();
    boost::regex::flag_type flags = boost::regex::perl;
    if (config.case_insensitive) flags |= boost::regex::icase;
    for (const auto& pattern : config.include_patterns) {
        try {
            impl->patterns.emplace_back(pattern, flags);
        } catch (const boost::regex_error& e) {
            throw InvalidArgument("theory '" + config.name + "': invalid pattern '" + pattern + "': " + e.what());
        }
    }
    impl_ = std::move(impl);
}

CompiledTheory::CompiledTheory(const CompiledTheory&) = default;
CompiledTheory::CompiledTheory(CompiledTheory&&) noexcept = default;
CompiledTheory& CompiledTheory::operator=(const CompiledTheory&) = default;
CompiledTheory& CompiledTheory::operator=(CompiledTheory&&) noexcept = default;
CompiledTheory::~CompiledTheory() = default;

bool CompiledTheory::matches(std::string_view text) const {
    for (const auto& re : impl_->patterns)
        if (boost::regex_search(text.begin(), text.end(), re)) return true;
    return false;
}

CompiledTheory compile_theory(const TheoryConfig& config) { return CompiledTheory(config); }

std::vector<CompiledTheory> compile_theories(const std::vector<TheoryConfig>& configs) {
    std::set<std::string> names;
    std::vector<CompiledTheory> compiled;
    for (const auto& c : configs) {
        if (!names.insert(c.name).second) throw InvalidArgument("duplicate theory name '" + c.name + "'");
        compiled.emplace_back(c);
    }
    return compiled;
}

std::vector<TheoryConfig> parse_theory_config(std::string_view text) {
    std::vector<TheoryConfig> configs;
    std::size_t line_no = 0;
    for (const auto& raw : split(text, '\n')) {
        ++line_no;
        const std::string line = trim(raw);
        if (line.empty() || line[0] == '#' || line[0] == ';') continue;
        if (line == "[theory]") {
            configs.emplace_back();
            continue;
        }
        if (line.front() == '[') throw ParseError("unknown section " + line, line_no);
        const auto eq = line.find('=');
        if (eq == std::string::npos) throw ParseError("expected key = value", line_no);
        if (configs.empty()) throw ParseError("key outside of a [theory] section", line_no);
        const std::string key = trim(std::string_view(line).substr(0, eq));
        const std::string value = trim(std::string_view(line).substr(eq + 1));
        auto& cfg = configs.back();
        if (key == "name") {
            cfg.name = value;
        } else if (key == "pattern") {
            cfg.include_patterns.push_back(value);
        } else if (key == "case_insensitive") {
            const std::string v = ascii_lower(value);
            if (v == "true" || v == "yes" || v == "1")
                cfg.case_insensitive = true;
            else if (v == "false" || v == "no" || v == "0")
                cfg.case_insensitive = false;
            else
                throw ParseError("case_insensitive must be true or false", line_no);
        } else {
            throw ParseError("unknown key '" + key + "'", line_no);
        }
    }
    for (const auto& c : configs)
        if (c.name.empty()) throw ParseError("[theory] section without a name");
    return configs;
}

std::vector<TheoryConfig> load_theory_config(const std::filesystem::path& path) {
    return parse_theory_config(read_file(path));
}

std::vector<std::string> match_theories(const corpus::Tweet& tweet, const std::vector<CompiledTheory>& theories) {
    std::vector<std::string> names;
    for (const auto& t : theories)
        if (t.matches(tweet.text)) names.push_back(t.name());
    return names;
}

std::size_t PartitionReport::overlap(const std::string& a, const std::string& b) const {
    const auto key = a < b ? TheoryPair{a, b} : TheoryPair{b, a};
    const auto it = pairwise_overlap.find(key);
    return it == pairwise_overlap.end() ? 0 : it->second;
}

std::size_t PartitionReport::total_memberships() const {
    std::size_t total = 0;
    for (const auto& [_, n] : per_theory_count) total += n;
    return total;
}

double PartitionReport::percent_of_total(const std::string& theory) const {
    const auto total = total_memberships();
    const auto it = per_theory_count.find(theory);
    if (total == 0 || it == per_theory_count.end()) return 0.0;
    return 100.0 * static_cast<double>(it->second) / static_cast<double>(total);
}

double PartitionReport::multi_percent(const std::string& theory) const {
    const auto n = per_theory_count.find(theory);
    const auto m = multi_theory_count.find(theory);
    if (n == per_theory_count.end() || n->second == 0 || m == multi_theory_count.end()) return 0.0;
    return 100.0 * static_cast<double>(m->second) / static_cast<double>(n->second);
}

PartitionReport summarize_matches(const std::vector<std::string>& theory_order,
                                  const std::vector<std::vector<std::string>>& match_sets) {
    PartitionReport report;
    report.theories = theory_order;
    for (const auto& t : theory_order) {
        report.per_theory_count[t] = 0;
        report.multi_theory_count[t] = 0;
    }
    for (std::size_t i = 0; i < theory_order.size(); ++i)
        for (std::size_t j = i + 1; j < theory_order.size(); ++j) {
            const auto& a = theory_order[i];
            const auto& b = theory_order[j];
            report.pairwise_overlap[a < b ? TheoryPair{a, b} : TheoryPair{b, a}] = 0;
        }

    for (const auto& raw : match_sets) {
        const std::set<std::string> matched(raw.begin(), raw.end());
        if (matched.empty()) continue;
        ++report.total_unique;
        for (const auto& t : matched) {
            ++report.per_theory_count[t];
            if (matched.size() > 1) ++report.multi_theory_count[t];
        }
        for (auto a = matched.begin(); a != matched.end(); ++a)
            for (auto b = std::next(a); b != matched.end(); ++b) ++report.pairwise_overlap[{*a, *b}];
    }
    return report;
}

Partition partition_corpus(const std::vector<corpus::Tweet>& tweets, const std::vector<CompiledTheory>& theories) {
    std::vector<std::vector<std::string>> matches(tweets.size());
    parallel_for(tweets.size(), [&](std::size_t i) { matches[i] = match_theories(tweets[i], theories); });

    std::vector<std::string> order;
    for (const auto& t : theories) order.push_back(t.name());

    Partition result;
    for (const auto& name : order) result.datasets[name];
    for (std::size_t i = 0; i < tweets.size(); ++i)
        for (const auto& name : matches[i]) result.datasets[name].push_back(tweets[i]);
    result.report = summarize_matches(order, matches);
    return result;
}

void write_partition_csv(const PartitionReport& report, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    CsvWriter csv(out);
    csv.row({"theory", "count", "pct", "multi_count", "multi_pct"});
    for (const auto& t : report.theories) {
        csv.row({t, std::to_string(report.per_theory_count.at(t)), format_fixed(report.percent_of_total(t), 2),
                 std::to_string(report.multi_theory_count.at(t)), format_fixed(report.multi_percent(t), 2)});
    }
}

void write_edge_csv(const PartitionReport& report, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    CsvWriter csv(out);
    csv.row({"theory_a", "theory_b", "count"});
    for (std::size_t i = 0; i < report.theories.size(); ++i)
        for (std::size_t j = i + 1; j < report.theories.size(); ++j) {
            const auto& a = report.theories[i];
            const auto& b = report.theories[j];
            csv.row({a, b, std::to_string(report.overlap(a, b))});
        }
}

PartitionReport read_partition_csv(const std::filesystem::path& counts, const std::filesystem::path& edges) {
    PartitionReport report;
    const auto c = read_csv(counts);
    const auto ci = c.column("theory"), cn = c.column("count"), cm = c.column("multi_count");
    for (const auto& row : c.rows) {
        report.theories.push_back(row[ci]);
        report.per_theory_count[row[ci]] = std::stoull(row[cn]);
        report.multi_theory_count[row[ci]] = std::stoull(row[cm]);
    }
    const auto e = read_csv(edges);
    const auto ea = e.column("theory_a"), eb = e.column("theory_b"), en = e.column("count");
    for (const auto& row : e.rows) {
        const auto& a = row[ea];
        const auto& b = row[eb];
        report.pairwise_overlap[a < b ? TheoryPair{a, b} : TheoryPair{b, a}] = std::stoull(row[en]);
    }
    return report;
}

} // namespace infodemic::theoryfilter
