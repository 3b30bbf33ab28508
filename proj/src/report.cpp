#include "infodemic/report.hpp"

#include "infodemic/error.hpp"
#include "infodemic/io.hpp"

#include <fmt/format.h>

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numbers>
#include <numeric>
#include <set>
#include <sstream>
#include <unordered_set>

namespace infodemic::report {

std::size_t OverlapGraph::edge(const std::string& a, const std::string& b) const {
    const auto key = a < b ? theoryfilter::TheoryPair{a, b} : theoryfilter::TheoryPair{b, a};
    const auto it = edges.find(key);
    return it == edges.end() ? 0 : it->second;
}

OverlapGraph overlap_graph(const std::vector<std::pair<std::string, std::vector<std::string>>>& id_sets) {
    OverlapGraph g;
    std::vector<std::unordered_set<std::string>> sets;
    for (const auto& [name, ids] : id_sets) {
        if (g.nodes.count(name)) throw InvalidArgument("duplicate theory " + name);
        g.theories.push_back(name);
        sets.emplace_back(ids.begin(), ids.end());
        g.nodes[name] = sets.back().size();
    }
    for (std::size_t i = 0; i < sets.size(); ++i)
        for (std::size_t j = i + 1; j < sets.size(); ++j) {
            const auto& small = sets[i].size() <= sets[j].size() ? sets[i] : sets[j];
            const auto& large = sets[i].size() <= sets[j].size() ? sets[j] : sets[i];
            std::size_t n = 0;
            for (const auto& id : small) n += large.count(id);
            const auto& a = g.theories[i];
            const auto& b = g.theories[j];
            g.edges[a < b ? theoryfilter::TheoryPair{a, b} : theoryfilter::TheoryPair{b, a}] = n;
        }
    return g;
}

OverlapGraph overlap_graph(const theoryfilter::PartitionReport& report) {
    OverlapGraph g;
    g.theories = report.theories;
    for (const auto& t : report.theories) {
        const auto it = report.per_theory_count.find(t);
        g.nodes[t] = it == report.per_theory_count.end() ? 0 : it->second;
    }
    for (std::size_t i = 0; i < g.theories.size(); ++i)
        for (std::size_t j = i + 1; j < g.theories.size(); ++j) {
            const auto& a = g.theories[i];
            const auto& b = g.theories[j];
            g.edges[a < b ? theoryfilter::TheoryPair{a, b} : theoryfilter::TheoryPair{b, a}] = report.overlap(a, b);
        }
    return g;
}

void write_overlap_csv(const OverlapGraph& graph, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    CsvWriter csv(out);
    csv.row({"theory_a", "theory_b", "count"});
    for (const auto& [pair, n] : graph.edges) csv.row({pair.first, pair.second, std::to_string(n)});
    if (!out) throw IoError("write failed for " + path.string());
}

namespace {

std::string xml_escape(std::string_view s) {
    std::string out;
    for (const char c : s) {
        switch (c) {
        case '&': out += "&amp;"; break;
        case '<': out += "&lt;"; break;
        case '>': out += "&gt;"; break;
        case '"': out += "&quot;"; break;
        default: out += c;
        }
    }
    return out;
}

std::string num(double v) { return format_fixed(v, 2); }

constexpr std::string_view kPalette[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b"};

} // namespace

std::string overlap_svg(const OverlapGraph& graph) {
    const double size = 480.0, cx = size / 2, cy = size / 2, ring = 160.0;
    const std::size_t n = graph.theories.size();
    std::size_t max_node = 1, max_edge = 1;
    for (const auto& [t, c] : graph.nodes) max_node = std::max(max_node, c);
    for (const auto& [p, c] : graph.edges) max_edge = std::max(max_edge, c);

    std::map<std::string, std::pair<double, double>> pos;
    for (std::size_t i = 0; i < n; ++i) {
        const double angle = 2.0 * std::numbers::pi * static_cast<double>(i) / static_cast<double>(n) - std::numbers::pi / 2;
        pos[graph.theories[i]] = {cx + ring * std::cos(angle), cy + ring * std::sin(angle)};
    }
    std::ostringstream svg;
    svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << size << "\" height=\"" << size
        << "\" viewBox=\"0 0 " << size << ' ' << size << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
    for (const auto& [p, c] : graph.edges) {
        if (c == 0) continue;
        const auto [x1, y1] = pos.at(p.first);
        const auto [x2, y2] = pos.at(p.second);
        const double width = 1.0 + 11.0 * static_cast<double>(c) / static_cast<double>(max_edge);
        svg << "<line x1=\"" << num(x1) << "\" y1=\"" << num(y1) << "\" x2=\"" << num(x2) << "\" y2=\"" << num(y2)
            << "\" stroke=\"#888888\" stroke-opacity=\"0.7\" stroke-width=\"" << num(width) << "\"><title>"
            << xml_escape(p.first) << " - " << xml_escape(p.second) << ": " << c << "</title></line>\n";
    }
    for (std::size_t i = 0; i < n; ++i) {
        const auto& t = graph.theories[i];
        const auto [x, y] = pos.at(t);
        const double r = 8.0 + 42.0 * std::sqrt(static_cast<double>(graph.nodes.at(t)) / static_cast<double>(max_node));
        svg << "<circle cx=\"" << num(x) << "\" cy=\"" << num(y) << "\" r=\"" << num(r) << "\" fill=\""
            << kPalette[i % std::size(kPalette)] << "\" fill-opacity=\"0.8\"/>\n"
            << "<text x=\"" << num(x) << "\" y=\"" << num(y + 4) << "\" font-family=\"sans-serif\" font-size=\"13\" "
            << "text-anchor=\"middle\">" << xml_escape(t) << " (" << graph.nodes.at(t) << ")</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

std::vector<double> loess_smooth(const std::vector<Point>& points, double span, const std::vector<double>& grid) {
    const std::size_t n = points.size();
    if (n < 3) throw InvalidArgument("loess needs at least 3 points");
    if (!(span > 0.0 && span <= 1.0)) throw InvalidArgument("loess span must lie in (0, 1]");
    const auto q = static_cast<std::size_t>(std::ceil(span * static_cast<double>(n) - 1e-12));
    if (span * static_cast<double>(n) < 2.0 || q < 2) throw InvalidArgument("loess span covers fewer than 2 points");

    std::vector<double> fitted;
    fitted.reserve(grid.size());
    std::vector<double> dist(n);
    for (const double x0 : grid) {
        for (std::size_t i = 0; i < n; ++i) dist[i] = std::abs(points[i].x - x0);
        std::vector<double> sorted = dist;
        std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(q - 1), sorted.end());
        const double dmax = sorted[q - 1];

        double sw = 0.0, sx = 0.0, sy = 0.0;
        std::vector<double> w(n, 0.0);
        for (std::size_t i = 0; i < n; ++i) {
            if (dmax > 0.0) {
                const double u = dist[i] / dmax;
                if (u < 1.0) w[i] = std::pow(1.0 - u * u * u, 3);
            } else if (dist[i] == 0.0) {
                w[i] = 1.0;
            }
            sw += w[i];
            sx += w[i] * points[i].x;
            sy += w[i] * points[i].y;
        }
        if (!(sw > 0.0)) throw InvalidArgument("loess neighbourhood has no positive weight");
        const double xbar = sx / sw, ybar = sy / sw;
        double sxx = 0.0, sxy = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double dx = points[i].x - xbar;
            sxx += w[i] * dx * dx;
            sxy += w[i] * dx * (points[i].y - ybar);
        }
        // a neighbourhood with a single distinct x only supports a constant
        const double slope = sxx > 1e-12 * sw * std::max(1.0, xbar * xbar) ? sxy / sxx : 0.0;
        fitted.push_back(ybar + slope * (x0 - xbar));
    }
    return fitted;
}

std::vector<Point> loess_smooth(const std::vector<Point>& points, double span) {
    std::vector<double> grid;
    grid.reserve(points.size());
    for (const auto& p : points) grid.push_back(p.x);
    const auto y = loess_smooth(points, span, grid);
    std::vector<Point> out;
    for (std::size_t i = 0; i < points.size(); ++i) out.push_back({points[i].x, y[i]});
    return out;
}

namespace {

double pct(std::size_t num, std::size_t den) {
    return den == 0 ? 0.0 : 100.0 * static_cast<double>(num) / static_cast<double>(den);
}

std::size_t lookup(const std::map<std::string, std::size_t>& m, const std::string& key) {
    const auto it = m.find(key);
    return it == m.end() ? 0 : it->second;
}

} // namespace

std::vector<Table2Row> table2(const theoryfilter::PartitionReport& filtered,
                              const std::optional<theoryfilter::PartitionReport>& misinfo) {
    const std::size_t total = filtered.total_memberships();
    std::vector<Table2Row> rows;
    for (const auto& t : filtered.theories) {
        Table2Row r;
        r.theory = t;
        r.count = lookup(filtered.per_theory_count, t);
        r.pct = pct(r.count, total);
        r.multi_count = lookup(filtered.multi_theory_count, t);
        r.multi_pct = pct(r.multi_count, r.count);
        if (misinfo) {
            r.misinfo_count = lookup(misinfo->per_theory_count, t);
            r.misinfo_pct = pct(r.misinfo_count, r.count);
            r.misinfo_multi_count = lookup(misinfo->multi_theory_count, t);
            r.misinfo_multi_pct = pct(r.misinfo_multi_count, r.count);
        }
        rows.push_back(std::move(r));
    }
    return rows;
}

void write_table2_csv(const std::vector<Table2Row>& rows, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    CsvWriter csv(out);
    csv.row({"theory", "count", "pct", "multi_count", "multi_pct", "misinfo_count", "misinfo_pct",
             "misinfo_multi_count", "misinfo_multi_pct"});
    for (const auto& r : rows)
        csv.row({r.theory, std::to_string(r.count), format_fixed(r.pct, 2), std::to_string(r.multi_count),
                 format_fixed(r.multi_pct, 2), std::to_string(r.misinfo_count), format_fixed(r.misinfo_pct, 2),
                 std::to_string(r.misinfo_multi_count), format_fixed(r.misinfo_multi_pct, 2)});
    if (!out) throw IoError("write failed for " + path.string());
}

double Table3Row::misinfo_pct() const { return pct(misinfo, misinfo + not_misinfo); }

void write_table3_csv(const std::vector<Table3Row>& rows, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    CsvWriter csv(out);
    csv.row({"theory", "misinfo_n", "not_misinfo_n", "misinfo_pct"});
    for (const auto& r : rows)
        csv.row({r.theory, std::to_string(r.misinfo), std::to_string(r.not_misinfo), format_fixed(r.misinfo_pct(), 2)});
    if (!out) throw IoError("write failed for " + path.string());
}

namespace {

std::size_t parse_count(const std::string& s, const std::filesystem::path& path) {
    try {
        std::size_t used = 0;
        const auto v = std::stoull(s, &used);
        if (used != s.size()) throw std::invalid_argument(s);
        return static_cast<std::size_t>(v);
    } catch (const std::exception&) {
        throw ParseError("bad count '" + s + "' in " + path.string());
    }
}

} // namespace

std::vector<Table3Row> read_table3_csv(const std::filesystem::path& path) {
    const CsvTable table = read_csv(path);
    const auto ti = table.column("theory"), mi = table.column("misinfo_n"), ni = table.column("not_misinfo_n");
    std::vector<Table3Row> rows;
    for (const auto& r : table.rows)
        rows.push_back({r.at(ti), parse_count(r.at(mi), path), parse_count(r.at(ni), path)});
    return rows;
}

void write_table4_csv(const std::vector<Table4Row>& rows, const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    CsvWriter csv(out);
    csv.row({"theory", "variant", "accuracy", "recall", "precision", "f1", "change"});
    const auto emit = [&](const std::string& theory, const char* variant, const forest::Metrics& m,
                          const std::string& change) {
        csv.row({theory, variant, format_fixed(m.accuracy, 4), format_fixed(m.recall, 4), format_fixed(m.precision, 4),
                 format_fixed(m.f1, 4), change});
    };
    for (const auto& r : rows) {
        emit(r.theory, "rf", r.rf, "");
        if (r.rf_active) emit(r.theory, "rf_active", *r.rf_active, format_fixed(r.rf_active->f1 - r.rf.f1, 4));
    }
    if (!out) throw IoError("write failed for " + path.string());
}

void write_metrics_csv(const std::string& theory, const std::string& variant, const forest::Metrics& m,
                       const std::filesystem::path& path) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    CsvWriter csv(out);
    csv.row({"theory", "variant", "accuracy", "recall", "precision", "f1", "tp", "fp", "fn", "tn"});
    csv.row({theory, variant, format_fixed(m.accuracy, 6), format_fixed(m.recall, 6), format_fixed(m.precision, 6),
             format_fixed(m.f1, 6), std::to_string(m.confusion.tp), std::to_string(m.confusion.fp),
             std::to_string(m.confusion.fn), std::to_string(m.confusion.tn)});
    if (!out) throw IoError("write failed for " + path.string());
}

std::vector<std::pair<std::string, forest::Metrics>> read_metrics_csv(const std::filesystem::path& path,
                                                                      std::vector<std::string>* variants) {
    const CsvTable table = read_csv(path);
    const auto ti = table.column("theory"), vi = table.column("variant");
    const auto tp = table.column("tp"), fp = table.column("fp"), fn = table.column("fn"), tn = table.column("tn");
    std::vector<std::pair<std::string, forest::Metrics>> out;
    for (const auto& r : table.rows) {
        forest::Confusion c{parse_count(r.at(tp), path), parse_count(r.at(fp), path), parse_count(r.at(fn), path),
                            parse_count(r.at(tn), path)};
        out.emplace_back(r.at(ti), forest::metrics_from_confusion(c));
        if (variants) variants->push_back(r.at(vi));
    }
    return out;
}

std::string line_chart_svg(const std::string& title, const std::vector<Series>& series, const std::string& x_label,
                           const std::string& y_label) {
    const double width = 720, height = 400, left = 60, right = 150, top = 40, bottom = 50;
    double xmin = 0, xmax = 1, ymin = 0, ymax = 1;
    bool any = false;
    for (const auto& s : series)
        for (const auto& p : s.points) {
            if (!any) {
                xmin = xmax = p.x;
                ymin = ymax = p.y;
                any = true;
            }
            xmin = std::min(xmin, p.x);
            xmax = std::max(xmax, p.x);
            ymin = std::min(ymin, p.y);
            ymax = std::max(ymax, p.y);
        }
    if (xmax == xmin) xmax = xmin + 1;
    if (ymax == ymin) ymax = ymin + 1;
    const double pw = width - left - right, ph = height - top - bottom;
    const auto sx = [&](double x) { return left + (x - xmin) / (xmax - xmin) * pw; };
    const auto sy = [&](double y) { return top + ph - (y - ymin) / (ymax - ymin) * ph; };

    std::ostringstream svg;
    svg << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n"
        << "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"" << width << "\" height=\"" << height
        << "\" viewBox=\"0 0 " << width << ' ' << height << "\">\n"
        << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n"
        << "<text x=\"" << num(width / 2) << "\" y=\"24\" font-family=\"sans-serif\" font-size=\"15\" "
        << "text-anchor=\"middle\">" << xml_escape(title) << "</text>\n"
        << "<line x1=\"" << num(left) << "\" y1=\"" << num(top + ph) << "\" x2=\"" << num(left + pw) << "\" y2=\""
        << num(top + ph) << "\" stroke=\"black\"/>\n"
        << "<line x1=\"" << num(left) << "\" y1=\"" << num(top) << "\" x2=\"" << num(left) << "\" y2=\""
        << num(top + ph) << "\" stroke=\"black\"/>\n";
    for (int i = 0; i <= 4; ++i) {
        const double yv = ymin + (ymax - ymin) * i / 4.0;
        const double xv = xmin + (xmax - xmin) * i / 4.0;
        svg << "<text x=\"" << num(left - 6) << "\" y=\"" << num(sy(yv) + 4)
            << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"end\">" << format_fixed(yv, 2)
            << "</text>\n"
            << "<text x=\"" << num(sx(xv)) << "\" y=\"" << num(top + ph + 16)
            << "\" font-family=\"sans-serif\" font-size=\"11\" text-anchor=\"middle\">" << format_fixed(xv, 1)
            << "</text>\n";
    }
    svg << "<text x=\"" << num(left + pw / 2) << "\" y=\"" << num(height - 10)
        << "\" font-family=\"sans-serif\" font-size=\"12\" text-anchor=\"middle\">" << xml_escape(x_label)
        << "</text>\n"
        << "<text x=\"16\" y=\"" << num(top + ph / 2) << "\" font-family=\"sans-serif\" font-size=\"12\" "
        << "text-anchor=\"middle\" transform=\"rotate(-90 16 " << num(top + ph / 2) << ")\">" << xml_escape(y_label)
        << "</text>\n";
    for (std::size_t i = 0; i < series.size(); ++i) {
        const auto colour = kPalette[i % std::size(kPalette)];
        svg << "<polyline fill=\"none\" stroke=\"" << colour << "\" stroke-width=\"1.5\" points=\"";
        for (std::size_t j = 0; j < series[i].points.size(); ++j) {
            if (j) svg << ' ';
            svg << num(sx(series[i].points[j].x)) << ',' << num(sy(series[i].points[j].y));
        }
        svg << "\"/>\n"
            << "<text x=\"" << num(left + pw + 10) << "\" y=\"" << num(top + 14 + 16.0 * static_cast<double>(i))
            << "\" font-family=\"sans-serif\" font-size=\"12\" fill=\"" << colour << "\">"
            << xml_escape(series[i].name) << "</text>\n";
    }
    svg << "</svg>\n";
    return svg.str();
}

namespace {

struct ClassTrend {
    std::vector<std::size_t> cells; // indices into the cell list
    std::vector<Point> points;
    std::vector<Point> smoothed;
};

std::map<std::string, ClassTrend> sentiment_trends(const std::vector<sentiment::SeriesCell>& cells, double span) {
    std::map<std::string, ClassTrend> trends;
    std::optional<std::string> first_date;
    for (const auto& c : cells)
        if (!first_date || c.date < *first_date) first_date = c.date;
    const auto day_index = [&](const std::string& date) {
        const auto a = parse_timestamp(*first_date + "T00:00:00Z");
        const auto b = parse_timestamp(date + "T00:00:00Z");
        if (!a || !b) throw InvalidArgument("bad series date " + date);
        return static_cast<double>(std::chrono::duration_cast<std::chrono::days>(*b - *a).count());
    };
    for (std::size_t i = 0; i < cells.size(); ++i) {
        if (!cells[i].afinn_mean) continue;
        auto& t = trends[cells[i].label_class];
        t.cells.push_back(i);
        t.points.push_back({day_index(cells[i].date), *cells[i].afinn_mean});
    }
    for (auto& [cls, t] : trends)
        if (t.points.size() >= 3 && span * static_cast<double>(t.points.size()) >= 2.0)
            t.smoothed = loess_smooth(t.points, span);
    return trends;
}

} // namespace

void write_sentiment_trend_csv(const std::vector<sentiment::SeriesCell>& cells, double span,
                               const std::filesystem::path& path) {
    const auto trends = sentiment_trends(cells, span);
    std::vector<std::optional<double>> trend(cells.size());
    for (const auto& [cls, t] : trends)
        for (std::size_t j = 0; j < t.smoothed.size(); ++j) trend[t.cells[j]] = t.smoothed[j].y;
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) throw IoError("cannot write " + path.string());
    CsvWriter csv(out);
    csv.row({"date", "class", "afinn_mean", "trend"});
    for (std::size_t i = 0; i < cells.size(); ++i)
        csv.row({cells[i].date, cells[i].label_class, cells[i].afinn_mean ? format_fixed(*cells[i].afinn_mean, 6) : "",
                 trend[i] ? format_fixed(*trend[i], 6) : ""});
    if (!out) throw IoError("write failed for " + path.string());
}

std::vector<ManifestEntry> write_manifest(const std::filesystem::path& out_dir, std::vector<std::string> files,
                                          const nlohmann::ordered_json& config) {
    std::sort(files.begin(), files.end());
    files.erase(std::unique(files.begin(), files.end()), files.end());
    std::vector<ManifestEntry> entries;
    nlohmann::ordered_json list = nlohmann::ordered_json::array();
    for (const auto& f : files) {
        const auto full = out_dir / f;
        ManifestEntry e;
        e.file = f;
        const std::string content = read_file(full);
        e.sha256 = sha256_hex(content);
        if (full.extension() == ".csv") {
            const auto records = parse_csv(content);
            e.rows = records.empty() ? 0 : records.size() - 1;
        }
        list.push_back({{"file", e.file}, {"sha256", e.sha256}, {"rows", e.rows}});
        entries.push_back(std::move(e));
    }
    nlohmann::ordered_json manifest;
    manifest["format"] = "infodemic.manifest";
    manifest["version"] = 1;
    manifest["config"] = config;
    manifest["files"] = std::move(list);
    write_file(out_dir / "manifest.json", manifest.dump(2) + "\n");
    return entries;
}

std::vector<ManifestEntry> export_report(const ReportArtifacts& a, const std::filesystem::path& out_dir) {
    ensure_directory(out_dir);
    std::vector<std::string> files;
    const auto put = [&](const std::string& name, const std::string& content) {
        write_file(out_dir / name, content);
        files.push_back(name);
    };

    if (a.partition) {
        write_table2_csv(table2(*a.partition, a.misinfo_partition), out_dir / "table2.csv");
        files.push_back("table2.csv");
        const OverlapGraph filtered = overlap_graph(*a.partition);
        write_overlap_csv(filtered, out_dir / "overlap_edges.csv");
        files.push_back("overlap_edges.csv");
        put("overlap_graph.svg", overlap_svg(filtered));
        if (a.misinfo_partition) {
            const OverlapGraph mis = overlap_graph(*a.misinfo_partition);
            write_overlap_csv(mis, out_dir / "misinfo_overlap_edges.csv");
            files.push_back("misinfo_overlap_edges.csv");
            put("misinfo_overlap_graph.svg", overlap_svg(mis));
        }
    }
    if (!a.label_distribution.empty()) {
        write_table3_csv(a.label_distribution, out_dir / "table3.csv");
        files.push_back("table3.csv");
    }
    if (!a.metrics.empty()) {
        write_table4_csv(a.metrics, out_dir / "table4.csv");
        files.push_back("table4.csv");
    }
    if (!a.sentiment.empty()) {
        sentiment::write_series_csv(a.sentiment, out_dir / "sentiment_series.csv");
        files.push_back("sentiment_series.csv");
        write_sentiment_trend_csv(a.sentiment, a.loess_span, out_dir / "sentiment_trend.csv");
        files.push_back("sentiment_trend.csv");
        std::vector<Series> series;
        for (const auto& [cls, t] : sentiment_trends(a.sentiment, a.loess_span)) {
            series.push_back({cls, t.points});
            if (!t.smoothed.empty()) series.push_back({cls + " (loess)", t.smoothed});
        }
        put("sentiment_trend.svg", line_chart_svg("Mean signed sentiment per tweet", series, "day", "afinn mean"));
    }
    for (const auto& src : a.extra_files) {
        const std::string name = src.filename().string();
        if (std::find(files.begin(), files.end(), name) != files.end())
            throw InvalidArgument("report file name collision: " + name);
        put(name, read_file(src));
    }
    return write_manifest(out_dir, files, a.config);
}

} // namespace infodemic::report
