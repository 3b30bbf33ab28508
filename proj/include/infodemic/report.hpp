#pragma once

#include "infodemic/forest.hpp"
#include "infodemic/sentiment.hpp"
#include "infodemic/theoryfilter.hpp"

#include <nlohmann/json.hpp>

#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

namespace infodemic::report {

struct OverlapGraph {
    std::vector<std::string> theories;
    std::map<std::string, std::size_t> nodes;
    /// Keyed by (a, b) with a < b; every pair is present.
    std::map<theoryfilter::TheoryPair, std::size_t> edges;

    std::size_t edge(const std::string& a, const std::string& b) const;
};

/// Node sizes are set sizes and edges pairwise intersection sizes.
OverlapGraph overlap_graph(const std::vector<std::pair<std::string, std::vector<std::string>>>& id_sets);
OverlapGraph overlap_graph(const theoryfilter::PartitionReport& report);

/// theory_a,theory_b,count
void write_overlap_csv(const OverlapGraph& graph, const std::filesystem::path& path);
std::string overlap_svg(const OverlapGraph& graph);

struct Point {
    double x = 0.0;
    double y = 0.0;
};

inline constexpr double kDefaultLoessSpan = 0.75;

/// Local linear regression at each grid x over the ceil(span * n) nearest
/// points, tricube-weighted by distance relative to the farthest of them.
/// Throws InvalidArgument with fewer than 3 points or span * n < 2.
std::vector<double> loess_smooth(const std::vector<Point>& points, double span, const std::vector<double>& grid);
/// Smoothed values at the input x positions.
std::vector<Point> loess_smooth(const std::vector<Point>& points, double span = kDefaultLoessSpan);

struct Table2Row {
    std::string theory;
    std::size_t count = 0;
    double pct = 0.0;
    std::size_t multi_count = 0;
    double multi_pct = 0.0;
    std::size_t misinfo_count = 0;
    double misinfo_pct = 0.0;
    std::size_t misinfo_multi_count = 0;
    double misinfo_multi_pct = 0.0;
};

/// Dataset sizes are shared out over the summed dataset sizes; the other
/// three columns are relative to the theory's own dataset size. The misinfo
/// report summarizes the tweets each theory's model classified positive.
std::vector<Table2Row> table2(const theoryfilter::PartitionReport& filtered,
                              const std::optional<theoryfilter::PartitionReport>& misinfo);
/// theory,count,pct,multi_count,multi_pct,misinfo_count,misinfo_pct,misinfo_multi_count,misinfo_multi_pct
void write_table2_csv(const std::vector<Table2Row>& rows, const std::filesystem::path& path);

struct Table3Row {
    std::string theory;
    std::size_t misinfo = 0;
    std::size_t not_misinfo = 0;

    double misinfo_pct() const;
};

/// theory,misinfo_n,not_misinfo_n,misinfo_pct
void write_table3_csv(const std::vector<Table3Row>& rows, const std::filesystem::path& path);
std::vector<Table3Row> read_table3_csv(const std::filesystem::path& path);

struct Table4Row {
    std::string theory;
    forest::Metrics rf;
    std::optional<forest::Metrics> rf_active;
};

/// theory,variant,accuracy,recall,precision,f1,change. One row per variant;
/// change is the F1 difference on the active-learning row.
void write_table4_csv(const std::vector<Table4Row>& rows, const std::filesystem::path& path);

/// theory,variant,accuracy,recall,precision,f1,tp,fp,fn,tn for one model.
void write_metrics_csv(const std::string& theory, const std::string& variant, const forest::Metrics& m,
                       const std::filesystem::path& path);
/// Reads rows written by write_metrics_csv.
std::vector<std::pair<std::string, forest::Metrics>> read_metrics_csv(const std::filesystem::path& path,
                                                                      std::vector<std::string>* variants = nullptr);

struct Series {
    std::string name;
    std::vector<Point> points;
};

/// Static SVG 1.1 line chart with axes and one polyline per series.
std::string line_chart_svg(const std::string& title, const std::vector<Series>& series, const std::string& x_label,
                           const std::string& y_label);

/// date,class,afinn_mean,trend; trend is the loess fit through the non-empty
/// days of each class (blank when a class has fewer than 3 days).
void write_sentiment_trend_csv(const std::vector<sentiment::SeriesCell>& cells, double span,
                               const std::filesystem::path& path);

struct ManifestEntry {
    std::string file; // relative to the output directory
    std::string sha256;
    std::size_t rows = 0; // data rows for CSV files, 0 otherwise
};

/// Hashes the listed files and writes manifest.json with the entries sorted
/// by name and the run configuration echoed under "config".
std::vector<ManifestEntry> write_manifest(const std::filesystem::path& out_dir, std::vector<std::string> files,
                                          const nlohmann::ordered_json& config);

struct ReportArtifacts {
    std::optional<theoryfilter::PartitionReport> partition;
    std::optional<theoryfilter::PartitionReport> misinfo_partition;
    std::vector<Table3Row> label_distribution;
    std::vector<Table4Row> metrics;
    std::vector<sentiment::SeriesCell> sentiment;
    double loess_span = kDefaultLoessSpan;
    /// Files copied into the output directory unchanged (e.g. topic CSVs).
    std::vector<std::filesystem::path> extra_files;
    nlohmann::ordered_json config = nlohmann::ordered_json::object();
};

/// Writes every artifact that is present plus manifest.json. Throws IoError
/// when the directory cannot be written.
std::vector<ManifestEntry> export_report(const ReportArtifacts& artifacts, const std::filesystem::path& out_dir);

} // namespace infodemic::report
