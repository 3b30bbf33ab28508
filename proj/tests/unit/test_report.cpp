#include "infodemic/error.hpp"
#include "infodemic/report.hpp"

#include "../support/synthetic.hpp"

#include <doctest.h>

#include <fstream>
#include <set>

using namespace infodemic;
using namespace infodemic::report;

namespace {

theoryfilter::PartitionReport sample_partition() {
    return theoryfilter::summarize_matches({"5G", "Gates", "Vax"},
                                           {{"5G"}, {"5G", "Gates"}, {"Gates"}, {"Gates", "Vax"}, {"Vax"}, {"5G"}});
}

} // namespace

TEST_CASE("overlap graph from id sets") {
    const auto g = overlap_graph({{"A", {"1", "2", "3"}}, {"B", {"3", "4"}}, {"C", {"5"}}});
    CHECK(g.nodes.at("A") == 3);
    CHECK(g.edge("A", "B") == 1);
    CHECK(g.edge("B", "A") == 1);
    CHECK(g.edge("A", "C") == 0);
    CHECK(g.edges.size() == 3);
    const auto from_report = overlap_graph(sample_partition());
    CHECK(from_report.edge("5G", "Gates") == 1);
    CHECK(from_report.edge("5G", "Vax") == 0);
    const auto svg = overlap_svg(from_report);
    CHECK((svg.starts_with("<?xml") || svg.starts_with("<svg")));
    CHECK(svg.find("Gates") != std::string::npos);
}

TEST_CASE("table 2 shares") {
    const auto filtered = sample_partition();
    const auto misinfo = theoryfilter::summarize_matches({"5G", "Gates", "Vax"}, {{"5G"}, {"Gates", "Vax"}});
    const auto rows = table2(filtered, misinfo);
    REQUIRE(rows.size() == 3);
    CHECK(rows[0].theory == "5G");
    CHECK(rows[0].count == 3);
    CHECK(rows[0].pct == doctest::Approx(100.0 * 3 / 8));
    CHECK(rows[1].multi_count == 2);
    CHECK(rows[1].multi_pct == doctest::Approx(100.0 * 2 / 3));
    CHECK(rows[0].misinfo_count == 1);
    CHECK(rows[0].misinfo_pct == doctest::Approx(100.0 / 3));
    CHECK(rows[2].misinfo_multi_count == 1);
    double total = 0.0;
    for (const auto& r : rows) total += r.pct;
    CHECK(total == doctest::Approx(100.0));
    const auto no_misinfo = table2(filtered, std::nullopt);
    CHECK(no_misinfo[0].misinfo_count == 0);
}

TEST_CASE("table 3 round trip") {
    const std::vector<Table3Row> rows{{"Vax", 142, 632}, {"5G", 367, 356}};
    const auto dir = synth::fresh_dir("report_t3");
    write_table3_csv(rows, dir / "t3.csv");
    const auto back = read_table3_csv(dir / "t3.csv");
    REQUIRE(back.size() == 2);
    CHECK(back[0].misinfo == 142);
    CHECK(back[1].not_misinfo == 356);
    CHECK(read_csv(dir / "t3.csv").rows[0][3] == "18.35");
    CHECK(Table3Row{"x", 0, 0}.misinfo_pct() == 0.0);
}

TEST_CASE("metrics csv round trip and table 4 change column") {
    const auto rf = forest::metrics_from_confusion({80, 20, 10, 90});
    const auto al = forest::metrics_from_confusion({85, 10, 5, 100});
    const auto dir = synth::fresh_dir("report_t4");
    write_metrics_csv("Lab", "rf", rf, dir / "m.csv");
    std::vector<std::string> variants;
    const auto back = read_metrics_csv(dir / "m.csv", &variants);
    REQUIRE(back.size() == 1);
    CHECK(back[0].first == "Lab");
    CHECK(variants == std::vector<std::string>{"rf"});
    CHECK(back[0].second.confusion.tp == 80);
    CHECK(back[0].second.f1 == doctest::Approx(rf.f1).epsilon(1e-6));

    write_table4_csv({{"Lab", rf, al}, {"5G", rf, std::nullopt}}, dir / "t4.csv");
    const auto t = read_csv(dir / "t4.csv");
    REQUIRE(t.rows.size() == 3);
    const auto change = t.column("change");
    CHECK(t.rows[0][change].empty());
    CHECK(std::stod(t.rows[1][change]) == doctest::Approx(al.f1 - rf.f1).epsilon(1e-3));
    CHECK(t.rows[2][t.column("variant")] == "rf");
}

TEST_CASE("loess reproduces lines and respects its arguments") {
    std::vector<Point> pts;
    for (int i = 0; i < 10; ++i) pts.push_back({static_cast<double>(i), 3.0 - 0.5 * i});
    for (const auto& p : loess_smooth(pts, 0.5)) CHECK(p.y == doctest::Approx(3.0 - 0.5 * p.x));
    CHECK_THROWS_AS(loess_smooth({{0, 0}, {1, 1}}, 0.75), InvalidArgument);
    CHECK_THROWS_AS(loess_smooth(pts, 0.0), InvalidArgument);
    CHECK_THROWS_AS(loess_smooth(pts, 0.1), InvalidArgument);
    // A constant stays constant, including at repeated x values.
    std::vector<Point> flat{{0, 2}, {0, 2}, {1, 2}, {2, 2}, {2, 2}};
    for (const auto& p : loess_smooth(flat, 0.8)) CHECK(p.y == doctest::Approx(2.0));
}

TEST_CASE("line chart svg") {
    const auto svg = line_chart_svg("T & <title>", {{"misinfo", {{0, 1}, {1, 2}}}, {"not", {{0, 0}}}}, "day", "y");
    CHECK(svg.find("<polyline") != std::string::npos);
    CHECK(svg.find("T &amp; &lt;title&gt;") != std::string::npos);
    CHECK(line_chart_svg("empty", {}, "x", "y").find("</svg>") != std::string::npos);
}

TEST_CASE("manifest hashes files in name order") {
    const auto dir = synth::fresh_dir("report_manifest");
    write_file(dir / "b.csv", "h\n1\n2\n");
    write_file(dir / "a.svg", "<svg/>");
    const auto entries = write_manifest(dir, {"b.csv", "a.svg"}, {{"seed", 3}});
    REQUIRE(entries.size() == 2);
    CHECK(entries[0].file == "a.svg");
    CHECK(entries[1].rows == 2);
    CHECK(entries[1].sha256 == sha256_hex("h\n1\n2\n"));
    const auto doc = nlohmann::json::parse(read_file(dir / "manifest.json"));
    CHECK(doc.at("config").at("seed") == 3);
    CHECK_THROWS_AS(write_manifest(dir, {"missing.csv"}, {}), IoError);
}

TEST_CASE("export report writes what is present") {
    ReportArtifacts a;
    a.partition = sample_partition();
    a.label_distribution = {{"5G", 10, 20}};
    a.metrics = {{"5G", forest::metrics_from_confusion({5, 1, 1, 5}), std::nullopt}};
    for (int d = 0; d < 6; ++d)
        for (const char* cls : {"misinfo", "not_misinfo"}) {
            sentiment::SeriesCell c;
            c.date = format_date(synth::day(d));
            c.label_class = cls;
            c.n = 1;
            c.afinn_mean = d * 0.1;
            a.sentiment.push_back(c);
        }
    const auto dir = synth::fresh_dir("report_export");
    const auto entries = export_report(a, dir);
    std::set<std::string> names;
    for (const auto& e : entries) names.insert(e.file);
    for (const char* f : {"table2.csv", "overlap_edges.csv", "overlap_graph.svg", "table3.csv", "table4.csv",
                          "sentiment_series.csv", "sentiment_trend.csv", "sentiment_trend.svg"})
        CHECK(names.count(f));
    CHECK_FALSE(names.count("misinfo_overlap_graph.svg"));
    CHECK(std::filesystem::exists(dir / "manifest.json"));

    const auto again = synth::fresh_dir("report_export_again");
    export_report(a, again);
    CHECK(read_file(dir / "manifest.json") == read_file(again / "manifest.json"));
}
