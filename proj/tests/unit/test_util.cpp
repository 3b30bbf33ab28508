#include "infodemic/error.hpp"
#include "infodemic/io.hpp"
#include "infodemic/parallel.hpp"
#include "infodemic/rng.hpp"

#include "../support/synthetic.hpp"

#include <doctest.h>

#include <atomic>
#include <set>

using namespace infodemic;

TEST_CASE("timestamps parse in the accepted forms") {
    const auto base = parse_timestamp("2020-01-21T10:00:00Z");
    REQUIRE(base);
    CHECK(format_timestamp(*base) == "2020-01-21T10:00:00Z");
    CHECK(parse_timestamp("2020-01-21 10:00:00") == base);
    CHECK(parse_timestamp("2020-01-21T12:00:00.750+02:00") == base);
    CHECK(format_date(*base) == "2020-01-21");
    CHECK_FALSE(parse_timestamp("not a date"));
    CHECK_FALSE(parse_timestamp("2020-02-30T00:00:00Z"));
    CHECK_FALSE(parse_timestamp(""));
}

TEST_CASE("numbers format for output") {
    CHECK(format_fixed(0.8076, 3) == "0.808");
    CHECK(format_fixed(18.346, 2) == "18.35");
    for (const double v : {0.1, 1.0 / 3.0, 1e-300, 12345.678}) CHECK(std::stod(format_double(v)) == v);
}

TEST_CASE("csv round trip with quoting") {
    std::ostringstream s;
    CsvWriter w(s);
    w.row({"a", "b,c", "say \"hi\"", "line\nbreak"});
    w.row({"1", "", "3", "4"});
    CHECK(s.str().find("\"b,c\"") != std::string::npos);
    const auto rows = parse_csv(s.str());
    REQUIRE(rows.size() == 2);
    CHECK(rows[0][1] == "b,c");
    CHECK(rows[0][2] == "say \"hi\"");
    CHECK(rows[0][3] == "line\nbreak");
    CHECK(rows[1][1].empty());
}

TEST_CASE("csv tables look up columns by name") {
    const auto dir = synth::fresh_dir("util_csv");
    write_file(dir / "t.csv", "x,y\n1,2\n");
    const auto t = read_csv(dir / "t.csv");
    CHECK(t.column("y") == 1);
    CHECK_THROWS_AS(t.column("z"), ParseError);
    CHECK_THROWS_AS(read_file(dir / "missing.csv"), IoError);
}

TEST_CASE("sha256 matches a published digest") {
    CHECK(sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    CHECK(sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("string helpers") {
    CHECK(trim("  a b \t\n") == "a b");
    CHECK(ascii_lower("AbC-\xc3\x89") == "abc-\xc3\x89");
    CHECK(split("a,,b", ',') == std::vector<std::string>{"a", "", "b"});
}

TEST_CASE("rng helpers are uniform enough and reproducible") {
    Rng a(5), b(5);
    std::vector<int> counts(7, 0);
    for (int i = 0; i < 70000; ++i) {
        const auto x = rand_below(a, 7);
        CHECK(x == rand_below(b, 7));
        ++counts[x];
    }
    for (const int c : counts) CHECK(std::abs(c - 10000) < 500);
    for (int i = 0; i < 1000; ++i) {
        const double u = rand_unit(a);
        CHECK(u >= 0.0);
        CHECK(u < 1.0);
    }
    CHECK(derive_seed(1, 0) != derive_seed(1, 1));
    CHECK(derive_seed(1, 0) != derive_seed(2, 0));
}

TEST_CASE("shuffle permutes") {
    std::vector<int> v(100);
    for (int i = 0; i < 100; ++i) v[i] = i;
    Rng rng(3);
    shuffle(std::span<int>(v), rng);
    CHECK(std::set<int>(v.begin(), v.end()).size() == 100);
    CHECK_FALSE(std::is_sorted(v.begin(), v.end()));
}

TEST_CASE("parallel_for visits every index and rethrows") {
    set_thread_count(4);
    std::vector<std::atomic<int>> seen(1000);
    parallel_for(seen.size(), [&](std::size_t i) { seen[i]++; });
    for (const auto& s : seen) CHECK(s.load() == 1);
    CHECK_THROWS_AS(parallel_for(100,
                                 [](std::size_t i) {
                                     if (i == 57) throw InvalidArgument("boom");
                                 }),
                    InvalidArgument);
    set_thread_count(0);
}
