#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <sstream>

#include "codeine/codeine.hpp"
#include "support.hpp"

using namespace codeine;

namespace {

std::vector<std::string> split(const std::string& line) {
    std::vector<std::string> out;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ',')) out.push_back(cell);
    if (!line.empty() && line.back() == ',') out.emplace_back();
    return out;
}

bench::Report small_report(const std::string& name) {
    bench::Report r;
    bench::Options o;
    o.repeat = 2;
    o.min_seconds = 0.01;
    bench::run_program(r, name, load_program(*programs::builtin(name)), o);
    return r;
}

}  // namespace

TEST_CASE("measure repeats until the floor and reports deviation", "[bench]") {
    int calls = 0;
    auto t = bench::measure([&] { ++calls; }, 3, 0.002);
    CHECK(t.samples_ms.size() == 3);
    CHECK(calls >= 3);
    CHECK(t.mean_ms > 0);
    CHECK(t.max_rel_dev >= 0);
    double mean = (t.samples_ms[0] + t.samples_ms[1] + t.samples_ms[2]) / 3;
    CHECK(t.mean_ms == Catch::Approx(mean));
}

TEST_CASE("default trace byte count matches the emitted text", "[bench]") {
    RunOptions det;
    det.clock = deterministic_clock();
    std::stringstream out;
    emit_default_trace(load_program(programs::queens(5)), out, det);
    CHECK(bench::default_trace_bytes(load_program(programs::queens(5)), det) == out.str().size());
}

TEST_CASE("benchmark report on queens(8)", "[bench]") {
    auto r = small_report("queens(8)");
    const auto* prog = r.find("queens(8)", "prog");
    REQUIRE(prog);
    CHECK(prog->events == test_support::full_trace(programs::queens(8)).size());

    const auto* never = r.find("queens(8)", "driver", "3a");
    REQUIRE(never);
    CHECK(never->matched == 0);
    CHECK(never->bytes == 0);
    CHECK(never->events == prog->events);

    for (const auto* set : {"1a", "2a", "4a"}) CHECK(r.find("queens(8)", "driver", set)->matched == 0);

    const auto* all = r.find("queens(8)", "gcom", "(1|2|3|4)b");
    REQUIRE(all);
    CHECK(all->matched > 0);
    CHECK(all->bytes < prog->bytes);
    std::uint64_t parts = 0;
    for (const auto* set : {"1b", "2b", "3b", "4b"}) parts += r.find("queens(8)", "gcom", set)->matched;
    CHECK(all->matched <= parts);
}

TEST_CASE("benchmark counts are deterministic", "[bench]") {
    auto a = small_report("toy");
    auto b = small_report("toy");
    REQUIRE(a.rows.size() == b.rows.size());
    for (std::size_t i = 0; i < a.rows.size(); ++i) {
        CHECK(a.rows[i].events == b.rows[i].events);
        CHECK(a.rows[i].matched == b.rows[i].matched);
        CHECK(a.rows[i].bytes == b.rows[i].bytes);
    }
}

TEST_CASE("CSV output is consistent with the raw times", "[bench]") {
    auto r = small_report("toy");
    std::stringstream csv;
    bench::write_csv(csv, r);
    std::string line;
    std::getline(csv, line);
    CHECK(line == bench::kCsvHeader);
    auto header = split(line);
    double prog_ms = 0;
    int rows = 0;
    while (std::getline(csv, line)) {
        auto cells = split(line);
        REQUIRE(cells.size() == header.size());
        double mean = std::stod(cells[6]);
        if (cells[1] == "prog") {
            prog_ms = mean;
            double eps = std::stod(cells[8]);
            CHECK(std::abs(eps - mean * 1e6 / std::stod(cells[3])) < 0.01);
        }
        REQUIRE(prog_ms > 0);
        double recomputed = mean / prog_ms;
        CHECK(std::abs(recomputed - std::stod(cells[9])) < 0.0015);
        ++rows;
    }
    CHECK(rows == static_cast<int>(r.rows.size()));
    CHECK(rows == 1 + 4 + 5);
}

TEST_CASE("propag is dominated by reductions", "[bench]") {
    std::map<Port, std::uint64_t> counts;
    run(load_program(programs::propag(2000)), [&](const EventView& v) {
        ++counts[v.port()];
        return Flow::proceed;
    });
    std::uint64_t reduce = counts[Port::reduce];
    for (const auto& [port, n] : counts) {
        if (port != Port::reduce) CHECK(n < reduce);
    }
    CHECK(reduce == 2000);
}
