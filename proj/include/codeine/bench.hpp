#pragma once

// Benchmark harness: untraced time, driver time with never-matching
// patterns, driver-plus-communication time with matching patterns, and
// trace sizes.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <functional>
#include <ostream>
#include <streambuf>
#include <string>
#include <thread>
#include <vector>

#include "codeine/connection.hpp"
#include "codeine/driver.hpp"
#include "codeine/program.hpp"
#include "codeine/solver.hpp"

namespace codeine::bench {

struct PatternSet {
    std::string name;
    std::vector<std::string> patterns;
};

/// Never-matching sets: few events with a costly condition, every event
/// with a cheap one, and an impossible tree position.
inline std::vector<PatternSet> overhead_sets() {
    return {
        {"1a", {"p1a: when port=post and isNamed(cname) do current(port,chrono,cident)"}},
        {"2a", {"p2a: when port=reduce and (isNamed(vname) and isNamed(cname)) do current(port,chrono,cident)"}},
        {"3a", {"p3a: when chrono=0 do current(chrono)"}},
        {"4a", {"p4a: when depth=50000 or (chrono>=1 and node=9999999) do current(chrono,depth)"}},
    };
}

/// Matching sets: constraints and tree, variables and domains, reductions,
/// awakenings, and all of them together.
inline std::vector<PatternSet> communication_sets() {
    const std::string cstr = "cstr: when port=post do current(chrono,cident,cinternal)";
    const std::string tree = "tree: when port in [failure,backTo,choicePoint,solution] do current(chrono,node,port)";
    const std::string newvar = "newvar: when port=newVariable do current(chrono, vident, vname)";
    const std::string dom = "dom: when port in [choicePoint,backTo,solution] do current(chrono,node,port,named_vars,full_dom)";
    const std::string propag1 = "propag1: when port=reduce do current(chrono)";
    const std::string propag2 = "propag2: when port=awake do current(chrono)";
    return {
        {"1b", {cstr, tree}},
        {"2b", {newvar, dom}},
        {"3b", {propag1}},
        {"4b", {propag2}},
        {"(1|2|3|4)b", {cstr, tree, newvar, dom, propag1, propag2}},
    };
}

// ── Byte counting ───────────────────────────────────────────────────────────

class CountingBuf : public std::streambuf {
public:
    std::uint64_t count = 0;

protected:
    int_type overflow(int_type ch) override {
        if (ch != traits_type::eof()) ++count;
        return ch;
    }
    std::streamsize xsputn(const char*, std::streamsize n) override {
        count += static_cast<std::uint64_t>(n);
        return n;
    }
};

/// Bytes of the default trace of `prog`.
inline std::uint64_t default_trace_bytes(const Program& prog, RunOptions opts = {}) {
    CountingBuf buf;
    std::ostream out(&buf);
    emit_default_trace(prog, out, std::move(opts));
    return buf.count;
}

// ── One traced run ──────────────────────────────────────────────────────────

struct TracedRun {
    DriverStats driver;
    std::uint64_t event_lines = 0;
    std::uint64_t event_bytes = 0;  // event lines including newlines
};

/// Runs `prog` under a driver whose analyzer installs `patterns`, releases
/// the start gate, answers sync events with GO and counts what it receives.
inline TracedRun traced_run(const Program& prog, const std::vector<std::string>& patterns, RunOptions opts = {}) {
    auto [a, b] = socket_pair();
    TracedRun out;
    std::thread driver_thread([&, fd = a] {
        Connection conn(fd);
        TracerDriver d(conn);
        out.driver = d.drive(prog, opts);
    });
    {
        Connection analyzer(b);
        analyzer.pop();
        for (const auto& p : patterns) {
            analyzer.write_line("ADD " + p);
            analyzer.flush();
            auto reply = analyzer.pop();
            if (!reply || *reply != "<ok/>") {
                analyzer.shutdown_write();
                while (analyzer.pop()) {
                }
                driver_thread.join();
                throw Error("pattern rejected: " + p + " -> " + reply.value_or("<eof>"));
            }
        }
        analyzer.write_line("GO");
        analyzer.flush();
        while (auto line = analyzer.pop()) {
            ++out.event_lines;
            out.event_bytes += line->size() + 1;
            if (line->find(" sync=\"true\"") != std::string::npos) {
                analyzer.write_line("GO");
                analyzer.flush();
            }
        }
    }
    driver_thread.join();
    return out;
}

// ── Timing ──────────────────────────────────────────────────────────────────

struct Timing {
    double mean_ms = 0;
    double max_rel_dev = 0;        // max |sample - mean| / mean
    std::vector<double> samples_ms;
    std::uint64_t runs_per_sample = 0;
};

/// Each sample repeats `fn` until `min_seconds` of wall time have
/// accumulated and records the per-run average. `repeat` samples.
inline Timing measure(const std::function<void()>& fn, int repeat, double min_seconds) {
    using clock = std::chrono::steady_clock;
    Timing t;
    for (int r = 0; r < std::max(1, repeat); ++r) {
        std::uint64_t runs = 0;
        auto start = clock::now();
        double elapsed = 0;
        do {
            fn();
            ++runs;
            elapsed = std::chrono::duration<double>(clock::now() - start).count();
        } while (elapsed < min_seconds);
        t.samples_ms.push_back(elapsed * 1000.0 / static_cast<double>(runs));
        t.runs_per_sample += runs;
    }
    t.runs_per_sample /= t.samples_ms.size();
    double sum = 0;
    for (double s : t.samples_ms) sum += s;
    t.mean_ms = sum / static_cast<double>(t.samples_ms.size());
    for (double s : t.samples_ms) t.max_rel_dev = std::max(t.max_rel_dev, std::abs(s - t.mean_ms) / t.mean_ms);
    return t;
}

// ── Report ──────────────────────────────────────────────────────────────────

struct Row {
    std::string program;
    std::string measure;      // prog | driver | gcom
    std::string pattern_set;  // empty for prog
    std::uint64_t events = 0;
    std::uint64_t matched = 0;
    std::uint64_t bytes = 0;  // default trace for prog, filtered trace otherwise
    Timing timing;
    double ratio = 1.0;       // mean_ms / T_prog mean_ms
};

struct Report {
    std::vector<Row> rows;

    const Row* find(const std::string& program, const std::string& measure, const std::string& set = {}) const {
        for (const auto& r : rows) {
            if (r.program == program && r.measure == measure && r.pattern_set == set) return &r;
        }
        return nullptr;
    }
};

struct Options {
    int repeat = 3;
    double min_seconds = 2.0;
    bool driver = true;  // never-matching sets
    bool gcom = true;    // matching sets
};

inline std::string ratio_text(double r) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.3f", r);
    return buf;
}

/// Benchmarks one program. `log` receives progress lines when non-null.
inline void run_program(Report& report, const std::string& name, const Program& prog, const Options& o,
                        std::ostream* log = nullptr) {
    RunOptions det;
    det.clock = deterministic_clock();
    Row base;
    base.program = name;
    base.measure = "prog";
    RunStats stats = run_untraced(prog, det);
    base.events = stats.events;
    base.bytes = default_trace_bytes(prog, det);
    base.timing = measure([&] { run_untraced(prog); }, o.repeat, o.min_seconds);
    report.rows.push_back(base);
    if (log) *log << name << ": " << base.events << " events, T_prog " << base.timing.mean_ms << " ms\n";

    auto add_sets = [&](const std::vector<PatternSet>& sets, const char* measure) {
        for (const auto& set : sets) {
            Row r;
            r.program = name;
            r.measure = measure;
            r.pattern_set = set.name;
            TracedRun probe = traced_run(prog, set.patterns, det);
            r.events = probe.driver.run.events;
            r.matched = probe.event_lines;
            r.bytes = probe.event_bytes;
            r.timing = bench::measure([&] { traced_run(prog, set.patterns); }, o.repeat, o.min_seconds);
            r.ratio = r.timing.mean_ms / base.timing.mean_ms;
            report.rows.push_back(r);
            if (log) {
                *log << name << ": " << measure << " " << set.name << " matched " << r.matched << ", R "
                     << ratio_text(r.ratio) << "\n";
            }
        }
    };
    if (o.driver) add_sets(overhead_sets(), "driver");
    if (o.gcom) add_sets(communication_sets(), "gcom");
}

inline constexpr const char* kCsvHeader =
    "program,measure,pattern_set,events,matched_events,bytes,mean_ms,max_rel_dev,epsilon_ns,ratio,runs_per_sample";

inline void write_csv(std::ostream& out, const Report& report) {
    out << kCsvHeader << '\n';
    for (const auto& r : report.rows) {
        const Row* base = report.find(r.program, "prog");
        double eps = base && base->events ? base->timing.mean_ms * 1e6 / static_cast<double>(base->events) : 0.0;
        char buf[512];
        std::snprintf(buf, sizeof buf, "%s,%s,%s,%llu,%llu,%llu,%.9g,%.6f,%.3f,%s,%llu", r.program.c_str(),
                      r.measure.c_str(), r.pattern_set.c_str(), static_cast<unsigned long long>(r.events),
                      static_cast<unsigned long long>(r.matched), static_cast<unsigned long long>(r.bytes),
                      r.timing.mean_ms, r.timing.max_rel_dev, eps, ratio_text(r.ratio).c_str(),
                      static_cast<unsigned long long>(r.timing.runs_per_sample));
        out << buf << '\n';
    }
}

/// Human-readable table.
inline void write_table(std::ostream& out, const Report& report) {
    char buf[512];
    std::snprintf(buf, sizeof buf, "%-14s %-7s %-11s %10s %10s %12s %12s %8s %8s\n", "program", "measure", "set",
                  "events", "matched", "bytes", "mean ms", "maxdev", "ratio");
    out << buf;
    for (const auto& r : report.rows) {
        std::snprintf(buf, sizeof buf, "%-14s %-7s %-11s %10llu %10llu %12llu %12.3f %7.2f%% %8s\n", r.program.c_str(),
                      r.measure.c_str(), r.pattern_set.c_str(), static_cast<unsigned long long>(r.events),
                      static_cast<unsigned long long>(r.matched), static_cast<unsigned long long>(r.bytes),
                      r.timing.mean_ms, r.timing.max_rel_dev * 100.0, ratio_text(r.ratio).c_str());
        out << buf;
    }
    for (const auto& r : report.rows) {
        if (r.measure != "prog" || r.events == 0) continue;
        std::snprintf(buf, sizeof buf, "%s: epsilon = %.3f ns/event\n", r.program.c_str(),
                      r.timing.mean_ms * 1e6 / static_cast<double>(r.events));
        out << buf;
    }
}

}  // namespace codeine::bench
