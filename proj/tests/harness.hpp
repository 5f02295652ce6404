#pragma once

// Driver-over-socketpair harness and the post-hoc filtering oracle.

#include <algorithm>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <utility>
#include <vector>

#include "codeine/connection.hpp"
#include "codeine/driver.hpp"
#include "codeine/pattern.hpp"
#include "codeine/program.hpp"
#include "codeine/trace_event.hpp"

namespace test_support {

using ChronoLabels = std::pair<std::int64_t, std::vector<std::string>>;

struct Captured {
    std::vector<codeine::ParsedEvent> events;
    std::vector<std::string> replies;  // replies to the ADD commands
    codeine::DriverStats stats;
    std::uint64_t gos_sent = 0;        // excluding the start GO
    std::string handshake;
};

inline codeine::RunOptions deterministic(codeine::RunOptions opts = {}) {
    if (!opts.clock) opts.clock = codeine::deterministic_clock();
    return opts;
}

/// Runs `prog` under a driver, installs `patterns` with one ADD each from a
/// scripted analyzer and answers every sync event with GO.
inline Captured capture(const codeine::Program& prog, const std::vector<std::string>& patterns,
                        codeine::RunOptions opts = {}) {
    opts = deterministic(std::move(opts));
    auto [a, b] = codeine::socket_pair();
    Captured out;
    std::thread driver_thread([&, fd = a] {
        codeine::Connection conn(fd);
        codeine::TracerDriver driver(conn);
        out.stats = driver.drive(prog, opts);
    });
    {
        codeine::Connection client(b);
        out.handshake = client.pop().value_or("");
        for (const auto& p : patterns) {
            std::string flat = p;
            std::replace(flat.begin(), flat.end(), '\n', ' ');
            client.write_line("ADD " + flat);
            client.flush();
            out.replies.push_back(client.pop().value_or(""));
        }
        client.write_line("GO");
        client.flush();
        while (auto line = client.pop()) {
            out.events.push_back(codeine::parse_event(*line));
            if (out.events.back().sync) {
                client.write_line("GO");
                client.flush();
                ++out.gos_sent;
            }
        }
    }
    driver_thread.join();
    return out;
}

inline std::vector<ChronoLabels> chrono_labels(const std::vector<codeine::ParsedEvent>& events) {
    std::vector<ChronoLabels> out;
    for (const auto& e : events) out.emplace_back(e.event.chrono.value_or(-1), e.matched);
    std::sort(out.begin(), out.end());
    return out;
}

/// Oracle: serializes the default trace, parses it back and evaluates every
/// pattern on each event independently of the driver.
inline std::vector<ChronoLabels> post_hoc(const codeine::Program& prog, const std::vector<std::string>& patterns,
                                          codeine::RunOptions opts = {}) {
    std::vector<codeine::Pattern> parsed;
    for (const auto& p : patterns) parsed.push_back(codeine::parse_pattern(p));
    std::stringstream trace;
    codeine::emit_default_trace(prog, trace, deterministic(std::move(opts)));
    std::vector<ChronoLabels> out;
    std::string line;
    while (std::getline(trace, line)) {
        codeine::TraceEvent e = codeine::parse_event(line).event;
        std::vector<std::string> labels;
        for (const auto& p : parsed) {
            if (codeine::evaluate(*p.formula, e)) labels.push_back(p.label);
        }
        if (!labels.empty()) out.emplace_back(e.chrono.value_or(-1), std::move(labels));
    }
    std::sort(out.begin(), out.end());
    return out;
}

}  // namespace test_support
