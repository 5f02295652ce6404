#pragma once

#include <algorithm>
#include <numeric>
#include <string>
#include <vector>

#include "codeine/program.hpp"
#include "codeine/solver.hpp"
#include "codeine/trace_event.hpp"

namespace test_support {

/// Every event of a run, with every present attribute including the
/// whole-store dumps.
inline std::vector<codeine::TraceEvent> full_trace(const codeine::Program& prog, codeine::RunOptions opts = {}) {
    if (!opts.clock) opts.clock = codeine::deterministic_clock();
    std::vector<codeine::TraceEvent> out;
    codeine::run(
        prog,
        [&](const codeine::EventView& v) {
            out.push_back(v.materialize(codeine::AttributeSet::all()));
            return codeine::Flow::proceed;
        },
        opts);
    return out;
}

inline std::vector<codeine::TraceEvent> full_trace(const std::string& text, codeine::RunOptions opts = {}) {
    return full_trace(codeine::load_program(text), std::move(opts));
}

/// Number of n-queens solutions by enumerating all row permutations.
inline int brute_force_queens(int n) {
    std::vector<int> rows(static_cast<std::size_t>(n));
    std::iota(rows.begin(), rows.end(), 1);
    int count = 0;
    do {
        bool ok = true;
        for (int i = 0; i < n && ok; ++i) {
            for (int j = i + 1; j < n && ok; ++j) {
                if (std::abs(rows[i] - rows[j]) == j - i) ok = false;
            }
        }
        count += ok;
    } while (std::next_permutation(rows.begin(), rows.end()));
    return count;
}

}  // namespace test_support
