#pragma once

// Built-in benchmark programs, generated as `.fd` source text.

#include <charconv>
#include <optional>
#include <string>
#include <string_view>

#include "codeine/program.hpp"

namespace codeine::programs {

/// fd_element(I,[2,5,7],A), (A#=I ; A#=2), labeling on [I,A].
inline std::string toy() {
    return "# element plus a two-way disjunction; the second branch is the feasible one\n"
           "var I;\n"
           "var A;\n"
           "constraint element(I, [2,5,7], A);\n"
           "constraint or(eq(A, I), eqc(A, 2));\n"
           "label([I, A]);\n";
}

/// n-queens: one variable per column, rows 1..n; pairwise row and
/// diagonal disequalities.
inline std::string queens(int n) {
    std::string out = "# " + std::to_string(n) + "-queens\n";
    for (int i = 1; i <= n; ++i) out += "var Q" + std::to_string(i) + " in 1.." + std::to_string(n) + ";\n";
    for (int i = 1; i <= n; ++i) {
        for (int j = i + 1; j <= n; ++j) {
            std::string a = "Q" + std::to_string(i);
            std::string b = "Q" + std::to_string(j);
            std::string d = std::to_string(j - i);
            out += "constraint neq(" + a + ", " + b + ");\n";
            out += "constraint neq_offset(" + a + ", " + b + ", " + d + ");\n";
            out += "constraint neq_offset(" + a + ", " + b + ", -" + d + ");\n";
        }
    }
    out += "label([";
    for (int i = 1; i <= n; ++i) out += (i > 1 ? ", Q" : "Q") + std::to_string(i);
    out += "]);\n";
    return out;
}

/// x < y and y < x over 1..n: infeasible, proved by about 2n bound
/// reductions bouncing between the two constraints.
inline std::string propag(int n) {
    std::string r = std::to_string(n);
    return "# infeasible; propagation alone proves it\n"
           "var X in 1.." + r + ";\n"
           "var Y in 1.." + r + ";\n"
           "constraint lt(X, Y);\n"
           "constraint lt(Y, X);\n";
}

/// "toy", "queens(8)" / "queens8", "propag(1000)" / "propag1000".
inline std::optional<std::string> builtin(std::string_view name) {
    if (name == "toy") return toy();
    auto sized = [&](std::string_view prefix) -> std::optional<int> {
        if (name.substr(0, prefix.size()) != prefix) return std::nullopt;
        std::string_view rest = name.substr(prefix.size());
        if (!rest.empty() && rest.front() == '(' && rest.back() == ')') rest = rest.substr(1, rest.size() - 2);
        int n = 0;
        auto [ptr, ec] = std::from_chars(rest.data(), rest.data() + rest.size(), n);
        if (ec != std::errc() || ptr != rest.data() + rest.size() || n <= 0) return std::nullopt;
        return n;
    };
    if (auto n = sized("queens")) return queens(*n);
    if (auto n = sized("propag")) return propag(*n);
    return std::nullopt;
}

}  // namespace codeine::programs
