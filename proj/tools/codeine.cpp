// codeine command-line front end.

#include <CLI11.hpp>

#include <algorithm>
#include <cctype>
#include <fstream>
#include <iostream>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "codeine/bench.hpp"
#include "codeine/connection.hpp"
#include "codeine/driver.hpp"
#include "codeine/mediator.hpp"
#include "codeine/program.hpp"
#include "codeine/programs.hpp"
#include "codeine/solver.hpp"
#include "codeine/websocket.hpp"

using namespace codeine;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitError = 1;
constexpr int kExitNoInput = 2;

struct Common {
    std::string program;
    std::uint64_t max_solutions = 0;
    std::optional<std::int64_t> seed_clock;

    RunOptions run_options() const {
        RunOptions o;
        o.max_solutions = max_solutions;
        if (seed_clock) o.clock = deterministic_clock(*seed_clock);
        return o;
    }
};

struct NoInput : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// A file path, or `builtin:<name>` for one of the generated programs.
Program load(const std::string& source) {
    if (source.rfind("builtin:", 0) == 0) {
        auto text = programs::builtin(source.substr(8));
        if (!text) throw NoInput("unknown builtin program '" + source.substr(8) + "'");
        return load_program(*text);
    }
    std::ifstream in(source);
    if (!in) throw NoInput("cannot open '" + source + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return load_program(ss.str());
}

std::string read_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw NoInput("cannot open '" + path + "'");
    std::stringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

/// Names compared with embedded numbers by value: A < I, Q2 < Q10.
bool natural_less(const std::string& a, const std::string& b) {
    std::size_t i = 0;
    std::size_t j = 0;
    while (i < a.size() && j < b.size()) {
        if (std::isdigit(static_cast<unsigned char>(a[i])) && std::isdigit(static_cast<unsigned char>(b[j]))) {
            std::size_t i2 = i;
            std::size_t j2 = j;
            while (i2 < a.size() && std::isdigit(static_cast<unsigned char>(a[i2]))) ++i2;
            while (j2 < b.size() && std::isdigit(static_cast<unsigned char>(b[j2]))) ++j2;
            auto x = std::stoull(a.substr(i, i2 - i));
            auto y = std::stoull(b.substr(j, j2 - j));
            if (x != y) return x < y;
            i = i2;
            j = j2;
        } else {
            if (a[i] != b[j]) return a[i] < b[j];
            ++i;
            ++j;
        }
    }
    return a.size() - i < b.size() - j;
}

std::string format_assignment(Assignment answer) {
    std::sort(answer.begin(), answer.end(), [](const auto& x, const auto& y) { return natural_less(x.first, y.first); });
    std::string out;
    for (const auto& [name, dom] : answer) {
        if (!out.empty()) out += ", ";
        out += name + '=';
        out += dom.is_singleton() ? std::to_string(dom.min()) : format_domain(dom);
    }
    return out;
}

// ── run ─────────────────────────────────────────────────────────────────────

int cmd_run(const Common& c) {
    Program prog = load(c.program);
    RunStats stats = run_untraced(prog, c.run_options());
    if (stats.answers.empty()) {
        std::cout << "no solution\n";
    } else {
        for (const auto& a : stats.answers) std::cout << "solution " << format_assignment(a) << '\n';
    }
    std::cout << "solutions: " << stats.solutions << ", failures: " << stats.failures << ", events: " << stats.events
              << '\n';
    return kExitOk;
}

// ── trace ───────────────────────────────────────────────────────────────────

int cmd_trace(const Common& c, const std::string& out_path) {
    Program prog = load(c.program);
    RunOptions opts = c.run_options();
    if (!opts.clock) opts.clock = deterministic_clock();
    std::uint64_t bytes = 0;
    if (out_path.empty() || out_path == "-") {
        bytes = emit_default_trace(prog, std::cout, opts);
    } else {
        std::ofstream out(out_path, std::ios::binary);
        if (!out) throw Error("cannot write '" + out_path + "'");
        bytes = emit_default_trace(prog, out, opts);
    }
    std::cerr << bytes << " bytes\n";
    return kExitOk;
}

// ── serve ───────────────────────────────────────────────────────────────────

int cmd_serve(const Common& c, std::uint16_t port, const std::string& patterns, bool headless) {
    Program prog = load(c.program);
    std::string preload = patterns.empty() ? std::string{} : read_file(patterns);
    int lfd = listen_tcp(port);
    std::cerr << "codeine: listening on 127.0.0.1:" << bound_port(lfd) << std::endl;
    int fd = accept_one(lfd);
    ::close(lfd);
    Connection conn(fd);
    TracerDriver driver(conn, DriverOptions{.headless_on_disconnect = headless});
    if (!preload.empty()) driver.base().add_text(preload);
    DriverStats s = driver.drive(prog, c.run_options());
    std::cerr << "codeine: " << s.run.events << " events, " << s.emitted << " sent (" << s.sync_events << " sync), "
              << s.run.solutions << " solutions" << (s.run.aborted ? ", aborted" : "")
              << (s.headless ? ", finished headless" : "") << '\n';
    return kExitOk;
}

// ── debug ───────────────────────────────────────────────────────────────────

constexpr const char* kDebugHelp =
    "commands:\n"
    "  step                 freeze at the next event\n"
    "  skip_reductions      at awake, run to the end of that constraint's propagation\n"
    "  continue             drop step/skip and run to the next sync pattern\n"
    "  add <pattern>        install a pattern (sync patterns stop here)\n"
    "  remove <l>[,<l>]     remove patterns\n"
    "  reset                remove every pattern\n"
    "  current <a>[,<a>]    print attributes of the frozen event\n"
    "  quit                 abort the execution\n";

const std::vector<std::string> kLineAttributes = {"cident", "vident", "vdom", "delta", "cexternal", "node", "depth"};

class Debugger {
public:
    Debugger(std::istream& in, std::ostream& out) : in_(in), out_(out) {}

    /// Returns false once the user asked to quit.
    bool on_frozen(MediatorSession& m, const Delivery& d) {
        TraceEvent e = d.event();
        CurrentValues cv = m.current(kLineAttributes);
        e.cident = cv.values.cident;
        e.vident = cv.values.vident;
        e.vdom = cv.values.vdom;
        e.delta = cv.values.delta;
        e.cexternal = cv.values.cexternal;
        e.node = cv.values.node;
        e.depth = cv.values.depth;
        out_ << format_text_line(e) << std::endl;
        for (;;) {
            out_ << "codeine> " << std::flush;
            std::string line;
            if (!std::getline(in_, line)) return false;
            auto text = std::string(codeine::detail::trim(line));
            auto space = text.find(' ');
            std::string cmd = text.substr(0, space);
            std::string arg = space == std::string::npos ? "" : std::string(codeine::detail::trim(text.substr(space + 1)));
            try {
                if (cmd.empty()) continue;
                if (cmd == "step" || cmd == "s") {
                    m.step();
                    return true;
                }
                if (cmd == "skip_reductions" || cmd == "skip") {
                    m.skip_reductions();
                    return true;
                }
                if (cmd == "continue" || cmd == "c") {
                    std::vector<std::string> drop;
                    for (const char* l : {"step", "sr"}) {
                        if (m.registered(l)) drop.emplace_back(l);
                    }
                    if (!drop.empty()) m.remove(drop);
                    m.go();
                    return true;
                }
                if (cmd == "quit" || cmd == "q") return false;
                if (cmd == "add") {
                    Pattern p = parse_pattern(arg);
                    Handler h;
                    if (p.sync) {
                        h = m.toplevel;
                    } else {
                        h = [this](MediatorSession&, const Delivery& dd) {
                            out_ << "[" << dd.label << "] " << format_text_line(dd.event()) << std::endl;
                        };
                    }
                    out_ << "added " << m.register_pattern(arg, h) << std::endl;
                } else if (cmd == "remove") {
                    m.remove(codeine::detail::split_list(arg));
                } else if (cmd == "reset") {
                    m.reset();
                } else if (cmd == "current") {
                    print_current(m, codeine::detail::split_list(arg));
                } else {
                    out_ << kDebugHelp;
                }
            } catch (const Error& err) {
                out_ << "error: " << err.what() << std::endl;
            }
        }
    }

private:
    void print_current(MediatorSession& m, const std::vector<std::string>& names) {
        if (names.empty()) {
            out_ << "usage: current <attr>[,<attr>]*" << std::endl;
            return;
        }
        CurrentValues cv = m.current(names);
        for (const auto& n : names) {
            Attribute a = parse_attribute(n);
            auto v = cv.get(a);
            std::string shown = v ? to_display_string(*v) : "absent";
            if (names.size() == 1) {
                out_ << shown << std::endl;
            } else {
                out_ << n << " = " << shown << std::endl;
            }
        }
    }

    std::istream& in_;
    std::ostream& out_;
};

int cmd_debug(const Common& c) {
    Program prog = load(c.program);
    RunOptions opts = c.run_options();
    if (!opts.clock) opts.clock = deterministic_clock();
    auto [a, b] = socket_pair();
    DriverStats stats;
    std::thread driver_thread([&, fd = a] {
        Connection conn(fd);
        TracerDriver d(conn);
        stats = d.drive(prog, opts);
    });
    {
        MediatorSession session(b);
        Debugger dbg(std::cin, std::cout);
        // Quitting hangs up, which makes the frozen driver abort.
        session.toplevel = [&](MediatorSession& m, const Delivery& d) {
            if (!dbg.on_frozen(m, d)) m.close();
        };
        session.register_pattern("step: when true dosynchro call(tracer_toplevel)", session.toplevel);
        session.dispatch_loop();
    }
    driver_thread.join();
    std::cout << stats.run.events << " endExec" << (stats.run.aborted ? " (aborted)" : "") << ", " << stats.run.solutions
              << " solutions" << std::endl;
    return kExitOk;
}

// ── bridge ──────────────────────────────────────────────────────────────────

int cmd_bridge(std::uint16_t port, const std::string& target) {
    auto colon = target.rfind(':');
    if (colon == std::string::npos) throw Error("--target must be host:port");
    std::string host = target.substr(0, colon);
    auto tport = static_cast<std::uint16_t>(std::stoi(target.substr(colon + 1)));
    int lfd = listen_tcp(port);
    std::cerr << "codeine: bridge listening on 127.0.0.1:" << bound_port(lfd) << ", driver at " << target << std::endl;
    auto web = ws::accept_upgrade(accept_one(lfd));
    ::close(lfd);
    Connection driver(connect_tcp(host, tport));
    ws::BridgeStats s = ws::relay(*web, driver);
    std::cerr << "codeine: bridge closed, " << s.frames_in << " frames in, " << s.lines_out << " lines out, "
              << s.rejected << " rejected\n";
    return kExitOk;
}

// ── bench ───────────────────────────────────────────────────────────────────

int cmd_bench(const std::vector<std::string>& names, int repeat, double min_seconds, const std::string& out_path,
              bool csv_stdout) {
    bench::Options o;
    o.repeat = repeat;
    o.min_seconds = min_seconds;
    bench::Report report;
    for (const auto& name : names) {
        auto text = programs::builtin(name);
        if (!text) {
            std::cerr << "codeine: warning: unknown benchmark '" << name << "', skipped\n";
            continue;
        }
        bench::run_program(report, name, load_program(*text), o, &std::cerr);
    }
    if (csv_stdout) {
        bench::write_csv(std::cout, report);
    } else {
        bench::write_table(std::cout, report);
    }
    if (!out_path.empty()) {
        std::ofstream out(out_path);
        if (!out) throw Error("cannot write '" + out_path + "'");
        bench::write_csv(out, report);
    }
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"codeine: traced finite-domain solver with an on-the-fly tracer driver"};
    app.require_subcommand(1);

    Common common;
    auto add_common = [&](CLI::App* sub) {
        sub->add_option("program", common.program, "program file, or builtin:toy|queens(N)|propag(N)")->required();
        sub->add_option("--max-solutions", common.max_solutions, "stop after this many solutions (0 = all)");
        sub->add_option("--seed-clock", common.seed_clock, "deterministic time attribute starting at this value");
    };

    auto* run = app.add_subcommand("run", "run a program untraced and print its solutions");
    add_common(run);

    std::string out_path;
    auto* trace = app.add_subcommand("trace", "write the default trace");
    add_common(trace);
    trace->add_option("--out", out_path, "output file (default stdout)");

    std::uint16_t port = 7070;
    std::string patterns;
    bool headless = false;
    auto* serve = app.add_subcommand("serve", "run a program under the tracer driver for one analyzer");
    add_common(serve);
    serve->add_option("--port", port, "TCP port on 127.0.0.1 (0 picks one)")->capture_default_str();
    serve->add_option("--patterns", patterns, "file of patterns active from the start");
    serve->add_flag("--headless-on-disconnect", headless, "keep running untraced if the analyzer goes away");

    auto* debug = app.add_subcommand("debug", "interactive stepping toplevel");
    add_common(debug);

    std::uint16_t bridge_port = 7071;
    std::string target = "127.0.0.1:7070";
    auto* bridge = app.add_subcommand("bridge", "relay websocket text frames to a driver");
    bridge->add_option("--port", bridge_port, "websocket port on 127.0.0.1")->capture_default_str();
    bridge->add_option("--target", target, "driver endpoint host:port")->capture_default_str();

    std::vector<std::string> bench_programs = {"toy", "queens(8)", "queens(10)", "propag(70000)"};
    int repeat = 3;
    double min_seconds = 2.0;
    bool csv = false;
    std::string bench_out;
    auto* bench_cmd = app.add_subcommand("bench", "measure driver and communication overhead");
    bench_cmd->add_option("--programs", bench_programs, "builtin programs")->delimiter(',')->capture_default_str();
    bench_cmd->add_option("--repeat", repeat, "samples per measurement")->capture_default_str();
    bench_cmd->add_option("--min-seconds", min_seconds, "minimum accumulated time per sample")->capture_default_str();
    bench_cmd->add_option("--out", bench_out, "also write CSV here");
    bench_cmd->add_flag("--csv", csv, "print CSV instead of the table");

    CLI11_PARSE(app, argc, argv);

    try {
        if (*run) return cmd_run(common);
        if (*trace) return cmd_trace(common, out_path);
        if (*serve) return cmd_serve(common, port, patterns, headless);
        if (*debug) return cmd_debug(common);
        if (*bridge) return cmd_bridge(bridge_port, target);
        if (*bench_cmd) return cmd_bench(bench_programs, repeat, min_seconds, bench_out, csv);
    } catch (const NoInput& e) {
        std::cerr << "codeine: " << e.what() << '\n';
        return kExitNoInput;
    } catch (const std::exception& e) {
        std::cerr << "codeine: " << e.what() << '\n';
        return kExitError;
    }
    return kExitError;
}
