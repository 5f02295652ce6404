#pragma once

// Tracer driver: runs the solver with a sink that checks every event against
// the active pattern base, sends matching partial events to the analyzer and
// freezes the execution on synchronous matches until GO.
//
// Wire protocol (one line per message):
//   driver -> analyzer: `<codeine version="1"/>`, event elements, `<ok/>`,
//                       `<error code=".." msg=".."/>`, `<values ../>`
//   analyzer -> driver: ADD <patterns>, REMOVE <l>[,<l>]*, RESET,
//                       CURRENT <a>[,<a>]*, GO

#include <cstdint>
#include <ostream>
#include <string>
#include <string_view>
#include <vector>

#include "codeine/connection.hpp"
#include "codeine/filter.hpp"
#include "codeine/solver.hpp"
#include "codeine/trace_event.hpp"

namespace codeine {

inline constexpr std::string_view kProtocolVersion = "1";

inline std::string handshake_line() { return "<codeine version=\"" + std::string(kProtocolVersion) + "\"/>"; }

inline std::string error_line(std::string_view code, std::string_view msg) {
    std::string out = "<error";
    xml::append_attribute(out, "code", code);
    xml::append_attribute(out, "msg", msg);
    return out + "/>";
}

namespace detail {

inline std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

/// Comma-separated list; blank items are skipped.
inline std::vector<std::string> split_list(std::string_view s) {
    std::vector<std::string> out;
    while (!s.empty()) {
        auto comma = s.find(',');
        auto item = trim(s.substr(0, comma));
        if (!item.empty()) out.emplace_back(item);
        if (comma == std::string_view::npos) break;
        s.remove_prefix(comma + 1);
    }
    return out;
}

}  // namespace detail

// ── Default trace ───────────────────────────────────────────────────────────

/// Writes the exhaustive trace (every event, every present attribute except
/// the whole-store dumps) one element per line. Returns the bytes written.
inline std::uint64_t emit_default_trace(const Program& prog, std::ostream& out, RunOptions opts = {}) {
    std::uint64_t bytes = 0;
    std::string line;
    run(
        prog,
        [&](const EventView& v) {
            AttributeSet attrs = v.default_attributes();
            line = serialize_event(v.materialize(attrs), attrs);
            line.push_back('\n');
            out.write(line.data(), static_cast<std::streamsize>(line.size()));
            bytes += line.size();
            return out ? Flow::proceed : Flow::abort;
        },
        std::move(opts));
    if (!out) throw IoError("write failed while emitting the default trace");
    return bytes;
}

// ── Driver ──────────────────────────────────────────────────────────────────

struct DriverOptions {
    /// Keep running untraced when the analyzer disconnects while no
    /// synchronous pattern is active. Otherwise a disconnect aborts.
    bool headless_on_disconnect = false;
    /// Wait for a first GO before beginExec so the analyzer can install
    /// its patterns.
    bool start_gate = true;
};

struct DriverStats {
    RunStats run;
    std::uint64_t emitted = 0;       // event lines sent
    std::uint64_t sync_events = 0;   // of which sync
    std::uint64_t gos = 0;           // GO commands that resumed a frozen event
    std::uint64_t commands = 0;      // every command line received
    std::uint64_t dropped = 0;       // matches with requested-but-absent attributes
    std::uint64_t bytes = 0;         // bytes written, handshake included
    std::uint64_t costly = 0;        // costly attribute computations in the solver
    bool disconnected = false;
    bool headless = false;
};

class TracerDriver {
public:
    explicit TracerDriver(Connection& conn, DriverOptions opts = {}) : conn_(conn), opts_(opts) {}

    PatternBase& base() noexcept { return base_; }
    const PatternBase& base() const noexcept { return base_; }

    /// Sends the handshake line.
    void handshake() {
        conn_.write_line(handshake_line());
        conn_.flush();
    }

    /// Runs `prog` under the driver. Sends the handshake first unless
    /// `send_handshake` is false.
    DriverStats drive(const Program& prog, RunOptions opts = {}, bool send_handshake = true) {
        stats_ = DriverStats{};
        gate_open_ = !opts_.start_gate;
        std::uint64_t start_bytes = conn_.bytes_written();
        if (send_handshake) handshake();
        stats_.run = run(prog, [this](const EventView& v) { return on_event(v); }, std::move(opts));
        conn_.flush();
        stats_.bytes = conn_.bytes_written() - start_bytes;
        return stats_;
    }

private:
    enum class Outcome { handled, go, closed };

    Flow on_event(const EventView& v) {
        Flow f = filter_event(v);
        stats_.costly = v.state().costly_evaluations();
        return f;
    }

    Flow filter_event(const EventView& v) {
        if (!gate_open_) {
            gate_open_ = true;
            if (wait_for_go(nullptr) == Outcome::closed) return on_disconnect(true);
        }
        if (!headless_ && conn_.has_pending()) {
            while (auto line = conn_.try_pop()) handle(*line, nullptr);
            if (conn_.closed() && on_disconnect(false) == Flow::abort) return Flow::abort;
        }
        if (headless_ || base_.silent_at(v.port())) return Flow::proceed;
        MatchResult m = base_.check(v.port(), v);
        if (!m.matched()) return Flow::proceed;
        if (m.dropped) ++stats_.dropped;
        // chrono is always sent so the analyzer can order and cross-reference events.
        AttributeSet out = m.collect;
        out.insert(Attribute::chrono);
        conn_.write_line(serialize_event(v.materialize(out), out, m.labels, m.sync));
        ++stats_.emitted;
        if (conn_.write_failed()) return on_disconnect(false);
        if (!m.sync) return Flow::proceed;
        ++stats_.sync_events;
        conn_.flush();
        if (wait_for_go(&v) == Outcome::closed) return on_disconnect(true);
        return Flow::proceed;
    }

    Flow on_disconnect(bool frozen) {
        stats_.disconnected = true;
        if (!frozen && opts_.headless_on_disconnect && !base_.has_sync()) {
            headless_ = true;
            stats_.headless = true;
            return Flow::proceed;
        }
        return Flow::abort;
    }

    /// Frozen: serve commands until GO. `v` is the current event (null at
    /// the start gate).
    Outcome wait_for_go(const EventView* v) {
        for (;;) {
            conn_.flush();
            if (conn_.write_failed()) return Outcome::closed;
            auto line = conn_.pop();
            if (!line) return Outcome::closed;
            Outcome o = handle(*line, v, true);
            if (o == Outcome::go) {
                if (v) ++stats_.gos;
                return o;
            }
        }
    }

    void reply(const std::string& line) {
        conn_.write_line(line);
        conn_.flush();
    }

    Outcome handle(const std::string& line, const EventView* v, bool frozen = false) {
        ++stats_.commands;
        std::string_view text = detail::trim(line);
        auto space = text.find(' ');
        std::string_view cmd = text.substr(0, space);
        std::string_view arg = space == std::string_view::npos ? std::string_view{} : detail::trim(text.substr(space + 1));
        try {
            if (cmd == "GO") {
                if (!frozen) throw ProtocolError("not-frozen", "GO while the execution is running");
                return Outcome::go;
            }
            if (cmd == "ADD") {
                base_.add_text(arg);
            } else if (cmd == "REMOVE") {
                auto labels = detail::split_list(arg);
                if (labels.empty()) throw ProtocolError("bad-request", "REMOVE needs at least one label");
                base_.remove(labels);
            } else if (cmd == "RESET") {
                base_.reset();
            } else if (cmd == "CURRENT") {
                if (!frozen) throw ProtocolError("not-frozen", "CURRENT is only available while frozen");
                if (!v) throw ProtocolError("no-event", "no current event before execution starts");
                reply(current_values(*v, detail::split_list(arg)));
                return Outcome::handled;
            } else {
                throw ProtocolError("unknown-command", "unknown command '" + std::string(cmd) + "'");
            }
            reply("<ok/>");
        } catch (const ProtocolError& e) {
            reply(error_line(e.code(), e.what()));
        } catch (const TypeError& e) {
            reply(error_line("type-error", e.what()));
        } catch (const ParseError& e) {
            reply(error_line("parse-error", e.what()));
        } catch (const Error& e) {
            reply(error_line("error", e.what()));
        }
        return Outcome::handled;
    }

    static std::string current_values(const EventView& v, const std::vector<std::string>& names) {
        AttributeSet present;
        std::vector<Attribute> absent;
        for (const auto& n : names) {
            auto a = attribute_from_name(n);
            if (!a) throw ProtocolError("unknown-attribute", "unknown attribute '" + n + "'");
            if (v.has(*a)) {
                present.insert(*a);
            } else if (std::find(absent.begin(), absent.end(), *a) == absent.end()) {
                absent.push_back(*a);
            }
        }
        return serialize_values(v.materialize(present), present, absent);
    }

    Connection& conn_;
    DriverOptions opts_;
    PatternBase base_;
    DriverStats stats_;
    bool gate_open_ = false;
    bool headless_ = false;
};

}  // namespace codeine
