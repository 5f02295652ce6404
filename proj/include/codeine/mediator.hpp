#pragma once

// Analyzer-side mediator: connects to a driver, registers patterns with
// per-label handlers, dispatches incoming events and resumes frozen
// executions once every handler for a sync event has returned.

#include <cstdint>
#include <deque>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <ostream>
#include <string>
#include <vector>

#include "codeine/connection.hpp"
#include "codeine/driver.hpp"
#include "codeine/error.hpp"
#include "codeine/pattern.hpp"
#include "codeine/trace_event.hpp"

namespace codeine {

class MediatorSession;

/// What a handler receives for one matched label.
struct Delivery {
    const ParsedEvent& parsed;
    std::string label;
    /// Binding variable -> value for every bound current() item present on
    /// the event.
    std::map<std::string, AttributeValue> bindings;

    struct Call {
        std::string procedure;
        std::vector<std::optional<AttributeValue>> args;  // nullopt if unbound on this event
    };
    std::vector<Call> calls;

    const TraceEvent& event() const noexcept { return parsed.event; }
    bool sync() const noexcept { return parsed.sync; }
};

using Handler = std::function<void(MediatorSession&, const Delivery&)>;

struct MediatorStats {
    std::uint64_t events = 0;
    std::uint64_t sync_events = 0;
    std::uint64_t gos = 0;             // GOs resuming an event (not the start GO)
    std::uint64_t handler_calls = 0;
    std::uint64_t handler_errors = 0;
    std::uint64_t malformed = 0;
    std::uint64_t unhandled_labels = 0;
};

class MediatorSession {
public:
    enum class State { idle, dispatching, awaiting_go, closed };

    /// Wraps a connected socket and checks the driver handshake.
    explicit MediatorSession(int fd, std::chrono::milliseconds handshake_timeout = std::chrono::seconds(10))
        : conn_(std::make_unique<Connection>(fd)) {
        auto line = conn_->pop_for(handshake_timeout);
        if (!line) throw IoError("no handshake from the driver");
        xml::Element el;
        try {
            el = xml::parse(*line);
        } catch (const ParseError&) {
            throw ProtocolError("bad-handshake", "unexpected first line '" + *line + "'");
        }
        const auto* version = el.attribute("version");
        if (el.name != "codeine" || !version) throw ProtocolError("bad-handshake", "unexpected first line '" + *line + "'");
        if (*version != kProtocolVersion) {
            throw ProtocolError("version-mismatch",
                                "driver speaks version " + *version + ", expected " + std::string(kProtocolVersion));
        }
    }

    static std::unique_ptr<MediatorSession> connect(const std::string& host, std::uint16_t port) {
        return std::make_unique<MediatorSession>(connect_tcp(host, port));
    }

    State state() const noexcept { return state_; }
    const MediatorStats& stats() const noexcept { return stats_; }
    std::size_t registry_size() const noexcept { return registry_.size(); }
    bool registered(const std::string& label) const { return registry_.count(label) != 0; }
    /// Event lines received while waiting for a reply, not yet dispatched.
    std::size_t queued() const noexcept { return pending_.size(); }

    /// Where handler failures and skipped lines are reported; null silences.
    std::ostream* log = nullptr;

    /// Handler for the `tracer_toplevel` patterns installed by step() and
    /// skip_reductions().
    Handler toplevel;

    /// Parses `text` (one pattern) locally, then installs it on the driver.
    /// Returns the label.
    std::string register_pattern(const std::string& text, Handler handler) {
        Pattern p = parse_pattern(text);
        std::string flat = text;
        for (auto& c : flat) {
            if (c == '\n' || c == '\r') c = ' ';
        }
        expect_ok(request("ADD " + flat));
        std::string label = p.label;
        registry_[label] = Entry{std::move(p), std::move(handler)};
        return label;
    }

    void remove(const std::vector<std::string>& labels) {
        std::string cmd = "REMOVE ";
        for (std::size_t i = 0; i < labels.size(); ++i) cmd += (i ? "," : "") + labels[i];
        expect_ok(request(cmd));
        for (const auto& l : labels) registry_.erase(l);
    }

    void reset() {
        expect_ok(request("RESET"));
        registry_.clear();
    }

    /// Attribute values of the frozen event.
    CurrentValues current(const std::vector<std::string>& attrs) {
        if (state_ != State::awaiting_go) throw ProtocolError("not-frozen", "current() outside a synchronous session");
        std::string cmd = "CURRENT ";
        for (std::size_t i = 0; i < attrs.size(); ++i) cmd += (i ? "," : "") + attrs[i];
        std::string reply = request(cmd);
        throw_if_error(reply);
        return parse_values(reply);
    }

    /// Resumes the frozen execution.
    void go() {
        if (state_ != State::awaiting_go) throw ProtocolError("not-frozen", "go() outside a synchronous session");
        send_go();
        ++stats_.gos;
        state_ = State::dispatching;
    }

    /// Releases the driver's start gate. Called by dispatch_loop() if needed.
    void start() {
        if (started_) return;
        started_ = true;
        send_go();
    }

    /// Hangs up. A frozen driver aborts its execution; dispatch_loop()
    /// returns after the current event.
    void close() {
        if (state_ == State::closed) return;
        conn_->shutdown_write();
        state_ = State::closed;
    }

    /// Freeze at the very next event.
    void step() {
        reset();
        register_pattern("step: when true dosynchro call(tracer_toplevel)", toplevel);
        go();
    }

    /// Freeze at the next event that is not a reduction of the constraint
    /// awakened at the current event; acts as step() elsewhere.
    void skip_reductions() {
        auto cv = current({"cident", "port"});
        reset();
        auto port = cv.get(Attribute::port);
        auto cident = cv.values.cident;
        if (port && port->is_port() && port->as_port() == Port::awake && cident) {
            register_pattern("sr: when cident='" + *cident +
                                 "' and port in [suspend,reject,entail] do_synchro call(tracer_toplevel)",
                             toplevel);
        } else {
            register_pattern("step: when true dosynchro call(tracer_toplevel)", toplevel);
        }
        go();
    }

    /// Dispatches events until the driver closes the connection. Returns
    /// normally on disconnect.
    void dispatch_loop() {
        start();
        for (;;) {
            auto line = next_line();
            if (!line) break;
            if (is_reply(*line)) {
                note("unexpected reply '" + *line + "'");
                ++stats_.malformed;
                continue;
            }
            ParsedEvent parsed;
            try {
                parsed = parse_event(*line);
            } catch (const Error& e) {
                note(std::string("skipping malformed line: ") + e.what());
                ++stats_.malformed;
                continue;
            }
            dispatch(parsed);
            if (state_ == State::closed) break;
        }
        state_ = State::closed;
    }

private:
    struct Entry {
        Pattern pattern;
        Handler handler;
    };

    void dispatch(const ParsedEvent& parsed) {
        ++stats_.events;
        if (parsed.sync) ++stats_.sync_events;
        state_ = parsed.sync ? State::awaiting_go : State::dispatching;
        for (const auto& label : parsed.matched) {
            auto it = registry_.find(label);
            if (it == registry_.end() || !it->second.handler) {
                ++stats_.unhandled_labels;
                continue;
            }
            // Copy: a handler may reset or remove its own registration.
            Entry entry = it->second;
            Delivery d = delivery(parsed, label, entry.pattern);
            ++stats_.handler_calls;
            try {
                entry.handler(*this, d);
            } catch (const std::exception& e) {
                ++stats_.handler_errors;
                note("handler for '" + label + "' failed: " + e.what());
            } catch (...) {
                ++stats_.handler_errors;
                note("handler for '" + label + "' failed");
            }
            if (state_ == State::closed) return;
        }
        if (state_ == State::closed) return;
        if (parsed.sync && state_ == State::awaiting_go) go();
        state_ = State::idle;
    }

    static Delivery delivery(const ParsedEvent& parsed, const std::string& label, const Pattern& p) {
        Delivery d{parsed, label, {}, {}};
        for (const auto& a : p.actions) {
            if (a.kind != Action::Kind::current) continue;
            for (const auto& item : a.items) {
                if (!item.binding) continue;
                if (auto v = parsed.event.get(item.attr)) d.bindings[*item.binding] = *v;
            }
        }
        for (const auto& a : p.actions) {
            if (a.kind != Action::Kind::call) continue;
            Delivery::Call c{a.procedure, {}};
            for (const auto& arg : a.args) {
                auto it = d.bindings.find(arg);
                c.args.push_back(it == d.bindings.end() ? std::nullopt : std::optional<AttributeValue>(it->second));
            }
            d.calls.push_back(std::move(c));
        }
        return d;
    }

    static bool is_reply(const std::string& line) {
        return line.rfind("<ok", 0) == 0 || line.rfind("<error", 0) == 0 || line.rfind("<values", 0) == 0;
    }

    static void throw_if_error(const std::string& reply) {
        if (reply.rfind("<error", 0) != 0) return;
        xml::Element el = xml::parse(reply);
        const auto* code = el.attribute("code");
        const auto* msg = el.attribute("msg");
        throw ProtocolError(code ? *code : "error", msg ? *msg : reply);
    }

    static void expect_ok(const std::string& reply) {
        throw_if_error(reply);
        if (reply != "<ok/>") throw ProtocolError("bad-reply", "expected <ok/>, got '" + reply + "'");
    }

    std::optional<std::string> next_line() {
        if (!pending_.empty()) {
            std::string s = std::move(pending_.front());
            pending_.pop_front();
            return s;
        }
        return conn_->pop();
    }

    /// Sends a command and waits for its reply; event lines that arrive in
    /// between are queued for dispatch.
    std::string request(const std::string& cmd) {
        if (state_ == State::closed) throw IoError("connection closed");
        conn_->write_line(cmd);
        conn_->flush();
        if (conn_->write_failed()) throw IoError("connection to the driver lost");
        for (;;) {
            auto line = conn_->pop();
            if (!line) {
                state_ = State::closed;
                throw IoError("connection to the driver lost");
            }
            if (is_reply(*line)) return *line;
            pending_.push_back(std::move(*line));
        }
    }

    void send_go() {
        conn_->write_line("GO");
        conn_->flush();
    }

    void note(const std::string& msg) {
        if (log) *log << "codeine: " << msg << '\n';
    }

    std::unique_ptr<Connection> conn_;
    std::map<std::string, Entry> registry_;
    std::deque<std::string> pending_;
    MediatorStats stats_;
    State state_ = State::idle;
    bool started_ = false;
};

}  // namespace codeine
