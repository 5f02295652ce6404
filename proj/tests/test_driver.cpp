#include <catch2/catch_amalgamated.hpp>

#include <sstream>
#include <thread>

#include "codeine/driver.hpp"
#include "codeine/filter.hpp"
#include "codeine/programs.hpp"
#include "harness.hpp"
#include "pattern_sets.hpp"
#include "support.hpp"

using namespace codeine;
using test_support::capture;
using test_support::chrono_labels;
using test_support::post_hoc;

namespace {

Program toy() { return load_program(programs::toy()); }

PatternBase base_of(const std::vector<std::string>& texts) {
    PatternBase b;
    std::vector<Pattern> ps;
    for (const auto& t : texts) ps.push_back(parse_pattern(t));
    b.add(std::move(ps));
    return b;
}

const TraceEvent& at_chrono(const std::vector<TraceEvent>& trace, std::int64_t c) {
    for (const auto& e : trace) {
        if (e.chrono == c) return e;
    }
    throw std::runtime_error("no such chrono");
}

/// Scripted analyzer on the far side of a socket pair.
struct Session {
    Connection* client = nullptr;
    std::string send(const std::string& cmd) {
        client->write_line(cmd);
        client->flush();
        return client->pop().value_or("<eof>");
    }
    void go() {
        client->write_line("GO");
        client->flush();
    }
};

}  // namespace

// ── Pattern base ────────────────────────────────────────────────────────────

TEST_CASE("pattern base matches the reduce event and collects its attributes", "[filter]") {
    auto trace = test_support::full_trace(programs::toy());
    auto base = base_of(test_support::kViewerPatterns);
    const auto& reduce = at_chrono(trace, 5);
    REQUIRE(reduce.port == Port::reduce);
    auto m = base.check(reduce.port, reduce);
    CHECK(m.labels == std::vector<std::string>{"visu_prop1"});
    CHECK_FALSE(m.sync);
    CHECK(m.collect == AttributeSet{Attribute::vident, Attribute::cident});
    CHECK_FALSE(m.dropped);

    const auto& sol = at_chrono(trace, 27);
    REQUIRE(sol.port == Port::solution);
    auto s = base.check(sol.port, sol);
    CHECK(s.labels == std::vector<std::string>{"visu_tree", "synchronize"});
    CHECK(s.sync);
    CHECK(s.collect == AttributeSet{Attribute::port, Attribute::node, Attribute::time});
}

TEST_CASE("pattern base port index", "[filter]") {
    auto base = base_of(test_support::kViewerPatterns);
    CHECK(base.silent_at(Port::beginExec));
    CHECK(base.silent_at(Port::entail));
    CHECK_FALSE(base.silent_at(Port::awake));
    CHECK(base.candidates(Port::failure) == std::vector<std::string>{"visu_tree", "synchronize"});
    CHECK(base.has_sync());
}

TEST_CASE("pattern base add and remove are atomic", "[filter]") {
    PatternBase b;
    b.add_text("a: when port=reduce do current(chrono). b: when port=awake do current(chrono).");
    CHECK(b.labels() == std::vector<std::string>{"a", "b"});

    SECTION("duplicate label in a batch leaves the base unchanged") {
        try {
            b.add_text("c: when port=post do current(chrono). a: when port=solution do current(chrono).");
            FAIL("expected duplicate-label");
        } catch (const ProtocolError& e) {
            CHECK(e.code() == "duplicate-label");
        }
        CHECK(b.labels() == std::vector<std::string>{"a", "b"});
    }
    SECTION("repetition inside one batch") {
        CHECK_THROWS_AS(b.add_text("c: when port=post do current(node). c: when port=post do current(node)."), ProtocolError);
        CHECK(b.size() == 2);
    }
    SECTION("parse error leaves the base unchanged") {
        CHECK_THROWS_AS(b.add_text("c: when port=post do current(node). d: when port=="), ParseError);
        CHECK(b.size() == 2);
    }
    SECTION("remove with an unknown label removes nothing") {
        try {
            b.remove({"a", "zz"});
            FAIL("expected unknown-label");
        } catch (const ProtocolError& e) {
            CHECK(e.code() == "unknown-label");
        }
        CHECK(b.size() == 2);
        b.remove({"a"});
        CHECK(b.labels() == std::vector<std::string>{"b"});
        CHECK(b.silent_at(Port::reduce));
    }
    SECTION("reset") {
        b.reset();
        CHECK(b.empty());
        CHECK(b.silent_at(Port::awake));
    }
}

TEST_CASE("pattern base reports requested attributes absent on the event", "[filter]") {
    auto trace = test_support::full_trace(programs::toy());
    auto base = base_of({"x: when port=suspend do current(chrono, vident)"});
    const auto& e = at_chrono(trace, 7);
    REQUIRE(e.port == Port::suspend);
    auto m = base.check(e.port, e);
    CHECK(m.matched());
    CHECK(m.dropped);
    CHECK(m.collect == AttributeSet{Attribute::chrono});
}

// ── Driver ──────────────────────────────────────────────────────────────────

TEST_CASE("driver sends the handshake and acknowledges ADD", "[driver]") {
    auto c = capture(toy(), test_support::kViewerPatterns);
    CHECK(c.handshake == handshake_line());
    REQUIRE(c.replies.size() == 5);
    for (const auto& r : c.replies) CHECK(r == "<ok/>");
    CHECK(c.stats.run.solutions == 1);
    CHECK_FALSE(c.stats.run.aborted);
}

TEST_CASE("driver output equals post-hoc filtering on the toy program", "[driver]") {
    for (const auto& set : {test_support::kViewerPatterns, test_support::kOverheadPatterns,
                            test_support::kCommPatterns}) {
        auto c = capture(toy(), set);
        CHECK(chrono_labels(c.events) == post_hoc(toy(), set));
    }
}

TEST_CASE("driver sends exactly the collected attributes", "[driver]") {
    auto c = capture(toy(), {"r: when port=reduce and vname='A' do current(chrono, vdom)"});
    REQUIRE(c.events.size() == 3);
    auto trace = test_support::full_trace(programs::toy());
    for (const auto& pe : c.events) {
        CHECK(pe.event.present() == AttributeSet{Attribute::port, Attribute::chrono, Attribute::vdom});
        CHECK(pe.event.vdom == at_chrono(trace, *pe.event.chrono).vdom);
        CHECK(pe.matched == std::vector<std::string>{"r"});
        CHECK_FALSE(pe.sync);
    }
    CHECK(c.events[0].event.chrono == 6);
}

TEST_CASE("driver freezes on sync events and counts GOs", "[driver]") {
    auto c = capture(load_program(programs::queens(6)), {"s: when port in [solution,failure] dosynchro call(x)"});
    auto trace = test_support::full_trace(programs::queens(6));
    std::uint64_t expected = 0;
    for (const auto& e : trace) expected += (e.port == Port::solution || e.port == Port::failure);
    CHECK(c.stats.sync_events == expected);
    CHECK(c.stats.gos == expected);
    CHECK(c.gos_sent == expected);
    for (const auto& e : c.events) CHECK(e.sync);
    CHECK(c.stats.run.solutions == 4);
}

TEST_CASE("chrono=0 never matches", "[driver]") {
    auto c = capture(load_program(programs::queens(6)), {"p3a: when chrono=0 do current(chrono)"});
    CHECK(c.events.empty());
    CHECK(c.stats.emitted == 0);
    CHECK(c.stats.run.solutions == 4);
}

TEST_CASE("driver answers commands while frozen", "[driver]") {
    auto [a, b] = socket_pair();
    DriverStats stats;
    std::thread t([&, fd = a] {
        Connection conn(fd);
        TracerDriver d(conn);
        stats = d.drive(toy(), test_support::deterministic());
    });
    {
        Connection client(b);
        Session s{&client};
        REQUIRE(client.pop() == handshake_line());

        CHECK(s.send("CURRENT chrono").find("no-event") != std::string::npos);
        CHECK(s.send("ADD f: when chrono=6 dosynchro call(tracer_toplevel)") == "<ok/>");
        CHECK(s.send("ADD f: when port=reduce do current(node)").find("duplicate-label") != std::string::npos);
        CHECK(s.send("ADD g: when port==").find("parse-error") != std::string::npos);
        CHECK(s.send("ADD g: when chrono='x' do current(node)").find("type-error") != std::string::npos);
        CHECK(s.send("FROB").find("unknown-command") != std::string::npos);
        CHECK(s.send("REMOVE").find("bad-request") != std::string::npos);
        CHECK(s.send("REMOVE nope").find("unknown-label") != std::string::npos);
        s.go();

        auto ev = parse_event(client.pop().value());
        CHECK(ev.sync);
        CHECK(ev.event.port == Port::reduce);
        CHECK(ev.matched == std::vector<std::string>{"f"});

        auto vals = parse_values(s.send("CURRENT vident, vdom, port, chrono"));
        CHECK(vals.values.vident == "v2");
        CHECK(vals.values.vdom == parse_domain("[2,5,7]"));
        CHECK(vals.get(Attribute::port) == AttributeValue{Port::reduce});
        CHECK(vals.values.chrono == 6);
        CHECK(vals.absent.empty());

        auto partial = parse_values(s.send("CURRENT named_vars,node,stage"));
        CHECK(partial.values.node == 0);
        CHECK(partial.values.stage == "init");
        CHECK(partial.values.named_vars.has_value());

        auto bad = s.send("CURRENT chrono,bogus");
        CHECK(bad.find("unknown-attribute") != std::string::npos);

        CHECK(s.send("RESET") == "<ok/>");
        s.go();
        CHECK_FALSE(client.pop().has_value());
    }
    t.join();
    CHECK(stats.gos == 1);
    CHECK(stats.run.solutions == 1);
    CHECK_FALSE(stats.disconnected);
}

TEST_CASE("absent attributes are reported by CURRENT", "[driver]") {
    auto [a, b] = socket_pair();
    std::thread t([&, fd = a] {
        Connection conn(fd);
        TracerDriver d(conn);
        d.drive(toy(), test_support::deterministic());
    });
    {
        Connection client(b);
        Session s{&client};
        client.pop();
        CHECK(s.send("ADD k: when port=suspend dosynchro call(tracer_toplevel)") == "<ok/>");
        s.go();
        auto ev = parse_event(client.pop().value());
        CHECK(ev.event.chrono == 7);
        auto v = parse_values(s.send("CURRENT vident,cident"));
        CHECK(v.values.cident == "c1");
        CHECK(v.absent == std::vector<Attribute>{Attribute::vident});
        CHECK(s.send("REMOVE k") == "<ok/>");
        s.go();
        CHECK_FALSE(client.pop().has_value());
    }
    t.join();
}

TEST_CASE("GO while the execution runs is an error reply", "[driver]") {
    auto [a, b] = socket_pair();
    DriverStats stats;
    std::thread t([&, fd = a] {
        Connection conn(fd);
        TracerDriver d(conn);
        stats = d.drive(load_program(programs::queens(8)), test_support::deterministic());
    });
    {
        Connection client(b);
        client.pop();
        client.write_line("GO");
        client.write_line("GO");
        client.flush();
        std::vector<std::string> lines;
        while (auto l = client.pop()) lines.push_back(*l);
        // The second GO is either read while running (error reply) or not
        // read at all before the run ends.
        for (const auto& l : lines) CHECK(l.find("not-frozen") != std::string::npos);
    }
    t.join();
    CHECK(stats.run.solutions == 92);
    CHECK(stats.gos == 0);
}

TEST_CASE("disconnect while frozen aborts the run", "[driver]") {
    auto [a, b] = socket_pair();
    DriverStats stats;
    std::thread t([&, fd = a] {
        Connection conn(fd);
        TracerDriver d(conn, DriverOptions{.headless_on_disconnect = true});
        stats = d.drive(load_program(programs::queens(6)), test_support::deterministic());
    });
    {
        Connection client(b);
        Session s{&client};
        client.pop();
        s.send("ADD s: when port=choicePoint dosynchro call(tracer_toplevel)");
        s.go();
        client.pop();
    }
    t.join();
    CHECK(stats.disconnected);
    CHECK(stats.run.aborted);
    CHECK_FALSE(stats.headless);
}

TEST_CASE("disconnect without sync patterns continues headless when asked", "[driver]") {
    for (bool headless : {true, false}) {
        auto [a, b] = socket_pair();
        DriverStats stats;
        std::thread t([&, fd = a] {
            Connection conn(fd);
            TracerDriver d(conn, DriverOptions{.headless_on_disconnect = headless});
            stats = d.drive(load_program(programs::queens(8)), test_support::deterministic());
        });
        {
            Connection client(b);
            Session s{&client};
            client.pop();
            s.send("ADD t: when port=solution do current(chrono)");
            s.go();
            client.shutdown_write();  // hang up right after the start GO
        }
        t.join();
        CHECK(stats.disconnected);
        CHECK(stats.headless == headless);
        CHECK(stats.run.aborted == !headless);
        if (headless) CHECK(stats.run.solutions == 92);
    }
}

TEST_CASE("default trace emission", "[driver]") {
    std::stringstream out;
    auto bytes = emit_default_trace(toy(), out, test_support::deterministic());
    CHECK(bytes == out.str().size());
    std::string line;
    int n = 0;
    while (std::getline(out, line)) {
        auto e = parse_event(line).event;
        CHECK(e.chrono == ++n);
        CHECK_FALSE(e.named_vars.has_value());
        CHECK_FALSE(e.full_dom.has_value());
    }
    CHECK(n == 28);
}

TEST_CASE("text rendering of the toy opening", "[driver]") {
    auto trace = test_support::full_trace(programs::toy());
    std::vector<std::string> lines;
    for (std::size_t i = 1; i <= 6; ++i) lines.push_back(format_text_line(trace[i]));
    CHECK(lines == std::vector<std::string>{
                       "2 newVariable v1=[0-268435455]",
                       "3 newVariable v2=[0-268435455]",
                       "4 newConstraint c1 element(v1,[2,5,7],v2)",
                       "5 reduce c1 v1=[1-3] W=[0,4-268435455]",
                       "6 reduce c1 v2=[2,5,7] W=[0-1,3-4,6,8-268435455]",
                       "7 suspend c1",
                   });
    CHECK(format_text_line(trace[7]) == "8 choicePoint node=1 depth=1");
}
