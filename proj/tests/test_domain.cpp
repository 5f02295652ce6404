#include <catch_amalgamated.hpp>

#include <random>
#include <set>

#include "codeine/domain.hpp"
#include "codeine/trace_event.hpp"
#include "codeine/xml.hpp"

using namespace codeine;

// Reference set built by plain enumeration, used as an oracle for the
// range arithmetic on small universes.
static std::set<std::int64_t> members(const FiniteDomain& d) {
    std::set<std::int64_t> out;
    for (const auto& r : d.ranges()) {
        for (auto v = r.lo; v <= r.hi; ++v) out.insert(v);
    }
    return out;
}

TEST_CASE("parse_domain and format_domain", "[domain]") {
    SECTION("domain with singleton and long ranges") {
        auto d = parse_domain("[0-1,3-4,6,8-268435455]");
        REQUIRE(d.ranges() == std::vector<Range>{{0, 1}, {3, 4}, {6, 6}, {8, 268435455}});
        CHECK(format_domain(d) == "[0-1,3-4,6,8-268435455]");
    }
    SECTION("empty") {
        CHECK(parse_domain("[]").empty());
        CHECK(format_domain(FiniteDomain{}) == "[]");
    }
    SECTION("reversed bounds are rejected with a position") {
        try {
            parse_domain("[5-3]");
            FAIL("expected ParseError");
        } catch (const ParseError& e) {
            CHECK(e.position() >= 1);
        }
    }
    SECTION("value lists collapse to ranges") {
        CHECK(format_domain(parse_domain("[1,2,3]")) == "[1-3]");
        CHECK(format_domain(FiniteDomain{{0, 0}, {4, 268435455}}) == "[0,4-268435455]");
    }
    SECTION("malformed inputs") {
        for (const char* bad : {"", "[", "1-3", "[1-]", "[a]", "[1,,2]", "[1-3"}) {
            CHECK_THROWS_AS(parse_domain(bad), ParseError);
        }
    }
    SECTION("format/parse round trip on random domains") {
        std::mt19937 rng(7);
        for (int i = 0; i < 200; ++i) {
            std::vector<Range> rs;
            int n = static_cast<int>(rng() % 5);
            for (int k = 0; k < n; ++k) {
                std::int64_t lo = static_cast<std::int64_t>(rng() % 40) - 10;
                rs.push_back({lo, lo + static_cast<std::int64_t>(rng() % 4)});
            }
            FiniteDomain d(rs);
            CHECK(parse_domain(format_domain(d)) == d);
        }
    }
}

TEST_CASE("domain operations", "[domain]") {
    SECTION("contains") {
        auto d = FiniteDomain::of_values({2, 5, 7});
        CHECK(d.contains(5));
        CHECK_FALSE(d.contains(4));
        CHECK(d.size() == 3);
    }
    SECTION("size of the default domain") {
        CHECK(FiniteDomain::interval(0, kDefaultMaxValue).size() == 268435456);
    }
    SECTION("two removals leave [1-3]") {
        auto full = FiniteDomain::interval(0, kDefaultMaxValue);
        auto [a, w1] = full.remove_range(0, 0);
        auto [b, w2] = a.remove_range(4, kDefaultMaxValue);
        CHECK(b == FiniteDomain::interval(1, 3));
        CHECK(w1 == FiniteDomain::singleton(0));
        CHECK(w2 == FiniteDomain::interval(4, kDefaultMaxValue));
        CHECK(full.difference(b) == FiniteDomain{{0, 0}, {4, kDefaultMaxValue}});
    }
    SECTION("min/max of empty domain throw") {
        CHECK_THROWS_AS(FiniteDomain{}.min(), Error);
        CHECK_THROWS_AS(FiniteDomain{}.max(), Error);
    }
    SECTION("remove_range conserves values (set oracle)") {
        std::mt19937 rng(11);
        for (int i = 0; i < 300; ++i) {
            std::vector<Range> rs;
            for (int k = 0; k < 4; ++k) {
                std::int64_t lo = static_cast<std::int64_t>(rng() % 30);
                rs.push_back({lo, lo + static_cast<std::int64_t>(rng() % 5)});
            }
            FiniteDomain d(rs);
            std::int64_t lo = static_cast<std::int64_t>(rng() % 35) - 2;
            std::int64_t hi = lo + static_cast<std::int64_t>(rng() % 10);
            auto [kept, gone] = d.remove_range(lo, hi);
            CHECK(kept.size() + gone.size() == d.size());
            CHECK(kept.intersect(gone).empty());
            std::set<std::int64_t> expect_kept;
            std::set<std::int64_t> expect_gone;
            for (auto v : members(d)) (v >= lo && v <= hi ? expect_gone : expect_kept).insert(v);
            CHECK(members(kept) == expect_kept);
            CHECK(members(gone) == expect_gone);
        }
    }
    SECTION("intersect and difference agree with sets") {
        std::mt19937 rng(3);
        for (int i = 0; i < 200; ++i) {
            auto random_domain = [&] {
                std::vector<std::int64_t> vals;
                for (int k = 0; k < 8; ++k) vals.push_back(static_cast<std::int64_t>(rng() % 20));
                return FiniteDomain::of_values(vals);
            };
            auto a = random_domain();
            auto b = random_domain();
            std::set<std::int64_t> inter;
            std::set<std::int64_t> diff;
            auto mb = members(b);
            for (auto v : members(a)) (mb.count(v) ? inter : diff).insert(v);
            CHECK(members(a.intersect(b)) == inter);
            CHECK(members(a.difference(b)) == diff);
        }
    }
}

// ── XML ─────────────────────────────────────────────────────────────────────

TEST_CASE("xml reader and writer", "[xml]") {
    SECTION("attributes are escaped and newlines never appear raw") {
        std::string out;
        xml::append_attribute(out, "a", "x<y & \"q\"\nz");
        CHECK(out.find('\n') == std::string::npos);
        auto el = xml::parse("<e" + out + "/>");
        REQUIRE(el.attribute("a") != nullptr);
        CHECK(*el.attribute("a") == "x<y & \"q\"\nz");
    }
    SECTION("nested children") {
        auto el = xml::parse(R"(<reduce chrono="5"><delta vident="v1"><range from="0" to="0"/></delta></reduce>)");
        CHECK(el.name == "reduce");
        REQUIRE(el.children.size() == 1);
        CHECK(el.children[0].name == "delta");
        CHECK(el.children[0].children[0].name == "range");
    }
    SECTION("malformed documents") {
        for (const char* bad : {"", "<", "<a", "<a>", "<a></b>", "<a x=1/>", "<a/><b/>", "text"}) {
            CHECK_THROWS_AS(xml::parse(bad), ParseError);
        }
    }
}

// ── Trace events ────────────────────────────────────────────────────────────

namespace {

TraceEvent sample_reduce() {
    TraceEvent e;
    e.port = Port::reduce;
    e.chrono = 7;
    e.depth = 2;
    e.node = 4;
    e.time = 1045;
    e.stage = "labeling";
    e.vident = "v13";
    e.vname = "X";
    e.cident = "c12";
    e.cname = "bound";
    e.cexternal = "leq(v19,v13)";
    e.cinternal = "x_leq_y(v19,v13)";
    e.vdom = FiniteDomain::interval(5, 9);
    e.delta = FiniteDomain::interval(0, 4);
    e.update = "min";
    e.named_vars = std::vector<std::string>{"v13"};
    e.full_dom = std::vector<VarDomain>{{"v13", FiniteDomain::interval(5, 9)}};
    return e;
}

}  // namespace

TEST_CASE("serialize_event", "[trace]") {
    auto e = sample_reduce();
    SECTION("time and vident only") {
        auto line = serialize_event(e, {Attribute::time, Attribute::vident}, {"visu_prop1"});
        CHECK(line == R"(<reduce time="1045" vident="v13" matched="visu_prop1"/>)");
    }
    SECTION("delta and update become children") {
        AttributeSet s{Attribute::chrono, Attribute::time,      Attribute::cident, Attribute::vident,
                       Attribute::cexternal, Attribute::delta, Attribute::update};
        auto line = serialize_event(e, s);
        CHECK(line ==
              R"x(<reduce chrono="7" time="1045" cident="c12" vident="v13" cexternal="leq(v19,v13)">)x"
              R"(<delta vident="v13"><range from="0" to="4"/></delta><update vident="v13" type="min"/></reduce>)");
    }
    SECTION("minimal sync event") {
        TraceEvent b;
        b.port = Port::beginExec;
        b.chrono = 1;
        CHECK(serialize_event(b, {Attribute::chrono}, {"step"}, true) ==
              R"(<beginExec chrono="1" matched="step" sync="true"/>)");
    }
    SECTION("requesting an absent attribute is an error") {
        TraceEvent s;
        s.port = Port::solution;
        s.chrono = 3;
        CHECK_THROWS_AS(serialize_event(s, {Attribute::vident}), Error);
    }
    SECTION("output is one physical line") {
        e.cexternal = "weird\nname";
        auto line = serialize_event(e, AttributeSet::all());
        CHECK(line.find('\n') == std::string::npos);
        CHECK(parse_event(line).event.cexternal == "weird\nname");
    }
}

TEST_CASE("parse_event", "[trace]") {
    SECTION("partial reduce line") {
        auto p = parse_event(R"(<reduce time="1045" vident="v13" matched="visu_prop1"/>)");
        CHECK(p.event.port == Port::reduce);
        CHECK(p.event.time == 1045);
        CHECK(p.event.vident == "v13");
        CHECK(p.event.present() == AttributeSet{Attribute::port, Attribute::time, Attribute::vident});
        CHECK(p.matched == std::vector<std::string>{"visu_prop1"});
        CHECK_FALSE(p.sync);
    }
    SECTION("unknown element") { CHECK_THROWS_AS(parse_event("<bogus/>"), ParseError); }
    SECTION("malformed") { CHECK_THROWS_AS(parse_event("<reduce chrono=\"x\"/>"), ParseError); }
    SECTION("round trip reproduces the projection") {
        auto e = sample_reduce();
        std::mt19937 rng(5);
        for (int i = 0; i < 200; ++i) {
            AttributeSet s;
            for (std::size_t a = 0; a < kAttributeCount; ++a) {
                if (rng() % 2) s.insert(static_cast<Attribute>(a));
            }
            std::vector<std::string> labels;
            if (rng() % 2) labels = {"a", "b_2"};
            bool sync = rng() % 2 == 0;
            auto p = parse_event(serialize_event(e, s, labels, sync));
            CHECK(p.event == e.project(s));
            CHECK(p.matched == labels);
            CHECK(p.sync == sync);
        }
    }
}

TEST_CASE("excerpt property", "[trace]") {
    auto e = sample_reduce();
    std::mt19937 rng(9);
    for (int i = 0; i < 200; ++i) {
        AttributeSet big;
        AttributeSet small;
        for (std::size_t a = 0; a < kAttributeCount; ++a) {
            if (rng() % 3) {
                big.insert(static_cast<Attribute>(a));
                if (rng() % 2) small.insert(static_cast<Attribute>(a));
            }
        }
        auto ps = parse_event(serialize_event(e, small)).event;
        auto pb = parse_event(serialize_event(e, big)).event;
        CHECK(ps.present().is_subset_of(pb.present()));
        ps.present().for_each([&](Attribute a) { CHECK(ps.get(a) == pb.get(a)); });
    }
}

TEST_CASE("values replies", "[trace]") {
    auto e = sample_reduce();
    auto text = serialize_values(e, {Attribute::port, Attribute::vident, Attribute::vdom}, {Attribute::cname});
    auto v = parse_values(text);
    CHECK(v.has_port);
    CHECK(v.get(Attribute::port) == AttributeValue(Port::reduce));
    CHECK(v.get(Attribute::vdom) == AttributeValue(FiniteDomain::interval(5, 9)));
    CHECK(v.absent == std::vector<Attribute>{Attribute::cname});
    CHECK_FALSE(parse_values("<values/>").get(Attribute::port).has_value());
}
