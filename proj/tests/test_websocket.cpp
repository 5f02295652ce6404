#include <catch2/catch_amalgamated.hpp>

#include <thread>

#include "codeine/driver.hpp"
#include "codeine/programs.hpp"
#include "codeine/websocket.hpp"
#include "harness.hpp"

using namespace codeine;

namespace {

std::string bytes(std::initializer_list<int> v) {
    std::string s;
    for (int b : v) s.push_back(static_cast<char>(b));
    return s;
}

}  // namespace

TEST_CASE("accept key of the RFC sample nonce", "[websocket]") {
    CHECK(ws::accept_key("dGhlIHNhbXBsZSBub25jZQ==") == "s3pPLMBiTxaQ9kYGzzhZRbK+xOo=");
}

TEST_CASE("frame encoding", "[websocket]") {
    CHECK(ws::encode_frame(ws::Opcode::text, "Hello") == bytes({0x81, 0x05, 0x48, 0x65, 0x6c, 0x6c, 0x6f}));
    CHECK(ws::encode_frame(ws::Opcode::text, "Hello", std::array<unsigned char, 4>{0x37, 0xfa, 0x21, 0x3d}) ==
          bytes({0x81, 0x85, 0x37, 0xfa, 0x21, 0x3d, 0x7f, 0x9f, 0x4d, 0x51, 0x58}));
    CHECK(ws::encode_frame(ws::Opcode::text, "Hel", {}, false) == bytes({0x01, 0x03, 0x48, 0x65, 0x6c}));
    CHECK(ws::encode_frame(ws::Opcode::binary, std::string(256, 'x')).substr(0, 4) == bytes({0x82, 0x7E, 0x01, 0x00}));
    CHECK(ws::encode_frame(ws::Opcode::binary, std::string(65536, 'x')).substr(0, 10) ==
          bytes({0x82, 0x7F, 0, 0, 0, 0, 0, 1, 0, 0}));
}

TEST_CASE("frames round trip between endpoints", "[websocket]") {
    auto [a, b] = socket_pair();
    ws::Endpoint server(a, false);
    ws::Endpoint client(b, true);
    for (std::size_t n : {0u, 5u, 125u, 126u, 65535u, 65536u, 200000u}) {
        std::string payload(n, 'q');
        if (n) payload[n / 2] = 'z';
        REQUIRE(client.send_text(payload));
        auto f = server.read_message();
        REQUIRE(f);
        CHECK(f->opcode == ws::Opcode::text);
        CHECK(f->payload == payload);
    }
    // Fragmented message with an interleaved ping.
    std::array<unsigned char, 4> mask{1, 2, 3, 4};
    std::string raw = ws::encode_frame(ws::Opcode::text, "AD", mask, false) +
                      ws::encode_frame(ws::Opcode::ping, "p", mask) +
                      ws::encode_frame(ws::Opcode::continuation, "D x", mask, true);
    REQUIRE(::send(client.fd(), raw.data(), raw.size(), 0) == static_cast<ssize_t>(raw.size()));
    auto f = server.read_message();
    REQUIRE(f);
    CHECK(f->payload == "ADD x");
    auto pong = client.read_frame();
    REQUIRE(pong);
    CHECK(pong->opcode == ws::Opcode::pong);
    CHECK(pong->payload == "p");

    client.close();
    CHECK_FALSE(server.read_message().has_value());
}

TEST_CASE("upgrade handshake", "[websocket]") {
    SECTION("accepted") {
        auto [a, b] = socket_pair();
        std::unique_ptr<ws::Endpoint> server;
        std::thread t([&, fd = a] { server = ws::accept_upgrade(fd); });
        auto client = ws::client_upgrade(b, "localhost");
        t.join();
        REQUIRE(server);
        client->send_text("hi");
        CHECK(server->read_message()->payload == "hi");
    }
    SECTION("refused") {
        auto [a, b] = socket_pair();
        std::thread t([fd = b] {
            std::string req = "GET / HTTP/1.1\r\nHost: x\r\n\r\n";
            ::send(fd, req.data(), req.size(), 0);
            char buf[256] = {};
            auto n = ::recv(fd, buf, sizeof buf - 1, 0);
            CHECK(n > 0);
            CHECK(std::string(buf).rfind("HTTP/1.1 400", 0) == 0);
            ::close(fd);
        });
        CHECK_THROWS_AS(ws::accept_upgrade(a), ProtocolError);
        t.join();
    }
}

TEST_CASE("bridge relays the driver protocol", "[websocket]") {
    auto [drv_a, drv_b] = socket_pair();
    auto [web_a, web_b] = socket_pair();
    DriverStats dstats;
    ws::BridgeStats bstats;
    std::thread driver([&, fd = drv_a] {
        Connection conn(fd);
        TracerDriver d(conn);
        dstats = d.drive(load_program(programs::toy()), test_support::deterministic());
    });
    std::thread bridge([&, dfd = drv_b, wfd = web_a] {
        Connection to_driver(dfd);
        auto web = ws::accept_upgrade(wfd);
        bstats = ws::relay(*web, to_driver);
    });

    auto client = ws::client_upgrade(web_b, "localhost");
    CHECK(client->read_message()->payload == handshake_line());
    client->send_text("ADD s: when port in [solution,failure] dosynchro call(tracer_toplevel)\n");
    CHECK(client->read_message()->payload == "<ok/>");
    client->send(ws::Opcode::binary, "GO");
    CHECK(client->read_message()->payload.find("binary-frame") != std::string::npos);
    client->send_text("GO");
    std::vector<ParsedEvent> events;
    while (auto m = client->read_message()) {
        events.push_back(parse_event(m->payload));
        client->send_text("GO");
    }
    client.reset();
    bridge.join();
    driver.join();
    REQUIRE(events.size() == 2);
    CHECK(events[0].event.port == Port::failure);
    CHECK(events[1].event.port == Port::solution);
    CHECK(dstats.gos == 2);
    CHECK(bstats.rejected == 1);
    CHECK(bstats.frames_in == 4);
    CHECK(bstats.lines_out == 4);
}

TEST_CASE("closing the web side closes the driver side", "[websocket]") {
    auto [drv_a, drv_b] = socket_pair();
    auto [web_a, web_b] = socket_pair();
    DriverStats dstats;
    std::thread driver([&, fd = drv_a] {
        Connection conn(fd);
        TracerDriver d(conn);
        dstats = d.drive(load_program(programs::queens(6)), test_support::deterministic());
    });
    std::thread bridge([&, dfd = drv_b, wfd = web_a] {
        Connection to_driver(dfd);
        auto web = ws::accept_upgrade(wfd);
        ws::relay(*web, to_driver);
    });
    auto client = ws::client_upgrade(web_b, "localhost");
    client->read_message();
    client->send_text("ADD s: when port=choicePoint dosynchro call(tracer_toplevel)");
    client->read_message();
    client->send_text("GO");
    auto first = client->read_message();
    REQUIRE(first);
    client->close();
    while (client->read_message()) {
    }
    client.reset();
    bridge.join();
    driver.join();
    CHECK(dstats.disconnected);
    CHECK(dstats.run.aborted);
}
