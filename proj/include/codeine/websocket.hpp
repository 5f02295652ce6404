#pragma once

// Minimal RFC 6455 endpoint and the bridge that relays text frames to a
// driver's newline protocol, one frame per line.

#include <algorithm>
#include <array>
#include <cctype>
#include <cstdint>
#include <cstring>
#include <map>
#include <mutex>
#include <optional>
#include <random>
#include <string>
#include <string_view>
#include <thread>

#include <openssl/evp.h>
#include <openssl/sha.h>
#include <sys/socket.h>
#include <unistd.h>

#include "codeine/connection.hpp"
#include "codeine/driver.hpp"
#include "codeine/error.hpp"

namespace codeine::ws {

enum class Opcode : std::uint8_t { continuation = 0x0, text = 0x1, binary = 0x2, close = 0x8, ping = 0x9, pong = 0xA };

inline constexpr std::string_view kGuid = "258EAFA5-E914-47DA-95CA-C5AB0DC85B11";
inline constexpr std::size_t kMaxPayload = 16 * 1024 * 1024;

inline std::string base64(const unsigned char* data, std::size_t n) {
    std::string out(4 * ((n + 2) / 3), '\0');
    int len = EVP_EncodeBlock(reinterpret_cast<unsigned char*>(out.data()), data, static_cast<int>(n));
    out.resize(static_cast<std::size_t>(len));
    return out;
}

/// Sec-WebSocket-Accept for a client key.
inline std::string accept_key(std::string_view client_key) {
    std::string joined = std::string(client_key) + std::string(kGuid);
    unsigned char digest[SHA_DIGEST_LENGTH];
    SHA1(reinterpret_cast<const unsigned char*>(joined.data()), joined.size(), digest);
    return base64(digest, sizeof digest);
}

struct Frame {
    Opcode opcode = Opcode::text;
    bool fin = true;
    std::string payload;
};

/// Serializes one frame. Clients must mask; servers must not.
inline std::string encode_frame(Opcode op, std::string_view payload, std::optional<std::array<unsigned char, 4>> mask = {},
                                bool fin = true) {
    std::string out;
    out.push_back(static_cast<char>((fin ? 0x80 : 0x00) | static_cast<std::uint8_t>(op)));
    const std::uint8_t mask_bit = mask ? 0x80 : 0x00;
    std::uint64_t n = payload.size();
    if (n < 126) {
        out.push_back(static_cast<char>(mask_bit | n));
    } else if (n <= 0xFFFF) {
        out.push_back(static_cast<char>(mask_bit | 126));
        out.push_back(static_cast<char>((n >> 8) & 0xFF));
        out.push_back(static_cast<char>(n & 0xFF));
    } else {
        out.push_back(static_cast<char>(mask_bit | 127));
        for (int i = 7; i >= 0; --i) out.push_back(static_cast<char>((n >> (8 * i)) & 0xFF));
    }
    if (mask) {
        out.append(reinterpret_cast<const char*>(mask->data()), 4);
        for (std::size_t i = 0; i < payload.size(); ++i) {
            out.push_back(static_cast<char>(payload[i] ^ (*mask)[i % 4]));
        }
    } else {
        out.append(payload);
    }
    return out;
}

/// Blocking frame I/O on a socket after the opening handshake.
class Endpoint {
public:
    /// `masking` is true on the client side.
    Endpoint(int fd, bool masking, std::string leftover = {})
        : fd_(fd), masking_(masking), buf_(std::move(leftover)) {}

    Endpoint(const Endpoint&) = delete;
    Endpoint& operator=(const Endpoint&) = delete;
    ~Endpoint() { ::close(fd_); }

    int fd() const noexcept { return fd_; }

    /// Next raw frame; nullopt at end of stream. Throws ProtocolError on a
    /// malformed frame.
    std::optional<Frame> read_frame() {
        if (!fill(2)) return std::nullopt;
        auto b0 = static_cast<std::uint8_t>(buf_[0]);
        auto b1 = static_cast<std::uint8_t>(buf_[1]);
        std::size_t header = 2;
        std::uint64_t len = b1 & 0x7F;
        if (len == 126) {
            header += 2;
        } else if (len == 127) {
            header += 8;
        }
        bool masked = (b1 & 0x80) != 0;
        if (masked) header += 4;
        if (!fill(header)) return std::nullopt;
        if (len == 126) {
            len = (static_cast<std::uint64_t>(static_cast<std::uint8_t>(buf_[2])) << 8) |
                  static_cast<std::uint8_t>(buf_[3]);
        } else if (len == 127) {
            len = 0;
            for (int i = 0; i < 8; ++i) len = (len << 8) | static_cast<std::uint8_t>(buf_[2 + i]);
        }
        if (len > kMaxPayload) throw ProtocolError("frame-too-large", "frame payload exceeds the limit");
        if (!fill(header + len)) return std::nullopt;
        Frame f;
        f.fin = (b0 & 0x80) != 0;
        f.opcode = static_cast<Opcode>(b0 & 0x0F);
        f.payload.assign(buf_, header, static_cast<std::size_t>(len));
        if (masked) {
            const char* key = buf_.data() + header - 4;
            for (std::size_t i = 0; i < f.payload.size(); ++i) f.payload[i] = static_cast<char>(f.payload[i] ^ key[i % 4]);
        }
        buf_.erase(0, header + static_cast<std::size_t>(len));
        return f;
    }

    /// Next data message with fragments joined. Pings are answered and
    /// pongs dropped; a close frame is echoed and ends the stream.
    std::optional<Frame> read_message() {
        std::optional<Frame> message;
        for (;;) {
            auto f = read_frame();
            if (!f) return std::nullopt;
            switch (f->opcode) {
                case Opcode::ping:
                    send(Opcode::pong, f->payload);
                    continue;
                case Opcode::pong:
                    continue;
                case Opcode::close:
                    close(f->payload.size() >= 2 ? f->payload.substr(0, 2) : std::string{});
                    return std::nullopt;
                case Opcode::continuation:
                    if (!message) throw ProtocolError("bad-frame", "continuation without a message");
                    message->payload += f->payload;
                    break;
                case Opcode::text:
                case Opcode::binary:
                    if (message) throw ProtocolError("bad-frame", "new message inside a fragmented one");
                    message = std::move(f);
                    break;
                default:
                    throw ProtocolError("bad-frame", "unknown opcode");
            }
            if (message && (message->fin || f->fin)) {
                message->fin = true;
                return message;
            }
        }
    }

    /// Thread-safe send. Returns false once the peer is gone.
    bool send(Opcode op, std::string_view payload) {
        std::lock_guard lock(write_mu_);
        if (closed_) return false;
        std::optional<std::array<unsigned char, 4>> mask;
        if (masking_) {
            std::array<unsigned char, 4> m{};
            for (auto& c : m) c = static_cast<unsigned char>(rng_());
            mask = m;
        }
        std::string bytes = encode_frame(op, payload, mask);
        std::size_t off = 0;
        while (off < bytes.size()) {
            ssize_t n = ::send(fd_, bytes.data() + off, bytes.size() - off, MSG_NOSIGNAL);
            if (n < 0) {
                if (errno == EINTR) continue;
                closed_ = true;
                return false;
            }
            off += static_cast<std::size_t>(n);
        }
        return true;
    }

    bool send_text(std::string_view s) { return send(Opcode::text, s); }

    /// Sends a close frame once.
    void close(std::string_view status = {}) {
        {
            std::lock_guard lock(write_mu_);
            if (close_sent_) return;
            close_sent_ = true;
        }
        send(Opcode::close, status);
        ::shutdown(fd_, SHUT_WR);
    }

private:
    bool fill(std::size_t n) {
        char tmp[8192];
        while (buf_.size() < n) {
            ssize_t got = ::recv(fd_, tmp, sizeof tmp, 0);
            if (got < 0 && errno == EINTR) continue;
            if (got <= 0) return false;
            buf_.append(tmp, static_cast<std::size_t>(got));
        }
        return true;
    }

    int fd_;
    bool masking_;
    std::string buf_;
    std::mutex write_mu_;
    bool closed_ = false;
    bool close_sent_ = false;
    std::minstd_rand rng_{std::random_device{}()};
};

// ── Opening handshake ───────────────────────────────────────────────────────

namespace detail {

inline std::string lower(std::string_view s) {
    std::string out(s);
    for (auto& c : out) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
    return out;
}

/// Reads up to the blank line ending an HTTP head. Returns {head, rest}.
inline std::pair<std::string, std::string> read_http_head(int fd) {
    std::string buf;
    char tmp[4096];
    for (;;) {
        auto end = buf.find("\r\n\r\n");
        if (end != std::string::npos) return {buf.substr(0, end), buf.substr(end + 4)};
        if (buf.size() > 16 * 1024) throw ProtocolError("bad-handshake", "HTTP head too long");
        ssize_t n = ::recv(fd, tmp, sizeof tmp, 0);
        if (n < 0 && errno == EINTR) continue;
        if (n <= 0) throw IoError("connection closed during the opening handshake");
        buf.append(tmp, static_cast<std::size_t>(n));
    }
}

/// Header names lowercased; the first line is stored under "".
inline std::map<std::string, std::string> parse_http_head(std::string_view head) {
    std::map<std::string, std::string> out;
    bool first = true;
    while (!head.empty()) {
        auto eol = head.find("\r\n");
        std::string_view line = head.substr(0, eol);
        head.remove_prefix(eol == std::string_view::npos ? head.size() : eol + 2);
        if (first) {
            out[""] = std::string(line);
            first = false;
            continue;
        }
        auto colon = line.find(':');
        if (colon == std::string_view::npos) continue;
        out[lower(codeine::detail::trim(line.substr(0, colon)))] = std::string(codeine::detail::trim(line.substr(colon + 1)));
    }
    return out;
}

inline void send_all(int fd, std::string_view s) {
    std::size_t off = 0;
    while (off < s.size()) {
        ssize_t n = ::send(fd, s.data() + off, s.size() - off, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) continue;
            throw IoError(std::string("send: ") + std::strerror(errno));
        }
        off += static_cast<std::size_t>(n);
    }
}

inline bool has_token(const std::string& header, std::string_view token) {
    std::string h = lower(header);
    std::string t = lower(token);
    std::size_t pos = 0;
    while (pos <= h.size()) {
        auto comma = h.find(',', pos);
        auto item = codeine::detail::trim(std::string_view(h).substr(pos, comma == std::string::npos ? std::string::npos : comma - pos));
        if (item == t) return true;
        if (comma == std::string::npos) break;
        pos = comma + 1;
    }
    return false;
}

}  // namespace detail

/// Server side: validates the upgrade request on `fd` and answers 101.
/// Answers 400 and throws on a bad request. Takes ownership of `fd`.
inline std::unique_ptr<Endpoint> accept_upgrade(int fd) {
    try {
        auto [head, rest] = detail::read_http_head(fd);
        auto h = detail::parse_http_head(head);
        bool ok = h[""].rfind("GET ", 0) == 0 && detail::has_token(h["upgrade"], "websocket") &&
                  detail::has_token(h["connection"], "upgrade") && h["sec-websocket-version"] == "13" &&
                  !h["sec-websocket-key"].empty();
        if (!ok) {
            detail::send_all(fd, "HTTP/1.1 400 Bad Request\r\nSec-WebSocket-Version: 13\r\nContent-Length: 0\r\n\r\n");
            throw ProtocolError("bad-handshake", "not a websocket upgrade request");
        }
        detail::send_all(fd, "HTTP/1.1 101 Switching Protocols\r\nUpgrade: websocket\r\nConnection: Upgrade\r\n"
                             "Sec-WebSocket-Accept: " + accept_key(h["sec-websocket-key"]) + "\r\n\r\n");
        return std::make_unique<Endpoint>(fd, false, std::move(rest));
    } catch (...) {
        ::close(fd);
        throw;
    }
}

/// Client side of the opening handshake. Takes ownership of `fd`.
inline std::unique_ptr<Endpoint> client_upgrade(int fd, const std::string& host, const std::string& path = "/") {
    try {
        unsigned char nonce[16];
        std::random_device rd;
        for (auto& c : nonce) c = static_cast<unsigned char>(rd());
        std::string key = base64(nonce, sizeof nonce);
        detail::send_all(fd, "GET " + path + " HTTP/1.1\r\nHost: " + host +
                                 "\r\nUpgrade: websocket\r\nConnection: Upgrade\r\nSec-WebSocket-Key: " + key +
                                 "\r\nSec-WebSocket-Version: 13\r\n\r\n");
        auto [head, rest] = detail::read_http_head(fd);
        auto h = detail::parse_http_head(head);
        if (h[""].find(" 101") == std::string::npos || h["sec-websocket-accept"] != accept_key(key)) {
            throw ProtocolError("bad-handshake", "server refused the upgrade: " + h[""]);
        }
        return std::make_unique<Endpoint>(fd, true, std::move(rest));
    } catch (...) {
        ::close(fd);
        throw;
    }
}

// ── Bridge ──────────────────────────────────────────────────────────────────

struct BridgeStats {
    std::uint64_t frames_in = 0;   // text frames relayed to the driver
    std::uint64_t lines_out = 0;   // driver lines relayed as frames
    std::uint64_t rejected = 0;    // binary frames answered with an error
};

/// Relays until either side closes, then closes the other. Text frames go to
/// the driver as one line each; each driver line becomes one text frame.
inline BridgeStats relay(Endpoint& web, Connection& driver) {
    BridgeStats stats;
    std::thread upstream([&] {
        try {
            while (auto m = web.read_message()) {
                if (m->opcode == Opcode::binary) {
                    ++stats.rejected;
                    web.send_text(error_line("binary-frame", "only text frames are relayed"));
                    continue;
                }
                std::string line = m->payload;
                while (!line.empty() && (line.back() == '\n' || line.back() == '\r')) line.pop_back();
                driver.write_line(line);
                driver.flush();
                ++stats.frames_in;
            }
        } catch (const Error& e) {
            web.send_text(error_line("bad-frame", e.what()));
        }
        driver.shutdown_write();
    });
    while (auto line = driver.pop()) {
        if (!web.send_text(*line)) break;
        ++stats.lines_out;
    }
    web.close();
    ::shutdown(web.fd(), SHUT_RD);
    upstream.join();
    return stats;
}

}  // namespace codeine::ws
