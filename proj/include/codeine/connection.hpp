#pragma once

// Newline-framed duplex byte stream over a socket descriptor.
//
// A reader thread splits incoming bytes into lines and hands them over
// through a mutex-protected queue; `has_pending()` is a single atomic load
// so the solver thread can poll it at every event. Writes are buffered and
// only reach the socket on flush().

#include <atomic>
#include <cerrno>
#include <chrono>
#include <condition_variable>
#include <cstring>
#include <deque>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <utility>

#include <arpa/inet.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <sys/types.h>
#include <unistd.h>

#include "codeine/error.hpp"

namespace codeine {

class Connection {
public:
    /// Takes ownership of `fd` (a connected stream socket).
    explicit Connection(int fd) : fd_(fd) {
        reader_ = std::thread([this] { read_loop(); });
    }

    Connection(const Connection&) = delete;
    Connection& operator=(const Connection&) = delete;

    ~Connection() {
        try {
            flush();
        } catch (...) {
        }
        ::shutdown(fd_, SHUT_RDWR);
        if (reader_.joinable()) reader_.join();
        ::close(fd_);
    }

    int fd() const noexcept { return fd_; }

    /// Lines are waiting to be popped, or the peer has closed.
    bool has_pending() const noexcept { return pending_.load(std::memory_order_acquire); }

    /// The peer closed its side (or the socket failed) and every received
    /// line has been consumed.
    bool closed() const {
        std::lock_guard lock(mu_);
        return eof_ && lines_.empty();
    }

    bool write_failed() const noexcept { return write_failed_; }

    std::optional<std::string> try_pop() {
        std::lock_guard lock(mu_);
        return pop_locked();
    }

    /// Blocks until a line arrives; nullopt once the peer has closed.
    std::optional<std::string> pop() {
        std::unique_lock lock(mu_);
        cv_.wait(lock, [&] { return !lines_.empty() || eof_; });
        return pop_locked();
    }

    /// Like pop() with a deadline; nullopt on timeout or close.
    std::optional<std::string> pop_for(std::chrono::milliseconds timeout) {
        std::unique_lock lock(mu_);
        cv_.wait_for(lock, timeout, [&] { return !lines_.empty() || eof_; });
        return pop_locked();
    }

    /// Appends `line` plus a newline to the output buffer; flushes when the
    /// buffer grows past `flush_threshold`.
    void write_line(std::string_view line) {
        out_.append(line);
        out_.push_back('\n');
        bytes_written_ += line.size() + 1;
        if (out_.size() >= flush_threshold) {
            flush();
        } else if (std::chrono::steady_clock::now() - last_flush_ >= flush_interval) {
            flush();
        }
    }

    /// Sends the buffered output. A failed write marks the connection
    /// broken and discards the buffer rather than throwing.
    void flush() {
        std::size_t off = 0;
        while (off < out_.size() && !write_failed_) {
            ssize_t n = ::send(fd_, out_.data() + off, out_.size() - off, MSG_NOSIGNAL);
            if (n < 0) {
                if (errno == EINTR) continue;
                write_failed_ = true;
                break;
            }
            off += static_cast<std::size_t>(n);
        }
        out_.clear();
        last_flush_ = std::chrono::steady_clock::now();
    }

    /// Stops sending; the peer sees end of stream.
    void shutdown_write() {
        flush();
        ::shutdown(fd_, SHUT_WR);
    }

    /// Bytes handed to write_line (including newlines).
    std::uint64_t bytes_written() const noexcept { return bytes_written_; }

    std::size_t flush_threshold = 64 * 1024;
    /// Buffered lines never wait longer than this once another line is written.
    std::chrono::milliseconds flush_interval{20};

private:
    std::optional<std::string> pop_locked() {
        if (lines_.empty()) return std::nullopt;
        std::string s = std::move(lines_.front());
        lines_.pop_front();
        pending_.store(!lines_.empty() || eof_, std::memory_order_release);
        return s;
    }

    void read_loop() {
        std::string partial;
        char buf[8192];
        for (;;) {
            ssize_t n = ::recv(fd_, buf, sizeof buf, 0);
            if (n < 0 && errno == EINTR) continue;
            if (n <= 0) break;
            std::size_t start = 0;
            for (ssize_t i = 0; i < n; ++i) {
                if (buf[i] != '\n') continue;
                partial.append(buf + start, static_cast<std::size_t>(i) - start);
                start = static_cast<std::size_t>(i) + 1;
                if (!partial.empty() && partial.back() == '\r') partial.pop_back();
                {
                    std::lock_guard lock(mu_);
                    lines_.push_back(std::move(partial));
                    pending_.store(true, std::memory_order_release);
                }
                cv_.notify_all();
                partial.clear();
            }
            partial.append(buf + start, static_cast<std::size_t>(n) - start);
        }
        {
            std::lock_guard lock(mu_);
            if (!partial.empty()) {
                lines_.push_back(std::move(partial));
                pending_.store(true, std::memory_order_release);
            }
            eof_ = true;
            pending_.store(true, std::memory_order_release);
        }
        cv_.notify_all();
    }

    int fd_;
    std::thread reader_;
    mutable std::mutex mu_;
    std::condition_variable cv_;
    std::deque<std::string> lines_;
    bool eof_ = false;
    std::atomic<bool> pending_{false};
    std::string out_;
    std::uint64_t bytes_written_ = 0;
    bool write_failed_ = false;
    std::chrono::steady_clock::time_point last_flush_ = std::chrono::steady_clock::now();
};

// ── Socket helpers ──────────────────────────────────────────────────────────

/// Connected pair of local stream sockets.
inline std::pair<int, int> socket_pair() {
    int sv[2];
    if (::socketpair(AF_UNIX, SOCK_STREAM, 0, sv) != 0) throw IoError(std::string("socketpair: ") + std::strerror(errno));
    return {sv[0], sv[1]};
}

/// Listening TCP socket on 127.0.0.1:`port` (0 picks a free port; see
/// bound_port()).
inline int listen_tcp(std::uint16_t port, const char* host = "127.0.0.1") {
    int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) throw IoError(std::string("socket: ") + std::strerror(errno));
    int one = 1;
    ::setsockopt(fd, SOL_SOCKET, SO_REUSEADDR, &one, sizeof one);
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, host, &addr.sin_addr) != 1) {
        ::close(fd);
        throw IoError(std::string("bad listen address ") + host);
    }
    if (::bind(fd, reinterpret_cast<sockaddr*>(&addr), sizeof addr) != 0 || ::listen(fd, 4) != 0) {
        std::string msg = std::strerror(errno);
        ::close(fd);
        throw IoError("cannot listen on " + std::string(host) + ":" + std::to_string(port) + ": " + msg);
    }
    return fd;
}

inline std::uint16_t bound_port(int listen_fd) {
    sockaddr_in addr{};
    socklen_t len = sizeof addr;
    if (::getsockname(listen_fd, reinterpret_cast<sockaddr*>(&addr), &len) != 0) {
        throw IoError(std::string("getsockname: ") + std::strerror(errno));
    }
    return ntohs(addr.sin_port);
}

inline int accept_one(int listen_fd) {
    for (;;) {
        int fd = ::accept(listen_fd, nullptr, nullptr);
        if (fd >= 0) {
            int one = 1;
            ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
            return fd;
        }
        if (errno != EINTR) throw IoError(std::string("accept: ") + std::strerror(errno));
    }
}

inline int connect_tcp(const std::string& host, std::uint16_t port) {
    addrinfo hints{};
    hints.ai_family = AF_UNSPEC;
    hints.ai_socktype = SOCK_STREAM;
    addrinfo* res = nullptr;
    std::string service = std::to_string(port);
    if (int rc = ::getaddrinfo(host.c_str(), service.c_str(), &hints, &res); rc != 0) {
        throw IoError("cannot resolve " + host + ": " + ::gai_strerror(rc));
    }
    int fd = -1;
    std::string last = "no address";
    for (addrinfo* ai = res; ai; ai = ai->ai_next) {
        fd = ::socket(ai->ai_family, ai->ai_socktype, ai->ai_protocol);
        if (fd < 0) continue;
        if (::connect(fd, ai->ai_addr, ai->ai_addrlen) == 0) break;
        last = std::strerror(errno);
        ::close(fd);
        fd = -1;
    }
    ::freeaddrinfo(res);
    if (fd < 0) throw IoError("cannot connect to " + host + ":" + service + ": " + last);
    int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof one);
    return fd;
}

}  // namespace codeine
