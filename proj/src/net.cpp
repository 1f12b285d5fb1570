#include "synergy/net.hpp"

#include "synergy/error.hpp"

#include <arpa/inet.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <sys/socket.h>
#include <unistd.h>

#include <atomic>
#include <cerrno>
#include <cstring>
#include <mutex>
#include <set>

namespace synergy::net {

namespace {

[[noreturn]] void transport_error(const std::string& what) {
    throw_error(ErrorCode::Transport, what + ": " + std::strerror(errno));
}

sockaddr_in make_addr(const std::string& host, std::uint16_t port) {
    sockaddr_in addr{};
    addr.sin_family = AF_INET;
    addr.sin_port = htons(port);
    if (::inet_pton(AF_INET, host.c_str(), &addr.sin_addr) != 1) {
        throw_error(ErrorCode::Config, "not an IPv4 address: '" + host + "'");
    }
    return addr;
}

} // namespace

Socket::~Socket() { close(); }

Socket& Socket::operator=(Socket&& other) noexcept {
    if (this != &other) {
        close();
        fd_ = other.fd_;
        other.fd_ = -1;
    }
    return *this;
}

void Socket::send_all(const char* data, std::size_t size) {
    std::size_t sent = 0;
    while (sent < size) {
        const ssize_t n = ::send(fd_, data + sent, size - sent, MSG_NOSIGNAL);
        if (n < 0) {
            if (errno == EINTR) continue;
            transport_error("send");
        }
        sent += static_cast<std::size_t>(n);
    }
}

std::size_t Socket::recv_some(char* data, std::size_t size) {
    for (;;) {
        const ssize_t n = ::recv(fd_, data, size, 0);
        if (n < 0) {
            if (errno == EINTR) continue;
            transport_error("recv");
        }
        return static_cast<std::size_t>(n);
    }
}

void Socket::shutdown_write() {
    if (fd_ >= 0) ::shutdown(fd_, SHUT_WR);
}

void Socket::shutdown_both() {
    if (fd_ >= 0) ::shutdown(fd_, SHUT_RDWR);
}

void Socket::close() {
    if (fd_ >= 0) {
        ::close(fd_);
        fd_ = -1;
    }
}

std::pair<std::string, std::uint16_t> parse_address(const std::string& address) {
    const std::size_t colon = address.rfind(':');
    if (colon == std::string::npos || colon == 0 || colon + 1 >= address.size()) {
        throw_error(ErrorCode::Config, "expected host:port, got '" + address + "'");
    }
    char* end = nullptr;
    const long port = std::strtol(address.c_str() + colon + 1, &end, 10);
    if (*end != '\0' || port < 0 || port > 65535) {
        throw_error(ErrorCode::Config, "bad port in '" + address + "'");
    }
    return {address.substr(0, colon), static_cast<std::uint16_t>(port)};
}

Socket connect_to(const std::string& host, std::uint16_t port, double timeout_s) {
    const int fd = ::socket(AF_INET, SOCK_STREAM, 0);
    if (fd < 0) transport_error("socket");
    Socket sock(fd);

    timeval tv{};
    tv.tv_sec = static_cast<time_t>(timeout_s);
    tv.tv_usec = static_cast<suseconds_t>((timeout_s - static_cast<double>(tv.tv_sec)) * 1e6);
    ::setsockopt(fd, SOL_SOCKET, SO_RCVTIMEO, &tv, sizeof(tv));
    ::setsockopt(fd, SOL_SOCKET, SO_SNDTIMEO, &tv, sizeof(tv));

    const sockaddr_in addr = make_addr(host, port);
    if (::connect(fd, reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) != 0) {
        transport_error("connect to " + host + ":" + std::to_string(port));
    }
    const int one = 1;
    ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
    return sock;
}

// Shared shutdown flag plus the set of live connection fds so stop() can
// unblock handler threads sitting in recv().
class ServerState {
public:
    std::atomic<bool> stopping{false};
    std::mutex mutex;
    std::set<int> live_fds;
};

TcpServer::TcpServer(const std::string& host, std::uint16_t port, Handler handler)
    : handler_(std::move(handler)), state_(std::make_unique<ServerState>()) {
    listen_fd_ = ::socket(AF_INET, SOCK_STREAM, 0);
    if (listen_fd_ < 0) transport_error("socket");
    const int one = 1;
    ::setsockopt(listen_fd_, SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
    sockaddr_in addr = make_addr(host, port);
    if (::bind(listen_fd_, reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) != 0) {
        const int err = errno;
        ::close(listen_fd_);
        errno = err;
        transport_error("bind " + host + ":" + std::to_string(port));
    }
    socklen_t len = sizeof(addr);
    ::getsockname(listen_fd_, reinterpret_cast<sockaddr*>(&addr), &len);
    port_ = ntohs(addr.sin_port);
    if (::listen(listen_fd_, 128) != 0) {
        const int err = errno;
        ::close(listen_fd_);
        errno = err;
        transport_error("listen");
    }
    accept_thread_ = std::thread([this] { accept_loop(); });
}

TcpServer::~TcpServer() { stop(); }

void TcpServer::accept_loop() {
    for (;;) {
        const int listen_fd = listen_fd_.load();
        if (listen_fd < 0) break;
        const int fd = ::accept(listen_fd, nullptr, nullptr);
        if (fd < 0) {
            if (errno == EINTR) continue;
            break; // listen socket closed
        }
        if (state_->stopping.load()) {
            ::close(fd);
            break;
        }
        const int one = 1;
        ::setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
        std::lock_guard<std::mutex> lock(state_->mutex);
        state_->live_fds.insert(fd);
        workers_.emplace_back([this, fd] {
            Socket sock(fd);
            try {
                handler_(sock);
            } catch (...) {
                // Connection handlers own their error reporting; a throw
                // here only ends this connection.
            }
            // Unregister before the close so the fd number cannot be reused
            // while still in the live set.
            {
                std::lock_guard<std::mutex> inner(state_->mutex);
                state_->live_fds.erase(fd);
            }
            sock.close();
        });
    }
}

void TcpServer::stop() {
    const int fd = listen_fd_.exchange(-1);
    if (fd < 0) return;
    state_->stopping.store(true);
    ::shutdown(fd, SHUT_RDWR);
    ::close(fd);
    if (accept_thread_.joinable()) accept_thread_.join();
    std::vector<std::thread> workers;
    {
        std::lock_guard<std::mutex> lock(state_->mutex);
        for (int fd : state_->live_fds) ::shutdown(fd, SHUT_RDWR);
        workers.swap(workers_);
    }
    for (auto& w : workers) {
        if (w.joinable()) w.join();
    }
}

std::string fetch_text(const std::string& host, std::uint16_t port, double timeout_s) {
    Socket sock = connect_to(host, port, timeout_s);
    std::string out;
    char buf[4096];
    for (;;) {
        const std::size_t n = sock.recv_some(buf, sizeof(buf));
        if (n == 0) break;
        out.append(buf, n);
    }
    return out;
}

} // namespace synergy::net
