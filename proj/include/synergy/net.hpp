#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <string>
#include <thread>
#include <vector>

namespace synergy::net {

// Thin RAII wrapper over a connected stream socket.
class Socket {
public:
    Socket() = default;
    explicit Socket(int fd) : fd_(fd) {}
    ~Socket();
    Socket(Socket&& other) noexcept : fd_(other.fd_) { other.fd_ = -1; }
    Socket& operator=(Socket&& other) noexcept;
    Socket(const Socket&) = delete;
    Socket& operator=(const Socket&) = delete;

    bool valid() const { return fd_ >= 0; }
    int fd() const { return fd_; }

    // Blocking write of the whole buffer. Throws Error{Transport}.
    void send_all(const char* data, std::size_t size);
    void send_all(const std::string& data) { send_all(data.data(), data.size()); }

    // Blocking read of up to `size` bytes; returns 0 on orderly shutdown.
    std::size_t recv_some(char* data, std::size_t size);

    void shutdown_write();
    void shutdown_both(); // unblocks a reader in another thread
    void close();

private:
    int fd_ = -1;
};

// "host:port" -> (host, port). Throws Error{Config} on a malformed address.
std::pair<std::string, std::uint16_t> parse_address(const std::string& address);

// Connects to host:port. Throws Error{Transport} on failure.
Socket connect_to(const std::string& host, std::uint16_t port, double timeout_s = 5.0);

// Accept loop on its own thread; one handler thread per connection.
class TcpServer {
public:
    using Handler = std::function<void(Socket&)>;

    TcpServer(const std::string& host, std::uint16_t port, Handler handler);
    ~TcpServer();

    std::uint16_t port() const { return port_; } // actual port (after bind to 0)
    void stop();

private:
    void accept_loop();

    std::atomic<int> listen_fd_{-1};
    std::uint16_t port_ = 0;
    Handler handler_;
    std::thread accept_thread_;
    std::vector<std::thread> workers_;
    std::unique_ptr<class ServerState> state_;
};

// Connects, reads everything until EOF, returns it. Used for the plain-text
// metrics endpoint.
std::string fetch_text(const std::string& host, std::uint16_t port, double timeout_s = 5.0);

} // namespace synergy::net
