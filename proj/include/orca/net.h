#pragma once

#include <chrono>
#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <utility>

#include "orca/bytes.h"

namespace orca::net {

struct HostPort {
  std::string host;
  uint16_t port = 0;
};

// "host:port"; throws Malformed.
HostPort parse_address(std::string_view address);
std::string format_address(const std::string& host, uint16_t port);

// Owning TCP stream socket.
class Socket {
 public:
  Socket() = default;
  explicit Socket(int fd) : fd_(fd) {}
  ~Socket() { close(); }
  Socket(Socket&& o) noexcept : fd_(std::exchange(o.fd_, -1)) {}
  Socket& operator=(Socket&& o) noexcept;
  Socket(const Socket&) = delete;
  Socket& operator=(const Socket&) = delete;

  int fd() const { return fd_; }
  bool valid() const { return fd_ >= 0; }
  void close();
  // Unblocks pending reads on this socket from another thread.
  void shutdown();

  // Throw IoError on failure; read_frame returns nullopt on clean EOF before
  // the first byte of a frame.
  void write_all(ByteSpan data);
  std::optional<Bytes> read_frame(uint32_t max_frame);

 private:
  bool read_exact(uint8_t* dst, size_t n);
  int fd_ = -1;
};

// Throws Unreachable.
Socket connect_tcp(const std::string& host, uint16_t port,
                   std::chrono::milliseconds timeout = std::chrono::seconds(5));

class Listener {
 public:
  Listener() = default;
  // Binds and listens; port 0 picks a free port. Throws PortInUse.
  Listener(const std::string& host, uint16_t port);

  uint16_t port() const { return port_; }
  const std::string& host() const { return host_; }
  std::string address() const { return format_address(host_, port_); }

  // Returns an invalid socket once shutdown() has been called.
  Socket accept();
  void shutdown();

 private:
  Socket sock_;
  std::string host_;
  uint16_t port_ = 0;
};

// True when nothing is bound to host:port right now.
bool port_free(const std::string& host, uint16_t port);

}  // namespace orca::net
