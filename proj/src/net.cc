#include "orca/net.h"

#include <arpa/inet.h>
#include <fcntl.h>
#include <netdb.h>
#include <netinet/in.h>
#include <netinet/tcp.h>
#include <poll.h>
#include <sys/socket.h>
#include <unistd.h>

#include <cerrno>
#include <cstring>

#include "orca/error.h"

namespace orca::net {

namespace {

std::string
errno_text()
{
  return std::strerror(errno);
}

sockaddr_in
resolve(const std::string& host, uint16_t port)
{
  sockaddr_in addr{};
  addr.sin_family = AF_INET;
  addr.sin_port = htons(port);
  const std::string h = (host.empty() || host == "localhost") ? "127.0.0.1" : host;
  if (inet_pton(AF_INET, h.c_str(), &addr.sin_addr) == 1) {
    return addr;
  }
  addrinfo hints{};
  hints.ai_family = AF_INET;
  hints.ai_socktype = SOCK_STREAM;
  addrinfo* res = nullptr;
  if (getaddrinfo(h.c_str(), nullptr, &hints, &res) != 0 || res == nullptr) {
    throw Error(ErrorCode::Unreachable, "cannot resolve host " + host);
  }
  addr.sin_addr = reinterpret_cast<sockaddr_in*>(res->ai_addr)->sin_addr;
  freeaddrinfo(res);
  return addr;
}

}  // namespace

HostPort
parse_address(std::string_view address)
{
  const size_t colon = address.rfind(':');
  if (colon == std::string_view::npos || colon + 1 == address.size()) {
    throw Error(ErrorCode::Malformed, "address must be host:port, got '" + std::string(address) + "'");
  }
  HostPort hp;
  hp.host = std::string(address.substr(0, colon));
  const std::string port(address.substr(colon + 1));
  char* end = nullptr;
  const long p = std::strtol(port.c_str(), &end, 10);
  if (*end != '\0' || p < 0 || p > 65535) {
    throw Error(ErrorCode::Malformed, "bad port in '" + std::string(address) + "'");
  }
  hp.port = static_cast<uint16_t>(p);
  return hp;
}

std::string
format_address(const std::string& host, uint16_t port)
{
  return host + ":" + std::to_string(port);
}

Socket&
Socket::operator=(Socket&& o) noexcept
{
  if (this != &o) {
    close();
    fd_ = std::exchange(o.fd_, -1);
  }
  return *this;
}

void
Socket::close()
{
  if (fd_ >= 0) {
    ::close(fd_);
    fd_ = -1;
  }
}

void
Socket::shutdown()
{
  if (fd_ >= 0) {
    ::shutdown(fd_, SHUT_RDWR);
  }
}

void
Socket::write_all(ByteSpan data)
{
  size_t off = 0;
  while (off < data.size()) {
    const ssize_t n = ::send(fd_, data.data() + off, data.size() - off, MSG_NOSIGNAL);
    if (n < 0) {
      if (errno == EINTR) {
        continue;
      }
      throw Error(ErrorCode::IoError, "send: " + errno_text());
    }
    off += static_cast<size_t>(n);
  }
}

bool
Socket::read_exact(uint8_t* dst, size_t n)
{
  size_t off = 0;
  while (off < n) {
    const ssize_t r = ::recv(fd_, dst + off, n - off, 0);
    if (r == 0) {
      if (off == 0) {
        return false;
      }
      throw Error(ErrorCode::IoError, "connection closed mid-frame");
    }
    if (r < 0) {
      if (errno == EINTR) {
        continue;
      }
      throw Error(ErrorCode::IoError, "recv: " + errno_text());
    }
    off += static_cast<size_t>(r);
  }
  return true;
}

std::optional<Bytes>
Socket::read_frame(uint32_t max_frame)
{
  uint8_t len_bytes[4];
  if (!read_exact(len_bytes, 4)) {
    return std::nullopt;
  }
  const uint32_t len = static_cast<uint32_t>(len_bytes[0]) |
                       (static_cast<uint32_t>(len_bytes[1]) << 8) |
                       (static_cast<uint32_t>(len_bytes[2]) << 16) |
                       (static_cast<uint32_t>(len_bytes[3]) << 24);
  if (len < 4 || len > max_frame) {
    throw Error(ErrorCode::Malformed, "frame length " + std::to_string(len));
  }
  Bytes frame(len);
  std::memcpy(frame.data(), len_bytes, 4);
  if (len > 4 && !read_exact(frame.data() + 4, len - 4)) {
    throw Error(ErrorCode::IoError, "connection closed mid-frame");
  }
  return frame;
}

Socket
connect_tcp(const std::string& host, uint16_t port, std::chrono::milliseconds timeout)
{
  const sockaddr_in addr = resolve(host, port);
  Socket s(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
  if (!s.valid()) {
    throw Error(ErrorCode::Unreachable, "socket: " + errno_text());
  }
  const int flags = fcntl(s.fd(), F_GETFL, 0);
  fcntl(s.fd(), F_SETFL, flags | O_NONBLOCK);
  int rc = ::connect(s.fd(), reinterpret_cast<const sockaddr*>(&addr), sizeof(addr));
  if (rc < 0 && errno != EINPROGRESS) {
    throw Error(ErrorCode::Unreachable, format_address(host, port) + ": " + errno_text());
  }
  if (rc < 0) {
    pollfd p{s.fd(), POLLOUT, 0};
    rc = ::poll(&p, 1, static_cast<int>(timeout.count()));
    if (rc <= 0) {
      throw Error(ErrorCode::Unreachable, format_address(host, port) + ": connect timed out");
    }
    int err = 0;
    socklen_t len = sizeof(err);
    getsockopt(s.fd(), SOL_SOCKET, SO_ERROR, &err, &len);
    if (err != 0) {
      throw Error(ErrorCode::Unreachable, format_address(host, port) + ": " + std::strerror(err));
    }
  }
  fcntl(s.fd(), F_SETFL, flags);
  int one = 1;
  setsockopt(s.fd(), IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
  return s;
}

Listener::Listener(const std::string& host, uint16_t port) : host_(host)
{
  sock_ = Socket(::socket(AF_INET, SOCK_STREAM | SOCK_CLOEXEC, 0));
  if (!sock_.valid()) {
    throw Error(ErrorCode::IoError, "socket: " + errno_text());
  }
  int one = 1;
  setsockopt(sock_.fd(), SOL_SOCKET, SO_REUSEADDR, &one, sizeof(one));
  const sockaddr_in addr = resolve(host, port);
  if (::bind(sock_.fd(), reinterpret_cast<const sockaddr*>(&addr), sizeof(addr)) < 0) {
    throw Error(ErrorCode::PortInUse, format_address(host, port) + ": " + errno_text());
  }
  if (::listen(sock_.fd(), 512) < 0) {
    throw Error(ErrorCode::IoError, "listen: " + errno_text());
  }
  sockaddr_in bound{};
  socklen_t len = sizeof(bound);
  getsockname(sock_.fd(), reinterpret_cast<sockaddr*>(&bound), &len);
  port_ = ntohs(bound.sin_port);
}

Socket
Listener::accept()
{
  for (;;) {
    const int fd = ::accept4(sock_.fd(), nullptr, nullptr, SOCK_CLOEXEC);
    if (fd >= 0) {
      int one = 1;
      setsockopt(fd, IPPROTO_TCP, TCP_NODELAY, &one, sizeof(one));
      return Socket(fd);
    }
    if (errno == EINTR || errno == ECONNABORTED) {
      continue;
    }
    return Socket();
  }
}

void
Listener::shutdown()
{
  sock_.shutdown();
}

bool
port_free(const std::string& host, uint16_t port)
{
  try {
    Listener l(host, port);
    return true;
  }
  catch (const Error&) {
    return false;
  }
}

}  // namespace orca::net
