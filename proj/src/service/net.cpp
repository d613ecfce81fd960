#include "pitchcoach/service/net.h"

#include <boost/asio.hpp>
#include <array>
#include <charconv>
#include <chrono>
#include <mutex>

#include "pitchcoach/error.h"

namespace pitchcoach::service {

namespace asio = boost::asio;
using tcp = asio::ip::tcp;

Endpoint parse_endpoint(const std::string& text) {
  Endpoint ep;
  std::string port_text = text;
  if (const auto colon = text.rfind(':'); colon != std::string::npos) {
    ep.host = text.substr(0, colon);
    port_text = text.substr(colon + 1);
  }
  if (ep.host.size() >= 2 && ep.host.front() == '[' && ep.host.back() == ']') {
    ep.host = ep.host.substr(1, ep.host.size() - 2);
  }
  if (ep.host.empty()) ep.host = "127.0.0.1";
  unsigned value = 0;
  const char* end = port_text.data() + port_text.size();
  const auto [ptr, ec] = std::from_chars(port_text.data(), end, value);
  if (port_text.empty() || ec != std::errc() || ptr != end || value > 65535) {
    throw InputError("bad address '" + text + "': expected host:port");
  }
  ep.port = static_cast<std::uint16_t>(value);
  return ep;
}

struct TcpByteSink::Impl {
  asio::io_context io;
  tcp::socket socket{io};
};

TcpByteSink::TcpByteSink(const Endpoint& endpoint) : impl_(std::make_unique<Impl>()) {
  boost::system::error_code ec;
  tcp::resolver resolver(impl_->io);
  const auto results = resolver.resolve(endpoint.host, std::to_string(endpoint.port), ec);
  if (!ec) asio::connect(impl_->socket, results, ec);
  if (ec) {
    throw InputError("cannot connect to " + endpoint.host + ":" + std::to_string(endpoint.port) + ": " + ec.message());
  }
  impl_->socket.set_option(tcp::no_delay(true));
}

TcpByteSink::~TcpByteSink() {
  boost::system::error_code ec;
  impl_->socket.shutdown(tcp::socket::shutdown_send, ec);
  impl_->socket.close(ec);
}

void TcpByteSink::write(std::span<const std::uint8_t> bytes) {
  boost::system::error_code ec;
  asio::write(impl_->socket, asio::buffer(bytes.data(), bytes.size()), ec);
  if (ec) throw Error("write failed: " + ec.message());
}

struct DeviceSimulatorServer::Impl {
  asio::io_context io;
  tcp::acceptor acceptor{io};
  std::ostream* out = nullptr;
  DeviceSimulator device;
  std::chrono::steady_clock::time_point t0 = std::chrono::steady_clock::now();
  std::mutex out_mutex;

  double now_ms() const {
    return std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - t0).count();
  }
};

namespace {

// One writer at a time: the next accept is posted only after the current
// connection ends.
struct Session : std::enable_shared_from_this<Session> {
  Session(tcp::socket s, std::function<void(std::span<const std::uint8_t>)> on_bytes, std::function<void()> on_close)
      : socket(std::move(s)), on_bytes(std::move(on_bytes)), on_close(std::move(on_close)) {}

  void read() {
    socket.async_read_some(asio::buffer(buf), [self = shared_from_this()](boost::system::error_code ec, std::size_t n) {
      if (n > 0) self->on_bytes(std::span<const std::uint8_t>(self->buf.data(), n));
      if (ec) {
        self->on_close();
        return;
      }
      self->read();
    });
  }

  tcp::socket socket;
  std::array<std::uint8_t, 4096> buf{};
  std::function<void(std::span<const std::uint8_t>)> on_bytes;
  std::function<void()> on_close;
};

}  // namespace

DeviceSimulatorServer::DeviceSimulatorServer(const Endpoint& listen, std::ostream& out)
    : impl_(std::make_unique<Impl>()) {
  impl_->out = &out;
  boost::system::error_code ec;
  const auto addr = asio::ip::make_address(listen.host == "localhost" ? "127.0.0.1" : listen.host, ec);
  if (ec) throw InputError("bad listen address: " + listen.host);
  const tcp::endpoint ep(addr, listen.port);
  impl_->acceptor.open(ep.protocol());
  impl_->acceptor.set_option(tcp::acceptor::reuse_address(true));
  impl_->acceptor.bind(ep, ec);
  if (ec) throw InputError("cannot listen on " + listen.host + ":" + std::to_string(listen.port) + ": " + ec.message());
  impl_->acceptor.listen();
}

DeviceSimulatorServer::~DeviceSimulatorServer() = default;

std::uint16_t DeviceSimulatorServer::port() const { return impl_->acceptor.local_endpoint().port(); }

void DeviceSimulatorServer::run() {
  auto accept = std::make_shared<std::function<void()>>();
  *accept = [this, accept] {
    impl_->acceptor.async_accept([this, accept](boost::system::error_code ec, tcp::socket socket) {
      if (ec) return;
      auto decoder = std::make_shared<HapticStreamDecoder>();
      auto on_bytes = [this, decoder](std::span<const std::uint8_t> bytes) {
        const std::size_t before = decoder->corrupt_frames();
        const auto decoded = decoder->push(bytes);
        for (const HapticFrame& f : decoded) {
          const double t = impl_->now_ms();
          impl_->device.apply(t, f);
          {
            std::lock_guard lock(impl_->out_mutex);
            *impl_->out << impl_->device.dump(t) << std::flush;
          }
          ++frames_;
        }
        corrupt_ += decoder->corrupt_frames() - before;
      };
      auto session = std::make_shared<Session>(std::move(socket), on_bytes, [accept] { (*accept)(); });
      session->read();
    });
  };
  (*accept)();
  auto guard = asio::make_work_guard(impl_->io);
  impl_->io.run();
  // Break the self-reference so the handler chain can be freed.
  *accept = nullptr;
}

void DeviceSimulatorServer::stop() {
  asio::post(impl_->io, [this] {
    boost::system::error_code ec;
    impl_->acceptor.close(ec);
    impl_->io.stop();
  });
}

}  // namespace pitchcoach::service
