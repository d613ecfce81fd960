#pragma once

#include <atomic>
#include <cstdint>
#include <functional>
#include <memory>
#include <ostream>
#include <span>
#include <string>

#include "pitchcoach/haptics.h"

namespace pitchcoach::service {

struct Endpoint {
  std::string host;
  std::uint16_t port = 0;
};

/// "host:port", ":port" or "port". Throws InputError.
Endpoint parse_endpoint(const std::string& text);

/// Blocking TCP writer for haptic frames and trigger bytes.
class TcpByteSink {
 public:
  explicit TcpByteSink(const Endpoint& endpoint);
  ~TcpByteSink();
  TcpByteSink(const TcpByteSink&) = delete;
  TcpByteSink& operator=(const TcpByteSink&) = delete;

  void write(std::span<const std::uint8_t> bytes);

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// TCP listener that decodes the haptic byte stream into a DeviceSimulator and
/// prints the actuator dump after every accepted frame. Serves one writer at a
/// time; time is milliseconds since the listener started.
class DeviceSimulatorServer {
 public:
  DeviceSimulatorServer(const Endpoint& listen, std::ostream& out);
  ~DeviceSimulatorServer();

  std::uint16_t port() const;
  /// Blocks until stop() is called.
  void run();
  void stop();

  /// Frames decoded so far; safe from any thread.
  std::size_t frames() const { return frames_.load(); }
  std::size_t corrupt_frames() const { return corrupt_.load(); }

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
  std::atomic<std::size_t> frames_{0};
  std::atomic<std::size_t> corrupt_{0};
};

}  // namespace pitchcoach::service
