#pragma once

#include <cstdint>
#include <deque>
#include <filesystem>
#include <memory>
#include <string>

#include "pitchcoach/service/live_hub.h"

namespace pitchcoach::service {

/// Per-connection outbound buffer. When full, the oldest queued droppable
/// message that is not in flight is discarded; other messages are kept even
/// beyond the limit.
class OutboundQueue {
 public:
  explicit OutboundQueue(std::size_t limit) : limit_(limit) {}

  /// False when `m` itself was dropped.
  bool push(const StreamMessage& m);
  bool empty() const { return items_.empty(); }
  std::size_t size() const { return items_.size(); }
  /// Marks the front entry as being written; it is never dropped.
  const std::string& begin_write();
  void finish_write();
  bool writing() const { return writing_; }
  std::size_t dropped() const { return dropped_; }

 private:
  struct Item {
    std::string text;
    bool droppable;
  };
  std::size_t limit_;
  std::deque<Item> items_;
  bool writing_ = false;
  std::size_t dropped_ = 0;
};

struct ServerOptions {
  std::string address = "127.0.0.1";
  std::uint16_t port = 8080;  ///< 0 picks a free port
  std::filesystem::path data_dir;
  HubOptions hub;
  /// Per-connection outbound limit; beyond it the oldest queued pitch_frame
  /// is dropped. Other message types are never dropped.
  std::size_t queue_limit = 256;
};

/// HTTP query endpoints plus the /live WebSocket, on one single-threaded
/// executor:
///   GET /melodies, GET /sessions, GET /sessions/{id}/log, GET /sessions/{id}/score
///   /live  text frames: newline-delimited JSON control/stream messages
///          binary frames: s16le mono PCM at the rate declared in hello
class HttpServer {
 public:
  explicit HttpServer(ServerOptions options);
  ~HttpServer();

  std::uint16_t port() const;
  /// Blocks until stop().
  void run();
  /// Safe from any thread.
  void stop();

  /// pitch_frame messages dropped under backpressure, all connections.
  std::size_t dropped_messages() const;

  struct Impl;  // shared with the connection handlers

 private:
  std::shared_ptr<Impl> impl_;
};

struct HttpResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

/// Routing for the query endpoints, independent of the transport.
HttpResponse route_get(const DataStore& store, const std::string& target);

}  // namespace pitchcoach::service
