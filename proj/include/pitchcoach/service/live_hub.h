#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pitchcoach/dsp.h"
#include "pitchcoach/haptics.h"
#include "pitchcoach/service/audio.h"
#include "pitchcoach/service/data_store.h"
#include "pitchcoach/service/pipeline.h"
#include "pitchcoach/service/protocol.h"

namespace pitchcoach::service {

using ConnectionId = std::uint64_t;

/// A stream message addressed to one connection, or to every greeted
/// connection when `to` is empty.
struct Outgoing {
  std::optional<ConnectionId> to;
  StreamMessage message;
};

struct HubOptions {
  DspConfig dsp;
  ActuatorLayout layout;
  /// Returns the session creation timestamp; defaults to the wall clock.
  std::function<std::string()> clock;
  /// Device outputs shared by every trial.
  std::function<void(const HapticFrame&)> on_haptic;
  std::function<void(std::uint8_t)> on_trigger;
};

/// Protocol state for the live endpoint. Not thread-safe: the server drives it
/// from a single executor. At most one trial runs at a time; its audio comes
/// from the connection that started it and its stream is broadcast.
class LiveHub {
 public:
  LiveHub(DataStore store, HubOptions options);
  ~LiveHub();

  ConnectionId connect();
  /// Ends the trial if this connection owned it.
  std::vector<Outgoing> disconnect(ConnectionId id);

  /// One text frame; may hold several newline-separated control messages.
  std::vector<Outgoing> handle_text(ConnectionId id, std::string_view text);
  std::vector<Outgoing> handle_control(ConnectionId id, const ControlMessage& msg);
  /// s16le mono PCM at the connection's declared rate.
  std::vector<Outgoing> handle_audio(ConnectionId id, std::span<const std::uint8_t> bytes);

  bool greeted(ConnectionId id) const;
  bool trial_active() const { return trial_ != nullptr; }
  std::optional<std::string> active_session() const;

 private:
  struct Connection {
    bool greeted = false;
    int sample_rate = kSampleRateHz;
    std::unique_ptr<LinearResampler> resampler;
    std::vector<std::uint8_t> carry;  // odd trailing byte
  };
  struct Trial;

  std::vector<Outgoing> start(ConnectionId id, const StartTrial& msg);
  std::vector<Outgoing> stop(ConnectionId id);
  static Outgoing to_one(ConnectionId id, StreamMessage m) { return {id, std::move(m)}; }

  DataStore store_;
  HubOptions options_;
  std::map<ConnectionId, Connection> connections_;
  ConnectionId next_id_ = 1;
  std::unique_ptr<Trial> trial_;
  std::vector<Outgoing> pending_;  // filled by pipeline sinks
};

}  // namespace pitchcoach::service
