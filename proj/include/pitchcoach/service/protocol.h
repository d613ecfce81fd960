#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <variant>

#include "json.hpp"
#include "pitchcoach/dsp.h"
#include "pitchcoach/feedback.h"
#include "pitchcoach/scoring.h"

namespace pitchcoach::service {

// Control messages, UI -> server, one JSON object per line/frame.

/// Must be the first message on a connection. `sample_rate` declares the
/// rate of binary PCM frames the client will send (default 10000).
struct Hello {
  int sample_rate = kSampleRateHz;
  std::string client;
};

struct StartTrial {
  std::string melody_id;
  FeedbackMode mode = FeedbackMode::synchronous;
};

struct StopTrial {};

using ControlMessage = std::variant<Hello, StartTrial, StopTrial>;

/// Throws InputError on malformed JSON, unknown type or missing fields.
ControlMessage parse_control(std::string_view line);
std::string serialize_control(const ControlMessage& msg);

// Stream messages, server -> UI.

enum class StreamType { pitch_frame, feedback_event, score_report, trial_state, error };

std::string_view to_string(StreamType type);

struct StreamMessage {
  StreamType type = StreamType::error;
  std::optional<double> t_ms;  ///< trial time; absent for connection-level messages
  nlohmann::json payload;

  /// Only intermediate pitch frames may be dropped under backpressure.
  bool droppable() const { return type == StreamType::pitch_frame; }
  /// {"type": ..., "t_ms": ..., "payload": {...}} without a trailing newline.
  std::string to_line() const;
  static StreamMessage from_line(std::string_view line);
};

StreamMessage pitch_frame_message(const PitchFrame& frame);
StreamMessage feedback_event_message(const FeedbackEvent& event);
StreamMessage score_report_message(double t_ms, const std::string& session_id, const ScoreReport& score);
StreamMessage trial_state_message(const TrialState& state, std::optional<double> t_ms = std::nullopt,
                                  const std::string& session_id = {}, std::optional<FeedbackMode> mode = {});
StreamMessage error_message(const std::string& what);

}  // namespace pitchcoach::service
