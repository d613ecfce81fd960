#include "pitchcoach/service/protocol.h"

#include "pitchcoach/error.h"

namespace pitchcoach::service {

ControlMessage parse_control(std::string_view line) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(line);
  } catch (const nlohmann::json::parse_error& e) {
    throw InputError(std::string("control: malformed JSON: ") + e.what());
  }
  if (!j.is_object() || !j.contains("type") || !j["type"].is_string()) {
    throw InputError("control: message must be an object with a string 'type'");
  }
  const std::string type = j["type"].get<std::string>();
  try {
    if (type == "hello") {
      Hello h;
      h.sample_rate = j.value("sample_rate", kSampleRateHz);
      h.client = j.value("client", std::string{});
      if (h.sample_rate <= 0) throw InputError("control: hello.sample_rate must be positive");
      return h;
    }
    if (type == "start_trial") {
      StartTrial s;
      j.at("melody_id").get_to(s.melody_id);
      s.mode = parse_mode(j.at("mode").get<std::string>());
      return s;
    }
    if (type == "stop_trial") return StopTrial{};
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("control: ") + type + ": " + e.what());
  }
  throw InputError("control: unknown message type '" + type + "'");
}

std::string serialize_control(const ControlMessage& msg) {
  nlohmann::json j;
  if (const auto* h = std::get_if<Hello>(&msg)) {
    j = {{"type", "hello"}, {"sample_rate", h->sample_rate}, {"client", h->client}};
  } else if (const auto* s = std::get_if<StartTrial>(&msg)) {
    j = {{"type", "start_trial"}, {"melody_id", s->melody_id}, {"mode", to_string(s->mode)}};
  } else {
    j = {{"type", "stop_trial"}};
  }
  return j.dump();
}

std::string_view to_string(StreamType type) {
  switch (type) {
    case StreamType::pitch_frame: return "pitch_frame";
    case StreamType::feedback_event: return "feedback_event";
    case StreamType::score_report: return "score_report";
    case StreamType::trial_state: return "trial_state";
    case StreamType::error: return "error";
  }
  return "error";
}

std::string StreamMessage::to_line() const {
  nlohmann::json j = {{"type", to_string(type)}, {"payload", payload}};
  j["t_ms"] = t_ms ? nlohmann::json(*t_ms) : nlohmann::json(nullptr);
  return j.dump();
}

StreamMessage StreamMessage::from_line(std::string_view line) {
  const auto j = nlohmann::json::parse(line);
  StreamMessage m;
  const std::string type = j.at("type").get<std::string>();
  bool known = false;
  for (StreamType t : {StreamType::pitch_frame, StreamType::feedback_event, StreamType::score_report,
                       StreamType::trial_state, StreamType::error}) {
    if (to_string(t) == type) {
      m.type = t;
      known = true;
    }
  }
  if (!known) throw InputError("stream: unknown message type '" + type + "'");
  if (j.contains("t_ms") && !j["t_ms"].is_null()) m.t_ms = j["t_ms"].get<double>();
  m.payload = j.value("payload", nlohmann::json::object());
  return m;
}

StreamMessage pitch_frame_message(const PitchFrame& frame) {
  nlohmann::json p = frame;
  p["midi"] = frame.f0_hz ? nlohmann::json(hz_to_midi(*frame.f0_hz)) : nlohmann::json(nullptr);
  return {StreamType::pitch_frame, frame.t_ms, std::move(p)};
}

StreamMessage feedback_event_message(const FeedbackEvent& event) {
  return {StreamType::feedback_event, event.t_ms, nlohmann::json(event)};
}

StreamMessage score_report_message(double t_ms, const std::string& session_id, const ScoreReport& score) {
  return {StreamType::score_report, t_ms, {{"session_id", session_id}, {"score", score}}};
}

StreamMessage trial_state_message(const TrialState& state, std::optional<double> t_ms, const std::string& session_id,
                                  std::optional<FeedbackMode> mode) {
  nlohmann::json p = state;
  if (!session_id.empty()) p["session_id"] = session_id;
  if (mode) p["mode"] = to_string(*mode);
  return {StreamType::trial_state, t_ms, std::move(p)};
}

StreamMessage error_message(const std::string& what) { return {StreamType::error, std::nullopt, {{"message", what}}}; }

}  // namespace pitchcoach::service
