#include "pitchcoach/feedback.h"

#include <algorithm>

#include "pitchcoach/error.h"

namespace pitchcoach {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

}  // namespace

std::string_view to_string(FeedbackMode mode) {
  return mode == FeedbackMode::synchronous ? "sync" : "terminal";
}

std::string_view to_string(Channel channel) {
  switch (channel) {
    case Channel::auditory: return "auditory";
    case Channel::visual: return "visual";
    case Channel::haptic: return "haptic";
    case Channel::trigger: return "trigger";
  }
  return "?";
}

std::string_view to_string(TrialPhase phase) {
  switch (phase) {
    case TrialPhase::idle: return "idle";
    case TrialPhase::phonating: return "phonating";
    case TrialPhase::finalizing: return "finalizing";
    case TrialPhase::done: return "done";
  }
  return "?";
}

FeedbackMode parse_mode(std::string_view text) {
  if (text == "sync" || text == "synchronous") return FeedbackMode::synchronous;
  if (text == "terminal" || text == "delayed") return FeedbackMode::terminal;
  throw InputError("unknown feedback mode '" + std::string(text) + "' (expected sync|terminal)");
}

Channel parse_channel(std::string_view text) {
  for (Channel c : {Channel::auditory, Channel::visual, Channel::haptic, Channel::trigger}) {
    if (to_string(c) == text) return c;
  }
  throw InputError("unknown feedback channel '" + std::string(text) + "'");
}

TrialPhase parse_phase(std::string_view text) {
  for (TrialPhase p : {TrialPhase::idle, TrialPhase::phonating, TrialPhase::finalizing, TrialPhase::done}) {
    if (to_string(p) == text) return p;
  }
  throw InputError("unknown trial phase '" + std::string(text) + "'");
}

Channel FeedbackEvent::channel() const {
  return std::visit(overloaded{[](const AuditoryCue&) { return Channel::auditory; },
                               [](const VisualPitch&) { return Channel::visual; },
                               [](const VisualScore&) { return Channel::visual; },
                               [](const HapticFrame&) { return Channel::haptic; },
                               [](const TriggerMarker&) { return Channel::trigger; }},
                    payload);
}

FeedbackController::FeedbackController(MelodyTrack melody, FeedbackMode mode, ActuatorLayout layout)
    : melody_(std::move(melody)), mode_(mode), layout_(layout) {
  validate_melody(melody_);
  layout_.validate();
}

std::vector<FeedbackEvent> FeedbackController::start_trial(double t_ms) {
  if (state_.phase != TrialPhase::idle) {
    throw StateError("start_trial: trial is " + std::string(to_string(state_.phase)) + ", not idle");
  }
  state_.phase = TrialPhase::phonating;
  state_.segment_start_ms = t_ms;
  std::vector<FeedbackEvent> events;
  events.push_back({t_ms, mode_, TriggerMarker{kTriggerTrialStart}});
  if (mode_ == FeedbackMode::synchronous) {
    events.push_back({t_ms, mode_, AuditoryCue{std::string(kCueTargetMelody)}});
  }
  return events;
}

std::vector<FeedbackEvent> FeedbackController::on_pitch_frame(const PitchFrame& frame) {
  if (state_.phase != TrialPhase::phonating) {
    throw StateError("on_pitch_frame: trial is " + std::string(to_string(state_.phase)) + ", not phonating");
  }
  if (frame.t_ms < *state_.segment_start_ms) throw OrderingError("pitch frame precedes segment start");
  if (last_frame_ms_ && frame.t_ms < *last_frame_ms_) throw OrderingError("pitch frame out of time order");
  last_frame_ms_ = frame.t_ms;

  std::vector<FeedbackEvent> events;
  if (mode_ == FeedbackMode::terminal) return events;

  const double melody_t = frame.t_ms - *state_.segment_start_ms;
  VisualPitch visual;
  visual.sung.t_ms = frame.t_ms;
  visual.target.t_ms = frame.t_ms;
  std::optional<int> actuator;
  if (frame.voiced()) {
    const double midi = hz_to_midi(*frame.f0_hz);
    visual.sung.midi = midi;
    actuator = map_pitch_to_actuator(midi, layout_);
  }
  if (auto idx = melody_.note_at(melody_t)) visual.target.midi = melody_.notes[*idx].pitch_midi;
  events.push_back({frame.t_ms, mode_, visual});

  if (actuator) {
    const bool changed = actuator != last_actuator_;
    const bool refresh_due = !last_haptic_ms_ || frame.t_ms - *last_haptic_ms_ >= kHapticRefreshMs;
    if (changed || refresh_due) {
      HapticFrame h;
      h.t_ms = frame.t_ms;
      h.actuator = *actuator;
      h.intensity = quantize_intensity(0.5 + 0.5 * frame.confidence);
      h.duration_ms = kLiveHapticDurationMs;
      events.push_back({frame.t_ms, mode_, h});
      last_haptic_ms_ = frame.t_ms;
    }
  }
  last_actuator_ = actuator;
  return events;
}

std::vector<FeedbackEvent> FeedbackController::end_segment(double t_ms, const ScoreReport& score) {
  if (state_.phase != TrialPhase::phonating) {
    throw StateError("end_segment: trial is " + std::string(to_string(state_.phase)) + ", not phonating");
  }
  if (t_ms < *state_.segment_start_ms || (last_frame_ms_ && t_ms < *last_frame_ms_)) {
    throw OrderingError("end_segment: segment end precedes recorded frames");
  }
  state_.phase = TrialPhase::finalizing;
  state_.segment_end_ms = t_ms;

  std::vector<FeedbackEvent> events;
  events.push_back({t_ms, mode_, TriggerMarker{kTriggerSegmentEnd}});
  if (mode_ == FeedbackMode::terminal) {
    events.push_back({t_ms, mode_, AuditoryCue{std::string(kCueConfirmation)}});
    events.push_back({t_ms, mode_, VisualScore{score}});
    for (const HapticFrame& h : terminal_summary_pattern(score, layout_, t_ms)) {
      events.push_back({h.t_ms, mode_, h});
    }
  } else {
    events.push_back({t_ms, mode_, VisualScore{score}});
  }
  state_.phase = TrialPhase::done;
  return events;
}

std::vector<FeedbackEvent> align(std::vector<FeedbackEvent> events) {
  std::stable_sort(events.begin(), events.end(),
                   [](const FeedbackEvent& a, const FeedbackEvent& b) { return a.t_ms < b.t_ms; });
  return events;
}

void to_json(nlohmann::json& j, const FeedbackEvent& e) {
  j = {{"t_ms", e.t_ms}, {"channel", to_string(e.channel())}, {"mode", to_string(e.mode)}};
  std::visit(overloaded{[&](const AuditoryCue& a) { j["cue"] = a.cue_id; },
                        [&](const VisualPitch& v) {
                          j["sung"] = v.sung;
                          j["target"] = v.target;
                        },
                        [&](const VisualScore& s) { j["score"] = s.score; },
                        [&](const HapticFrame& h) { j["haptic"] = h; },
                        [&](const TriggerMarker& t) { j["code"] = t.code; }},
             e.payload);
}

void from_json(const nlohmann::json& j, FeedbackEvent& e) {
  j.at("t_ms").get_to(e.t_ms);
  e.mode = parse_mode(j.at("mode").get<std::string>());
  switch (parse_channel(j.at("channel").get<std::string>())) {
    case Channel::auditory:
      e.payload = AuditoryCue{j.at("cue").get<std::string>()};
      break;
    case Channel::visual:
      if (j.contains("score")) {
        e.payload = VisualScore{j.at("score").get<ScoreReport>()};
      } else {
        e.payload = VisualPitch{j.at("sung").get<PitchPoint>(), j.at("target").get<PitchPoint>()};
      }
      break;
    case Channel::haptic:
      e.payload = j.at("haptic").get<HapticFrame>();
      break;
    case Channel::trigger: {
      const int code = j.at("code").get<int>();
      if (code < 1 || code > 255) throw InputError("trigger code must be in 1..255");
      e.payload = TriggerMarker{static_cast<std::uint8_t>(code)};
      break;
    }
  }
}

void to_json(nlohmann::json& j, const TrialState& s) {
  auto opt = [](const std::optional<double>& v) { return v ? nlohmann::json(*v) : nlohmann::json(nullptr); };
  j = {{"phase", to_string(s.phase)},
       {"segment_start_ms", opt(s.segment_start_ms)},
       {"segment_end_ms", opt(s.segment_end_ms)}};
}

}  // namespace pitchcoach
