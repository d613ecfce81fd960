#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "pitchcoach/dsp.h"
#include "pitchcoach/feedback.h"
#include "pitchcoach/session.h"

namespace pitchcoach::service {

/// Observers of a running trial. Every callback fires after the record has
/// been written to the session log.
struct TrialSinks {
  std::function<void(const SessionRecord&)> on_record;
  std::function<void(const HapticFrame&)> on_haptic;
  std::function<void(std::uint8_t)> on_trigger;
  std::function<void(const TrialState&, double t_ms)> on_state;
};

/// ingest (10 kHz samples) -> pitch tracking -> smoothing -> feedback ->
/// {session log, sinks}. One instance per trial, driven by one thread.
class TrialPipeline {
 public:
  TrialPipeline(SessionHeader header, const std::filesystem::path& log_path, TrialSinks sinks = {});

  /// Trial time starts at 0.
  void start();
  void push_samples(std::span<const double> samples);
  /// Flushes the tracker, scores the trial, emits the end-of-segment events.
  ScoreReport stop();

  const SessionHeader& header() const { return header_; }
  const TrialState& state() const { return controller_.state(); }
  const std::filesystem::path& log_path() const { return writer_.path(); }

 private:
  void handle_frames(const std::vector<PitchFrame>& raw);
  void handle_smoothed(const PitchFrame& frame);
  void emit(const SessionRecord& record);
  void emit_events(const std::vector<FeedbackEvent>& events);

  SessionHeader header_;
  SessionWriter writer_;
  TrialSinks sinks_;
  FeedbackController controller_;
  PitchTracker tracker_;
  StreamingSmoother smoother_;
  std::vector<PitchFrame> frames_;
};

struct RunOptions {
  std::filesystem::path melody_path;
  FeedbackMode mode = FeedbackMode::synchronous;
  std::string input;  ///< WAV path, or "-" for standard input
  int raw_input_rate = kSampleRateHz;  ///< for headerless PCM on standard input
  std::optional<std::string> haptic_addr;
  std::optional<std::string> trigger_addr;
  std::filesystem::path out_dir;
  DspConfig dsp;
  ActuatorLayout layout;
  std::string created_utc;  ///< empty: current time
  std::string session_id;   ///< empty: derived from inputs
};

struct RunResult {
  std::string session_id;
  std::filesystem::path log_path;
  ScoreReport score;
};

/// Offline trial over a recording; segment spans the whole input.
RunResult run_offline(const RunOptions& options, std::istream& stdin_stream);

/// Deterministic id from trial inputs (FNV-1a over config, audio and timestamp).
std::string derive_session_id(const SessionConfig& config, std::span<const double> samples,
                              const std::string& created_utc);

/// ISO-8601 UTC with millisecond precision, e.g. 2026-10-16T09:30:00.123Z.
std::string utc_now_iso8601();

}  // namespace pitchcoach::service
