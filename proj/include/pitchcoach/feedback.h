#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"
#include "pitchcoach/dsp.h"
#include "pitchcoach/haptics.h"
#include "pitchcoach/melody.h"
#include "pitchcoach/scoring.h"

namespace pitchcoach {

/// Synchronous feedback runs during phonation; terminal (a.k.a. delayed)
/// feedback is withheld until the segment ends.
enum class FeedbackMode { synchronous, terminal };
enum class Channel { auditory, visual, haptic, trigger };
enum class TrialPhase { idle, phonating, finalizing, done };

std::string_view to_string(FeedbackMode mode);
std::string_view to_string(Channel channel);
std::string_view to_string(TrialPhase phase);
/// Accepts "sync", "synchronous", "terminal" and "delayed".
FeedbackMode parse_mode(std::string_view text);
Channel parse_channel(std::string_view text);
TrialPhase parse_phase(std::string_view text);

inline constexpr std::uint8_t kTriggerTrialStart = 0x01;
inline constexpr std::uint8_t kTriggerSegmentEnd = 0x02;
inline constexpr double kHapticRefreshMs = 250.0;
inline constexpr int kLiveHapticDurationMs = 250;

inline constexpr std::string_view kCueTargetMelody = "target_melody";
inline constexpr std::string_view kCueConfirmation = "confirmation";

struct AuditoryCue {
  std::string cue_id;
  bool operator==(const AuditoryCue&) const = default;
};

/// Sung and target pitch at one frame time.
struct VisualPitch {
  PitchPoint sung;
  PitchPoint target;
  bool operator==(const VisualPitch&) const = default;
};

struct VisualScore {
  ScoreReport score;
  bool operator==(const VisualScore&) const = default;
};

struct TriggerMarker {
  std::uint8_t code = 0;
  bool operator==(const TriggerMarker&) const = default;
};

using FeedbackPayload = std::variant<AuditoryCue, VisualPitch, VisualScore, HapticFrame, TriggerMarker>;

struct FeedbackEvent {
  double t_ms = 0.0;
  FeedbackMode mode = FeedbackMode::synchronous;
  FeedbackPayload payload;

  Channel channel() const;
  bool operator==(const FeedbackEvent&) const = default;
};

struct TrialState {
  TrialPhase phase = TrialPhase::idle;
  std::optional<double> segment_start_ms;
  std::optional<double> segment_end_ms;
  bool operator==(const TrialState&) const = default;
};

/// One trial: idle -> phonating -> finalizing -> done. Not thread safe; the
/// owner feeds frames in time order.
class FeedbackController {
 public:
  FeedbackController(MelodyTrack melody, FeedbackMode mode, ActuatorLayout layout = {});

  /// Trigger 0x01, plus the target-melody cue in synchronous mode.
  std::vector<FeedbackEvent> start_trial(double t_ms = 0.0);

  /// Synchronous mode: one visual event per frame and a haptic event when the
  /// actuator changes or the refresh interval has elapsed. Terminal mode: none.
  std::vector<FeedbackEvent> on_pitch_frame(const PitchFrame& frame);

  /// Trigger 0x02 and the score; terminal mode adds the confirmation cue and
  /// the haptic summary.
  std::vector<FeedbackEvent> end_segment(double t_ms, const ScoreReport& score);

  const TrialState& state() const { return state_; }
  FeedbackMode mode() const { return mode_; }
  const MelodyTrack& melody() const { return melody_; }
  const ActuatorLayout& layout() const { return layout_; }

 private:
  MelodyTrack melody_;
  FeedbackMode mode_;
  ActuatorLayout layout_;
  TrialState state_;
  std::optional<double> last_frame_ms_;
  std::optional<int> last_actuator_;
  std::optional<double> last_haptic_ms_;
};

/// Stable sort by t_ms.
std::vector<FeedbackEvent> align(std::vector<FeedbackEvent> events);

void to_json(nlohmann::json& j, const FeedbackEvent& e);
void from_json(const nlohmann::json& j, FeedbackEvent& e);
void to_json(nlohmann::json& j, const TrialState& s);

}  // namespace pitchcoach
