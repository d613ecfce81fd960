#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

namespace pitchcoach {

/// One target note. The window is half-open: [onset_ms, onset_ms + duration_ms).
struct Note {
  double onset_ms = 0.0;
  double duration_ms = 0.0;
  double pitch_midi = 0.0;

  double offset_ms() const { return onset_ms + duration_ms; }
  bool contains(double t_ms) const { return t_ms >= onset_ms && t_ms < offset_ms(); }
  bool operator==(const Note&) const = default;
};

struct MelodyTrack {
  std::string id;
  std::string description;
  std::vector<Note> notes;

  /// Offset of the last note, i.e. the end of the target curve.
  double span_ms() const { return notes.empty() ? 0.0 : notes.back().offset_ms(); }
  /// Note index whose window contains `t_ms`, if any.
  std::optional<std::size_t> note_at(double t_ms) const;
  bool operator==(const MelodyTrack&) const = default;
};

/// A sample of a pitch curve. An absent `midi` is a rest.
struct PitchPoint {
  double t_ms = 0.0;
  std::optional<double> midi;
  bool operator==(const PitchPoint&) const = default;
};

inline constexpr double kMaxMelodySpanMs = 120000.0;

double hz_to_midi(double f_hz);
double midi_to_hz(double midi);
/// Signed interval from f_b up to f_a in cents.
double cents_between(double f_a, double f_b);

/// Throws ValidationError naming the offending note.
void validate_melody(const MelodyTrack& melody);

/// Parses and validates the JSON melody file format.
MelodyTrack load_melody(std::string_view text);
MelodyTrack load_melody_file(const std::string& path);

/// Piecewise-constant target sampled at t = k * hop_ms for k = 0..floor(span / hop_ms).
std::vector<PitchPoint> target_curve(const MelodyTrack& melody, double hop_ms);

void to_json(nlohmann::json& j, const Note& n);
void from_json(const nlohmann::json& j, Note& n);
void to_json(nlohmann::json& j, const MelodyTrack& m);
void from_json(const nlohmann::json& j, MelodyTrack& m);
void to_json(nlohmann::json& j, const PitchPoint& p);
void from_json(const nlohmann::json& j, PitchPoint& p);

}  // namespace pitchcoach
