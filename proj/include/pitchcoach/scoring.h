#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <utility>
#include <vector>

#include "json.hpp"
#include "pitchcoach/dsp.h"
#include "pitchcoach/melody.h"

namespace pitchcoach {

struct ScoringConfig {
  double min_voiced_fraction = 0.3;
  double onset_lead_ms = 150.0;
  double flat_band_cents = 50.0;
};

/// How one target note was sung.
struct NotePerformance {
  std::size_t note_index = 0;
  double target_midi = 0.0;
  std::optional<double> sung_midi;  ///< present iff voiced_fraction >= min_voiced_fraction
  std::optional<double> sung_onset_ms;
  double voiced_fraction = 0.0;
  bool operator==(const NotePerformance&) const = default;
};

/// Per-trial metrics. Zero deviations with scored_note_count == 0, or zero
/// rhythm error with onset_count == 0, mean "nothing to measure".
struct ScoreReport {
  double pitch_deviation_cents = 0.0;
  double pitch_deviation_transposed_cents = 0.0;
  double contour_accuracy = 1.0;
  double rhythm_error_ms = 0.0;
  std::vector<NotePerformance> notes;
  std::size_t scored_note_count = 0;
  std::size_t onset_count = 0;
  bool operator==(const ScoreReport&) const = default;
};

std::vector<NotePerformance> segment_notes(std::span<const PitchFrame> frames, const MelodyTrack& melody,
                                           const ScoringConfig& cfg = {});

/// (raw, transposed) mean absolute cents error over scored notes. The
/// transposed variant removes the median offset first.
std::pair<double, double> pitch_deviation(std::span<const NotePerformance> notes);

/// Fraction of consecutive scored-note pairs whose sung direction (up, down,
/// flat within +-flat_band_cents) matches the target direction.
double contour_accuracy(std::span<const NotePerformance> notes, double flat_band_cents = 50.0);

/// Mean |sung onset - target onset| over notes with a detected onset.
double rhythm_precision(std::span<const NotePerformance> notes, const MelodyTrack& melody);

ScoreReport score_trial(std::span<const PitchFrame> frames, const MelodyTrack& melody,
                        const ScoringConfig& cfg = {});

void to_json(nlohmann::json& j, const NotePerformance& n);
void from_json(const nlohmann::json& j, NotePerformance& n);
void to_json(nlohmann::json& j, const ScoreReport& r);
void from_json(const nlohmann::json& j, ScoreReport& r);

}  // namespace pitchcoach
