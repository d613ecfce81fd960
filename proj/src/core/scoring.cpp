#include "pitchcoach/scoring.h"

#include <algorithm>
#include <cmath>
#include <limits>

namespace pitchcoach {

namespace {

double median_of(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const std::size_t n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

int direction(double cents, double flat_band) {
  if (std::abs(cents) <= flat_band) return 0;
  return cents > 0.0 ? 1 : -1;
}

nlohmann::json optional_json(const std::optional<double>& v) {
  return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
}

std::optional<double> optional_from(const nlohmann::json& j) {
  return j.is_null() ? std::nullopt : std::optional<double>(j.get<double>());
}

/// End time of the voiced run that started before `from` and is still voiced
/// at `from`, if that run ends before `before`; -infinity otherwise.
double carried_tail_end(std::span<const PitchFrame> frames, double from, double before) {
  std::size_t k = 0;
  while (k < frames.size() && frames[k].t_ms < from) ++k;
  if (k == 0 || k == frames.size() || !frames[k - 1].voiced() || !frames[k].voiced()) {
    return -std::numeric_limits<double>::infinity();
  }
  while (k + 1 < frames.size() && frames[k + 1].voiced()) ++k;
  return frames[k].t_ms < before ? frames[k].t_ms : -std::numeric_limits<double>::infinity();
}

}  // namespace

std::vector<NotePerformance> segment_notes(std::span<const PitchFrame> frames, const MelodyTrack& melody,
                                           const ScoringConfig& cfg) {
  std::vector<NotePerformance> out;
  out.reserve(melody.notes.size());
  for (std::size_t i = 0; i < melody.notes.size(); ++i) {
    const Note& note = melody.notes[i];
    NotePerformance perf;
    perf.note_index = i;
    perf.target_midi = note.pitch_midi;

    // The early onset search never reaches into the previous note's window.
    double search_from = note.onset_ms - cfg.onset_lead_ms;
    if (i > 0) search_from = std::max(search_from, melody.notes[i - 1].offset_ms());

    // A voiced run already under way at search_from that dies out before the
    // target onset is the previous note's decay, not this note's onset.
    const double tail_end = carried_tail_end(frames, search_from, note.onset_ms);

    std::size_t in_window = 0;
    std::vector<double> voiced_midi;
    for (const PitchFrame& f : frames) {
      if (f.t_ms >= note.offset_ms()) break;
      if (f.voiced() && !perf.sung_onset_ms && f.t_ms >= search_from && f.t_ms > tail_end) perf.sung_onset_ms = f.t_ms;
      if (!note.contains(f.t_ms)) continue;
      ++in_window;
      if (f.voiced()) voiced_midi.push_back(hz_to_midi(*f.f0_hz));
    }
    if (in_window > 0) {
      perf.voiced_fraction = static_cast<double>(voiced_midi.size()) / static_cast<double>(in_window);
    }
    if (!voiced_midi.empty() && perf.voiced_fraction >= cfg.min_voiced_fraction) {
      perf.sung_midi = median_of(std::move(voiced_midi));
    }
    out.push_back(perf);
  }
  return out;
}

std::pair<double, double> pitch_deviation(std::span<const NotePerformance> notes) {
  std::vector<double> errors;
  for (const NotePerformance& n : notes) {
    if (n.sung_midi) errors.push_back(100.0 * (*n.sung_midi - n.target_midi));
  }
  if (errors.empty()) return {0.0, 0.0};
  const double offset = median_of(errors);
  double raw = 0.0;
  double transposed = 0.0;
  for (double e : errors) {
    raw += std::abs(e);
    transposed += std::abs(e - offset);
  }
  const auto n = static_cast<double>(errors.size());
  return {raw / n, transposed / n};
}

double contour_accuracy(std::span<const NotePerformance> notes, double flat_band_cents) {
  const NotePerformance* prev = nullptr;
  std::size_t pairs = 0;
  std::size_t matches = 0;
  for (const NotePerformance& n : notes) {
    if (!n.sung_midi) continue;
    if (prev) {
      const int want = direction(100.0 * (n.target_midi - prev->target_midi), flat_band_cents);
      const int got = direction(100.0 * (*n.sung_midi - *prev->sung_midi), flat_band_cents);
      ++pairs;
      if (want == got) ++matches;
    }
    prev = &n;
  }
  return pairs == 0 ? 1.0 : static_cast<double>(matches) / static_cast<double>(pairs);
}

double rhythm_precision(std::span<const NotePerformance> notes, const MelodyTrack& melody) {
  double total = 0.0;
  std::size_t count = 0;
  for (const NotePerformance& n : notes) {
    if (!n.sung_onset_ms || n.note_index >= melody.notes.size()) continue;
    total += std::abs(*n.sung_onset_ms - melody.notes[n.note_index].onset_ms);
    ++count;
  }
  return count == 0 ? 0.0 : total / static_cast<double>(count);
}

ScoreReport score_trial(std::span<const PitchFrame> frames, const MelodyTrack& melody, const ScoringConfig& cfg) {
  ScoreReport r;
  r.notes = segment_notes(frames, melody, cfg);
  std::tie(r.pitch_deviation_cents, r.pitch_deviation_transposed_cents) = pitch_deviation(r.notes);
  r.contour_accuracy = contour_accuracy(r.notes, cfg.flat_band_cents);
  r.rhythm_error_ms = rhythm_precision(r.notes, melody);
  r.scored_note_count = static_cast<std::size_t>(
      std::count_if(r.notes.begin(), r.notes.end(), [](const NotePerformance& n) { return n.sung_midi.has_value(); }));
  r.onset_count = static_cast<std::size_t>(std::count_if(
      r.notes.begin(), r.notes.end(), [](const NotePerformance& n) { return n.sung_onset_ms.has_value(); }));
  return r;
}

void to_json(nlohmann::json& j, const NotePerformance& n) {
  j = {{"note_index", n.note_index},
       {"target_midi", n.target_midi},
       {"sung_midi", optional_json(n.sung_midi)},
       {"sung_onset_ms", optional_json(n.sung_onset_ms)},
       {"voiced_fraction", n.voiced_fraction}};
}

void from_json(const nlohmann::json& j, NotePerformance& n) {
  j.at("note_index").get_to(n.note_index);
  j.at("target_midi").get_to(n.target_midi);
  n.sung_midi = optional_from(j.at("sung_midi"));
  n.sung_onset_ms = optional_from(j.at("sung_onset_ms"));
  j.at("voiced_fraction").get_to(n.voiced_fraction);
}

void to_json(nlohmann::json& j, const ScoreReport& r) {
  j = {{"pitch_deviation_cents", r.pitch_deviation_cents},
       {"pitch_deviation_transposed_cents", r.pitch_deviation_transposed_cents},
       {"contour_accuracy", r.contour_accuracy},
       {"rhythm_error_ms", r.rhythm_error_ms},
       {"scored_note_count", r.scored_note_count},
       {"onset_count", r.onset_count},
       {"notes", r.notes}};
}

void from_json(const nlohmann::json& j, ScoreReport& r) {
  j.at("pitch_deviation_cents").get_to(r.pitch_deviation_cents);
  j.at("pitch_deviation_transposed_cents").get_to(r.pitch_deviation_transposed_cents);
  j.at("contour_accuracy").get_to(r.contour_accuracy);
  j.at("rhythm_error_ms").get_to(r.rhythm_error_ms);
  j.at("scored_note_count").get_to(r.scored_note_count);
  r.onset_count = j.value("onset_count", std::size_t{0});
  j.at("notes").get_to(r.notes);
}

}  // namespace pitchcoach
