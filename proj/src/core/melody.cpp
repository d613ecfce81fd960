#include "pitchcoach/melody.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include "pitchcoach/error.h"

namespace pitchcoach {

namespace {

std::size_t line_of_offset(std::string_view text, std::size_t byte) {
  byte = std::min(byte, text.size());
  return 1 + static_cast<std::size_t>(std::count(text.begin(), text.begin() + byte, '\n'));
}

}  // namespace

std::optional<std::size_t> MelodyTrack::note_at(double t_ms) const {
  // First note whose offset lies beyond t.
  auto it = std::upper_bound(notes.begin(), notes.end(), t_ms,
                             [](double t, const Note& n) { return t < n.offset_ms(); });
  if (it == notes.end() || !it->contains(t_ms)) return std::nullopt;
  return static_cast<std::size_t>(it - notes.begin());
}

double hz_to_midi(double f_hz) {
  if (!(f_hz > 0.0) || !std::isfinite(f_hz)) {
    throw DomainError("hz_to_midi: frequency must be positive and finite");
  }
  return 69.0 + 12.0 * std::log2(f_hz / 440.0);
}

double midi_to_hz(double midi) { return 440.0 * std::exp2((midi - 69.0) / 12.0); }

double cents_between(double f_a, double f_b) {
  if (!(f_a > 0.0) || !(f_b > 0.0)) {
    throw DomainError("cents_between: frequencies must be positive");
  }
  return 1200.0 * std::log2(f_a / f_b);
}

void validate_melody(const MelodyTrack& melody) {
  if (melody.notes.empty()) throw ValidationError("melody '" + melody.id + "' has no notes");
  for (std::size_t i = 0; i < melody.notes.size(); ++i) {
    const Note& n = melody.notes[i];
    const std::string where = "note " + std::to_string(i);
    if (!std::isfinite(n.onset_ms) || !std::isfinite(n.duration_ms) || !std::isfinite(n.pitch_midi)) {
      throw ValidationError(where + ": non-finite field");
    }
    if (n.onset_ms < 0.0) throw ValidationError(where + ": negative onset_ms");
    if (!(n.duration_ms > 0.0)) throw ValidationError(where + ": duration_ms must be > 0");
    if (i > 0) {
      const Note& prev = melody.notes[i - 1];
      if (n.onset_ms < prev.onset_ms) {
        throw OrderingError(where + ": ordering violation, onset " + std::to_string(n.onset_ms) +
                              " ms precedes note " + std::to_string(i - 1));
      }
      if (n.onset_ms < prev.offset_ms()) {
        throw ValidationError(where + ": overlap with note " + std::to_string(i - 1));
      }
    }
  }
  if (!(melody.span_ms() < kMaxMelodySpanMs)) {
    throw ValidationError("melody '" + melody.id + "' spans 120 s or more");
  }
}

MelodyTrack load_melody(std::string_view text) {
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(e.what(), line_of_offset(text, e.byte > 0 ? e.byte - 1 : 0));
  }
  MelodyTrack melody;
  try {
    melody = j.get<MelodyTrack>();
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("melody schema: ") + e.what(), 0);
  }
  validate_melody(melody);
  return melody;
}

MelodyTrack load_melody_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open melody file: " + path);
  std::stringstream ss;
  ss << in.rdbuf();
  return load_melody(ss.str());
}

std::vector<PitchPoint> target_curve(const MelodyTrack& melody, double hop_ms) {
  if (!(hop_ms > 0.0)) throw DomainError("target_curve: hop_ms must be > 0");
  const auto last = static_cast<std::size_t>(std::floor(melody.span_ms() / hop_ms));
  std::vector<PitchPoint> curve;
  curve.reserve(last + 1);
  for (std::size_t k = 0; k <= last; ++k) {
    PitchPoint p;
    p.t_ms = static_cast<double>(k) * hop_ms;
    if (auto idx = melody.note_at(p.t_ms)) p.midi = melody.notes[*idx].pitch_midi;
    curve.push_back(p);
  }
  return curve;
}

void to_json(nlohmann::json& j, const Note& n) {
  j = {{"onset_ms", n.onset_ms}, {"duration_ms", n.duration_ms}, {"midi", n.pitch_midi}};
}

void from_json(const nlohmann::json& j, Note& n) {
  j.at("onset_ms").get_to(n.onset_ms);
  j.at("duration_ms").get_to(n.duration_ms);
  j.at("midi").get_to(n.pitch_midi);
}

void to_json(nlohmann::json& j, const MelodyTrack& m) {
  j = {{"id", m.id}, {"description", m.description}, {"notes", m.notes}};
}

void from_json(const nlohmann::json& j, MelodyTrack& m) {
  j.at("id").get_to(m.id);
  m.description = j.value("description", std::string{});
  j.at("notes").get_to(m.notes);
}

void to_json(nlohmann::json& j, const PitchPoint& p) {
  j = {{"t_ms", p.t_ms}, {"midi", p.midi ? nlohmann::json(*p.midi) : nlohmann::json(nullptr)}};
}

void from_json(const nlohmann::json& j, PitchPoint& p) {
  j.at("t_ms").get_to(p.t_ms);
  const auto& m = j.at("midi");
  p.midi = m.is_null() ? std::nullopt : std::optional<double>(m.get<double>());
}

}  // namespace pitchcoach
