#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "pitchcoach/dsp.h"
#include "pitchcoach/melody.h"

namespace testsupport {

inline constexpr double kPi = 3.14159265358979323846;

/// Band-limited sawtooth: sum_{k=1..harmonics} sin(k w t) / k, peak-normalized
/// to `amplitude`.
inline std::vector<double> sawtooth(double f_hz, double seconds, double amplitude = 1.0, int harmonics = 8,
                                    int sample_rate = 10000) {
  const std::size_t n = static_cast<std::size_t>(std::llround(seconds * sample_rate));
  std::vector<double> x(n);
  double peak = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double t = static_cast<double>(i) / sample_rate;
    double v = 0.0;
    for (int k = 1; k <= harmonics && k * f_hz < sample_rate / 2.0; ++k) v += std::sin(2 * kPi * k * f_hz * t) / k;
    x[i] = v;
    peak = std::max(peak, std::abs(v));
  }
  if (peak > 0) {
    for (double& v : x) v *= amplitude / peak;
  }
  return x;
}

inline double rms(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v * v;
  return x.empty() ? 0.0 : std::sqrt(s / static_cast<double>(x.size()));
}

/// Adds white Gaussian noise at the given SNR (dB, relative to signal RMS).
inline std::vector<double> add_noise(std::vector<double> x, double snr_db, std::uint32_t seed) {
  std::mt19937 rng(seed);
  const double sigma = rms(x) / std::pow(10.0, snr_db / 20.0);
  std::normal_distribution<double> nd(0.0, sigma);
  for (double& v : x) v += nd(rng);
  return x;
}

inline std::vector<double> white_noise(std::size_t n, double amplitude, std::uint32_t seed) {
  std::mt19937 rng(seed);
  std::uniform_real_distribution<double> ud(-amplitude, amplitude);
  std::vector<double> x(n);
  for (double& v : x) v = ud(rng);
  return x;
}

/// Sung rendition of a melody: each note a sawtooth at its pitch (shifted by
/// `cents`), silence in between, `tail_ms` of silence at the end.
inline std::vector<double> render_melody(const pitchcoach::MelodyTrack& m, double cents = 0.0, double amplitude = 0.5,
                                         double tail_ms = 200.0, int sample_rate = 10000) {
  const std::size_t n = static_cast<std::size_t>((m.span_ms() + tail_ms) * sample_rate / 1000.0);
  std::vector<double> x(n, 0.0);
  for (const auto& note : m.notes) {
    const double f = pitchcoach::midi_to_hz(note.pitch_midi + cents / 100.0);
    const auto a = static_cast<std::size_t>(note.onset_ms * sample_rate / 1000.0);
    const auto b = std::min(n, static_cast<std::size_t>(note.offset_ms() * sample_rate / 1000.0));
    const auto tone = sawtooth(f, static_cast<double>(b - a) / sample_rate, amplitude, 8, sample_rate);
    for (std::size_t i = a; i < b && i - a < tone.size(); ++i) x[i] = tone[i - a];
  }
  return x;
}

/// Frames on the hop grid following the melody exactly: voiced at the note
/// pitch (+ cents) for frames whose time lies in [onset + shift, offset + shift).
inline std::vector<pitchcoach::PitchFrame> frames_for(const pitchcoach::MelodyTrack& m, double hop_ms = 10.0,
                                                     double cents = 0.0, double shift_ms = 0.0) {
  std::vector<pitchcoach::PitchFrame> out;
  const double end = m.span_ms() + std::max(0.0, shift_ms) + 100.0;
  for (double t = 0.0; t < end; t += hop_ms) {
    pitchcoach::PitchFrame f;
    f.t_ms = t;
    f.rms = 0.0;
    for (const auto& note : m.notes) {
      if (t >= note.onset_ms + shift_ms && t < note.offset_ms() + shift_ms) {
        f.f0_hz = pitchcoach::midi_to_hz(note.pitch_midi + cents / 100.0);
        f.confidence = 1.0;
        f.rms = 0.3;
      }
    }
    out.push_back(f);
  }
  return out;
}

/// 12 notes of 300 ms separated by 200 ms gaps; every consecutive pair
/// differs by at least two semitones.
inline pitchcoach::MelodyTrack twelve_note_fixture() {
  const double pitches[12] = {60, 62, 64, 60, 65, 67, 64, 62, 67, 69, 65, 60};
  pitchcoach::MelodyTrack m;
  m.id = "fixture12";
  m.description = "12-note gapped fixture";
  for (int i = 0; i < 12; ++i) m.notes.push_back({i * 500.0, 300.0, pitches[i]});
  return m;
}

}  // namespace testsupport
