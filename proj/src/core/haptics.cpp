#include "pitchcoach/haptics.h"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "pitchcoach/error.h"

namespace pitchcoach {

namespace {

std::uint8_t xor_checksum(std::span<const std::uint8_t> bytes) {
  std::uint8_t x = 0;
  for (std::uint8_t b : bytes) x ^= b;
  return x;
}

std::string hex(std::uint8_t b) {
  char buf[5];
  std::snprintf(buf, sizeof buf, "0x%02X", b);
  return buf;
}

}  // namespace

void ActuatorLayout::validate() const {
  if (n_actuators < 2) throw ValidationError("layout: n_actuators must be >= 2");
  if (n_actuators > 256) throw ValidationError("layout: n_actuators must fit the 8-bit wire index");
  if (!(midi_lo < midi_hi)) throw ValidationError("layout: midi_lo must be < midi_hi");
}

int map_pitch_to_actuator(double midi, const ActuatorLayout& layout) {
  const int n = layout.n_actuators;
  const double pos = std::floor((midi - layout.midi_lo) / (layout.midi_hi - layout.midi_lo) * n);
  if (!(pos > 0.0)) return 0;  // also catches NaN
  return pos >= n - 1 ? n - 1 : static_cast<int>(pos);
}

double quantize_intensity(double intensity) {
  return std::round(std::clamp(intensity, 0.0, 1.0) * 255.0) / 255.0;
}

HapticBytes encode_haptic_frame(const HapticFrame& frame) {
  if (frame.actuator < 0 || frame.actuator > 255) {
    throw WireError(WireError::Kind::encoding, "haptic encode: actuator " + std::to_string(frame.actuator) +
                                                   " does not fit in one byte");
  }
  if (frame.duration_ms < 0 || frame.duration_ms > 65535) {
    throw WireError(WireError::Kind::encoding,
                    "haptic encode: duration " + std::to_string(frame.duration_ms) + " ms outside 0..65535");
  }
  if (!(frame.intensity >= 0.0 && frame.intensity <= 1.0)) {
    throw WireError(WireError::Kind::encoding, "haptic encode: intensity outside [0, 1]");
  }
  HapticBytes out{};
  out[0] = kHapticMagic;
  out[1] = static_cast<std::uint8_t>(frame.actuator);
  out[2] = static_cast<std::uint8_t>(std::lround(frame.intensity * 255.0));
  out[3] = static_cast<std::uint8_t>(frame.duration_ms & 0xFF);
  out[4] = static_cast<std::uint8_t>((frame.duration_ms >> 8) & 0xFF);
  out[5] = xor_checksum(std::span<const std::uint8_t>(out).first(5));
  return out;
}

HapticFrame decode_haptic_frame(std::span<const std::uint8_t> bytes, double t_ms) {
  if (bytes.size() != kHapticFrameSize) {
    throw WireError(WireError::Kind::length,
                    "haptic decode: expected 6 bytes, got " + std::to_string(bytes.size()));
  }
  if (bytes[0] != kHapticMagic) {
    throw WireError(WireError::Kind::framing, "haptic decode: bad magic " + hex(bytes[0]));
  }
  const std::uint8_t sum = xor_checksum(bytes.first(5));
  if (sum != bytes[5]) {
    throw WireError(WireError::Kind::corruption,
                    "haptic decode: checksum " + hex(bytes[5]) + " != computed " + hex(sum));
  }
  HapticFrame f;
  f.t_ms = t_ms;
  f.actuator = bytes[1];
  f.intensity = bytes[2] / 255.0;
  f.duration_ms = bytes[3] | (bytes[4] << 8);
  return f;
}

std::vector<HapticFrame> terminal_summary_pattern(const ScoreReport& score, const ActuatorLayout& layout,
                                                  double start_ms) {
  const int n = layout.n_actuators;
  // Nothing scored counts as the worst deviation, not a perfect one.
  const double deviation = score.scored_note_count == 0 && !score.notes.empty() ? kSummaryDeviationCapCents
                                                                                : score.pitch_deviation_cents;
  const double capped = std::clamp(deviation, 0.0, kSummaryDeviationCapCents);
  const double pos = std::floor((1.0 - capped / kSummaryDeviationCapCents) * n);
  const int actuator = static_cast<int>(std::clamp(pos, 0.0, static_cast<double>(n - 1)));

  std::vector<HapticFrame> pulses;
  for (int i = 0; i < 3; ++i) {
    HapticFrame f;
    f.t_ms = start_ms + i * (kSummaryPulseMs + kSummaryGapMs);
    f.actuator = actuator;
    f.intensity = quantize_intensity(kSummaryIntensity);
    f.duration_ms = static_cast<int>(kSummaryPulseMs);
    pulses.push_back(f);
  }
  return pulses;
}

std::vector<HapticFrame> HapticStreamDecoder::push(std::span<const std::uint8_t> bytes) {
  pending_.insert(pending_.end(), bytes.begin(), bytes.end());
  std::vector<HapticFrame> out;
  std::size_t pos = 0;
  while (pending_.size() - pos >= kHapticFrameSize) {
    auto window = std::span<const std::uint8_t>(pending_).subspan(pos, kHapticFrameSize);
    if (window[0] != kHapticMagic) {
      ++rejected_;
      ++pos;
      continue;
    }
    try {
      out.push_back(decode_haptic_frame(window));
      pos += kHapticFrameSize;
    } catch (const WireError&) {
      ++corrupt_;
      ++rejected_;
      ++pos;
    }
  }
  pending_.erase(pending_.begin(), pending_.begin() + static_cast<std::ptrdiff_t>(pos));
  return out;
}

void DeviceSimulator::apply(double t_ms, const HapticFrame& frame) {
  ++commands_;
  if (frame.intensity <= 0.0 || frame.duration_ms <= 0) {
    state_.erase(frame.actuator);
    return;
  }
  state_[frame.actuator] = Activation{frame.actuator, frame.intensity, t_ms, t_ms + frame.duration_ms};
}

std::vector<DeviceSimulator::Activation> DeviceSimulator::active_at(double t_ms) const {
  std::vector<Activation> out;
  for (const auto& [idx, a] : state_) {
    if (t_ms >= a.start_ms && t_ms < a.end_ms) out.push_back(a);
  }
  return out;
}

std::string DeviceSimulator::dump(double t_ms) const {
  std::string out;
  char line[96];
  for (const Activation& a : active_at(t_ms)) {
    std::snprintf(line, sizeof line, "%.0f %d %.4f %.0f\n", t_ms, a.actuator, a.intensity, a.end_ms - t_ms);
    out += line;
  }
  return out;
}

void to_json(nlohmann::json& j, const ActuatorLayout& l) {
  j = {{"n_actuators", l.n_actuators}, {"midi_lo", l.midi_lo}, {"midi_hi", l.midi_hi}};
}

void from_json(const nlohmann::json& j, ActuatorLayout& l) {
  ActuatorLayout d;
  l.n_actuators = j.value("n_actuators", d.n_actuators);
  l.midi_lo = j.value("midi_lo", d.midi_lo);
  l.midi_hi = j.value("midi_hi", d.midi_hi);
}

void to_json(nlohmann::json& j, const HapticFrame& f) {
  j = {{"t_ms", f.t_ms}, {"actuator", f.actuator}, {"intensity", f.intensity}, {"duration_ms", f.duration_ms}};
}

void from_json(const nlohmann::json& j, HapticFrame& f) {
  j.at("t_ms").get_to(f.t_ms);
  j.at("actuator").get_to(f.actuator);
  j.at("intensity").get_to(f.intensity);
  j.at("duration_ms").get_to(f.duration_ms);
}

}  // namespace pitchcoach
