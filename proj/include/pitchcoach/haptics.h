#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "pitchcoach/scoring.h"

namespace pitchcoach {

/// A linear column of actuators spanning [midi_lo, midi_hi].
struct ActuatorLayout {
  int n_actuators = 18;
  double midi_lo = 48.0;  // C3
  double midi_hi = 72.0;  // C5

  void validate() const;
  bool operator==(const ActuatorLayout&) const = default;
};

struct HapticFrame {
  double t_ms = 0.0;  ///< not on the wire
  int actuator = 0;
  double intensity = 0.0;  ///< [0, 1], quantized to 1/255 on the wire
  int duration_ms = 0;
  bool operator==(const HapticFrame&) const = default;
};

inline constexpr std::size_t kHapticFrameSize = 6;
inline constexpr std::uint8_t kHapticMagic = 0xA7;
using HapticBytes = std::array<std::uint8_t, kHapticFrameSize>;

/// Clamped linear map; monotone non-decreasing in midi.
int map_pitch_to_actuator(double midi, const ActuatorLayout& layout);

/// Rounds an intensity to the nearest wire level (k / 255).
double quantize_intensity(double intensity);

/// [A7][actuator][level][duration lo][duration hi][xor of bytes 0..4]
HapticBytes encode_haptic_frame(const HapticFrame& frame);

/// Inverse of encode_haptic_frame. Throws WireError (length, framing, corruption).
HapticFrame decode_haptic_frame(std::span<const std::uint8_t> bytes, double t_ms = 0.0);

/// End-of-trial summary: three 200 ms pulses, higher on the array for smaller deviation.
std::vector<HapticFrame> terminal_summary_pattern(const ScoreReport& score, const ActuatorLayout& layout,
                                                  double start_ms = 0.0);

inline constexpr double kSummaryPulseMs = 200.0;
inline constexpr double kSummaryGapMs = 150.0;
inline constexpr double kSummaryIntensity = 0.8;
inline constexpr double kSummaryDeviationCapCents = 400.0;

/// Resynchronizing decoder for a byte stream of frames. Bytes that cannot
/// start a valid frame are skipped one at a time.
class HapticStreamDecoder {
 public:
  std::vector<HapticFrame> push(std::span<const std::uint8_t> bytes);
  std::size_t rejected_bytes() const { return rejected_; }
  std::size_t corrupt_frames() const { return corrupt_; }

 private:
  std::vector<std::uint8_t> pending_;
  std::size_t rejected_ = 0;
  std::size_t corrupt_ = 0;
};

/// Actuator state of the simulated display. Each command replaces the
/// actuator's previous activation; intensity 0 or duration 0 switches it off.
class DeviceSimulator {
 public:
  struct Activation {
    int actuator = 0;
    double intensity = 0.0;
    double start_ms = 0.0;
    double end_ms = 0.0;
  };

  void apply(double t_ms, const HapticFrame& frame);
  std::vector<Activation> active_at(double t_ms) const;
  /// One line per active actuator: `t_ms actuator intensity remaining_ms`.
  std::string dump(double t_ms) const;
  std::size_t commands() const { return commands_; }

 private:
  std::map<int, Activation> state_;
  std::size_t commands_ = 0;
};

void to_json(nlohmann::json& j, const ActuatorLayout& l);
void from_json(const nlohmann::json& j, ActuatorLayout& l);
void to_json(nlohmann::json& j, const HapticFrame& f);
void from_json(const nlohmann::json& j, HapticFrame& f);

}  // namespace pitchcoach
