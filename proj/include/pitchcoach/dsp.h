#pragma once

#include <cstddef>
#include <deque>
#include <memory>
#include <optional>
#include <span>
#include <vector>

#include "json.hpp"

namespace pitchcoach {

/// Analysis parameters. The sample rate is fixed at 10 kHz; audio at any
/// other rate is resampled at ingestion.
struct DspConfig {
  int sample_rate_hz = 10000;
  int frame_len = 512;
  int hop = 100;
  double f0_min_hz = 80.0;
  double f0_max_hz = 600.0;
  double cpp_threshold = 4.5;
  double rms_gate = 0.01;
  /// Magnitudes more than this far below the spectral maximum are clamped
  /// before the log, so leakage skirts do not dominate the cepstrum.
  double dynamic_range_db = 40.0;

  double hop_ms() const { return 1000.0 * hop / sample_rate_hz; }
  /// Throws ValidationError when an invariant does not hold.
  void validate() const;
  bool operator==(const DspConfig&) const = default;
};

inline constexpr int kSampleRateHz = 10000;

/// Result of one analysis hop.
struct PitchFrame {
  double t_ms = 0.0;
  std::optional<double> f0_hz;
  double confidence = 0.0;
  double rms = 0.0;

  bool voiced() const { return f0_hz.has_value(); }
  bool operator==(const PitchFrame&) const = default;
};

struct AnalysisFrame {
  double t_ms = 0.0;
  std::vector<double> samples;
  std::size_t valid = 0;  ///< samples taken from the stream; the rest is zero padding
};

struct F0Estimate {
  double f0_hz = 0.0;
  double confidence = 0.0;
  bool operator==(const F0Estimate&) const = default;
};

/// Raw cepstral measurements for one frame, before voicing decisions.
struct CepstralPeak {
  double rms = 0.0;
  double quefrency = 0.0;  ///< interpolated, in samples
  double peak = 0.0;
  double prominence = 0.0;  ///< peak / mean |cepstrum| in the search band
};

/// Zero-padded frames with fewer real samples than frame_len / 2 are reported
/// unvoiced; a truncated period train has no reliable cepstral peak.
bool frame_has_enough_signal(std::size_t valid, const DspConfig& cfg);

/// Splits `samples` into frames of cfg.frame_len starting every cfg.hop samples,
/// for hop starts 0..floor((N-1)/hop). Frames running past the end are zero-padded.
std::vector<AnalysisFrame> frame_stream(std::span<const double> samples, const DspConfig& cfg);

/// Center time of frame `k`.
double frame_center_ms(std::size_t k, const DspConfig& cfg);

/// Real-cepstrum F0 estimator. Holds FFT plans and scratch buffers, so one
/// instance must not be shared between threads; create one per stream.
class CepstrumAnalyzer {
 public:
  explicit CepstrumAnalyzer(const DspConfig& cfg);
  ~CepstrumAnalyzer();
  CepstrumAnalyzer(CepstrumAnalyzer&&) noexcept;
  CepstrumAnalyzer& operator=(CepstrumAnalyzer&&) noexcept;
  CepstrumAnalyzer(const CepstrumAnalyzer&) = delete;
  CepstrumAnalyzer& operator=(const CepstrumAnalyzer&) = delete;

  const DspConfig& config() const { return cfg_; }

  /// Hann window, log magnitude spectrum, inverse transform, then a
  /// parabolic-interpolated peak search over quefrencies [sr/f0_max, sr/f0_min].
  CepstralPeak analyze(std::span<const double> frame);

  /// Absent when the frame is below the RMS gate, the peak prominence is
  /// below cpp_threshold, or the interpolated F0 leaves [f0_min, f0_max].
  std::optional<F0Estimate> estimate(std::span<const double> frame);

  /// Voicing decision on an already measured peak.
  std::optional<F0Estimate> decide(const CepstralPeak& peak) const;

  /// Full real cepstrum of the last analyzed frame (length frame_len).
  std::span<const double> last_cepstrum() const;

 private:
  struct Impl;
  DspConfig cfg_;
  std::unique_ptr<Impl> impl_;
};

/// One-shot convenience; plans a transform per call.
std::optional<F0Estimate> estimate_f0(std::span<const double> frame, const DspConfig& cfg);

/// 5-point median over voiced runs in the MIDI domain. Windows shrink
/// symmetrically near run edges, so run endpoints pass through unchanged.
std::vector<PitchFrame> smooth_pitch(std::span<const PitchFrame> frames);

/// Incremental framing and estimation. Produces exactly the frames of
/// frame_stream + CepstrumAnalyzer over the concatenated input.
class PitchTracker {
 public:
  explicit PitchTracker(const DspConfig& cfg);

  std::vector<PitchFrame> push(std::span<const double> samples);
  /// Emits the zero-padded tail frames. The tracker is spent afterwards.
  std::vector<PitchFrame> finish();
  std::size_t samples_seen() const { return total_; }

 private:
  PitchFrame analyze_at(std::size_t k, std::span<const double> frame, std::size_t valid);

  DspConfig cfg_;
  CepstrumAnalyzer analyzer_;
  std::vector<double> buffer_;
  std::size_t buffer_start_ = 0;  // absolute index of buffer_[0]
  std::size_t next_frame_ = 0;
  std::size_t total_ = 0;
};

/// Streaming counterpart of smooth_pitch with two frames of lookahead.
class StreamingSmoother {
 public:
  std::vector<PitchFrame> push(const PitchFrame& frame);
  std::vector<PitchFrame> finish();

 private:
  struct Item {
    PitchFrame frame;
    std::size_t run_pos = 0;  // index within its voiced run
  };
  std::vector<PitchFrame> drain(bool final);

  std::deque<Item> buf_;  // up to two emitted frames, then pending ones
  std::size_t next_ = 0;  // first pending index in buf_
};

/// Batch convenience: frame, estimate, smooth.
std::vector<PitchFrame> track_pitch(std::span<const double> samples, const DspConfig& cfg);

void to_json(nlohmann::json& j, const DspConfig& c);
void from_json(const nlohmann::json& j, DspConfig& c);
void to_json(nlohmann::json& j, const PitchFrame& f);
void from_json(const nlohmann::json& j, PitchFrame& f);

}  // namespace pitchcoach
