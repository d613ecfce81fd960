#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace pitchcoach::service {

struct DecodedAudio {
  int sample_rate = 0;
  int channels = 0;
  std::vector<double> mono;  ///< [-1, 1]
};

/// RIFF/WAVE with 16-bit PCM, mono or stereo (stereo is averaged).
/// Throws FormatError for anything else.
DecodedAudio decode_wav(std::span<const std::uint8_t> bytes);

/// Interleaved little-endian s16 to normalized mono. A trailing partial
/// sample frame is ignored.
std::vector<double> pcm16_to_mono(std::span<const std::uint8_t> bytes, int channels);

/// Streaming linear-interpolation resampler. Output sample j sits at source
/// position j * src_rate / dst_rate and is produced as soon as both
/// neighbouring input samples are known. Equal rates pass samples through.
class LinearResampler {
 public:
  LinearResampler(int src_rate, int dst_rate);

  std::vector<double> push(std::span<const double> samples);
  std::size_t produced() const { return next_out_; }

 private:
  std::uint64_t src_;
  std::uint64_t dst_;
  std::vector<double> buffer_;
  std::uint64_t buffer_base_ = 0;  // absolute index of buffer_[0]
  std::uint64_t received_ = 0;
  std::uint64_t next_out_ = 0;
};

/// Whole-file ingestion: decode, downmix, resample to 10 kHz.
std::vector<double> ingest_wav(std::span<const std::uint8_t> bytes);

/// Raw s16le stream at `sample_rate` to 10 kHz mono.
std::vector<double> ingest_raw_pcm(std::span<const std::uint8_t> bytes, int sample_rate, int channels = 1);

/// 16-bit mono WAV, samples clipped to [-1, 1].
std::vector<std::uint8_t> encode_wav(std::span<const double> samples, int sample_rate);

}  // namespace pitchcoach::service
