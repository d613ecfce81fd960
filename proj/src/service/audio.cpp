#include "pitchcoach/service/audio.h"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <string>

#include "pitchcoach/dsp.h"
#include "pitchcoach/error.h"

namespace pitchcoach::service {

namespace {

constexpr std::uint16_t kWaveFormatPcm = 1;
constexpr std::uint16_t kWaveFormatExtensible = 0xFFFE;

std::uint16_t le16(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint16_t>(b[at] | (b[at + 1] << 8));
}

std::uint32_t le32(std::span<const std::uint8_t> b, std::size_t at) {
  return static_cast<std::uint32_t>(b[at]) | (static_cast<std::uint32_t>(b[at + 1]) << 8) |
         (static_cast<std::uint32_t>(b[at + 2]) << 16) | (static_cast<std::uint32_t>(b[at + 3]) << 24);
}

bool tag_is(std::span<const std::uint8_t> b, std::size_t at, const char* tag) {
  return std::memcmp(b.data() + at, tag, 4) == 0;
}

void put16(std::vector<std::uint8_t>& out, std::uint16_t v) {
  out.push_back(static_cast<std::uint8_t>(v & 0xFF));
  out.push_back(static_cast<std::uint8_t>(v >> 8));
}

void put32(std::vector<std::uint8_t>& out, std::uint32_t v) {
  for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>((v >> (8 * i)) & 0xFF));
}

}  // namespace

DecodedAudio decode_wav(std::span<const std::uint8_t> bytes) {
  if (bytes.size() < 12 || !tag_is(bytes, 0, "RIFF") || !tag_is(bytes, 8, "WAVE")) {
    throw FormatError("wav: not a RIFF/WAVE file");
  }
  std::size_t pos = 12;
  bool have_fmt = false;
  std::uint16_t channels = 0;
  std::uint32_t rate = 0;
  std::uint16_t bits = 0;
  while (pos + 8 <= bytes.size()) {
    const std::uint32_t size = le32(bytes, pos + 4);
    const std::size_t body = pos + 8;
    const std::size_t avail = std::min<std::size_t>(size, bytes.size() - body);
    if (tag_is(bytes, pos, "fmt ")) {
      if (avail < 16) throw FormatError("wav: fmt chunk too short");
      std::uint16_t format = le16(bytes, body);
      channels = le16(bytes, body + 2);
      rate = le32(bytes, body + 4);
      bits = le16(bytes, body + 14);
      if (format == kWaveFormatExtensible && avail >= 26) format = le16(bytes, body + 24);
      if (format != kWaveFormatPcm) throw FormatError("wav: only PCM is supported (format " + std::to_string(format) + ")");
      if (bits != 16) throw FormatError("wav: only 16-bit samples are supported, got " + std::to_string(bits));
      if (channels != 1 && channels != 2) throw FormatError("wav: only mono or stereo is supported");
      if (rate == 0) throw FormatError("wav: zero sample rate");
      have_fmt = true;
    } else if (tag_is(bytes, pos, "data")) {
      if (!have_fmt) throw FormatError("wav: data chunk before fmt chunk");
      DecodedAudio out;
      out.sample_rate = static_cast<int>(rate);
      out.channels = channels;
      out.mono = pcm16_to_mono(bytes.subspan(body, avail), channels);
      return out;
    }
    pos = body + size + (size & 1);  // chunks are word aligned
  }
  throw FormatError(have_fmt ? "wav: no data chunk" : "wav: no fmt chunk");
}

std::vector<double> pcm16_to_mono(std::span<const std::uint8_t> bytes, int channels) {
  if (channels < 1) throw FormatError("pcm: channel count must be >= 1");
  const std::size_t frame_bytes = 2 * static_cast<std::size_t>(channels);
  const std::size_t frames = bytes.size() / frame_bytes;
  std::vector<double> out(frames);
  for (std::size_t i = 0; i < frames; ++i) {
    double acc = 0.0;
    for (int c = 0; c < channels; ++c) {
      const std::size_t at = i * frame_bytes + 2 * static_cast<std::size_t>(c);
      acc += static_cast<std::int16_t>(le16(bytes, at)) / 32768.0;
    }
    out[i] = acc / channels;
  }
  return out;
}

LinearResampler::LinearResampler(int src_rate, int dst_rate) {
  if (src_rate <= 0 || dst_rate <= 0) throw FormatError("resampler: sample rates must be positive");
  src_ = static_cast<std::uint64_t>(src_rate);
  dst_ = static_cast<std::uint64_t>(dst_rate);
}

std::vector<double> LinearResampler::push(std::span<const double> samples) {
  buffer_.insert(buffer_.end(), samples.begin(), samples.end());
  received_ += samples.size();
  std::vector<double> out;
  while (true) {
    const std::uint64_t num = next_out_ * src_;
    const std::uint64_t i0 = num / dst_;
    const std::uint64_t rem = num % dst_;
    if (i0 >= received_ || (rem != 0 && i0 + 1 >= received_)) break;
    const double a = buffer_[i0 - buffer_base_];
    if (rem == 0) {
      out.push_back(a);
    } else {
      const double b = buffer_[i0 + 1 - buffer_base_];
      const double frac = static_cast<double>(rem) / static_cast<double>(dst_);
      out.push_back(a + (b - a) * frac);
    }
    ++next_out_;
  }
  // Keep from the left neighbour of the next output onwards.
  const std::uint64_t keep = (next_out_ * src_) / dst_;
  if (keep > buffer_base_) {
    const auto drop = static_cast<std::size_t>(std::min<std::uint64_t>(keep - buffer_base_, buffer_.size()));
    buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(drop));
    buffer_base_ += drop;
  }
  return out;
}

std::vector<double> ingest_wav(std::span<const std::uint8_t> bytes) {
  const DecodedAudio audio = decode_wav(bytes);
  if (audio.sample_rate == kSampleRateHz) return audio.mono;
  LinearResampler rs(audio.sample_rate, kSampleRateHz);
  return rs.push(audio.mono);
}

std::vector<double> ingest_raw_pcm(std::span<const std::uint8_t> bytes, int sample_rate, int channels) {
  const std::vector<double> mono = pcm16_to_mono(bytes, channels);
  if (sample_rate == kSampleRateHz) return mono;
  LinearResampler rs(sample_rate, kSampleRateHz);
  return rs.push(mono);
}

std::vector<std::uint8_t> encode_wav(std::span<const double> samples, int sample_rate) {
  std::vector<std::uint8_t> out;
  const auto data_bytes = static_cast<std::uint32_t>(samples.size() * 2);
  out.reserve(44 + data_bytes);
  out.insert(out.end(), {'R', 'I', 'F', 'F'});
  put32(out, 36 + data_bytes);
  out.insert(out.end(), {'W', 'A', 'V', 'E', 'f', 'm', 't', ' '});
  put32(out, 16);
  put16(out, kWaveFormatPcm);
  put16(out, 1);
  put32(out, static_cast<std::uint32_t>(sample_rate));
  put32(out, static_cast<std::uint32_t>(sample_rate) * 2);
  put16(out, 2);
  put16(out, 16);
  out.insert(out.end(), {'d', 'a', 't', 'a'});
  put32(out, data_bytes);
  for (double s : samples) {
    const double clipped = std::clamp(s, -1.0, 1.0);
    const auto v = static_cast<std::int16_t>(std::lround(std::min(clipped * 32768.0, 32767.0)));
    put16(out, static_cast<std::uint16_t>(v));
  }
  return out;
}

}  // namespace pitchcoach::service
