#include <cmath>

#include "doctest.h"
#include "pitchcoach/error.h"
#include "pitchcoach/service/audio.h"
#include "synth.h"
#include "wav.h"

using namespace pitchcoach;
using namespace pitchcoach::service;
using testsupport::put_u16;
using testsupport::wav_bytes;

TEST_CASE("10 kHz mono passes through") {
  std::vector<std::uint8_t> data;
  const std::vector<std::int16_t> v = {0, 16384, -16384, 32767, -32768};
  for (auto s : v) put_u16(data, static_cast<std::uint16_t>(s));
  const auto x = ingest_wav(wav_bytes(data, 10000, 1, 16));
  REQUIRE(x.size() == 5);
  CHECK(x[0] == 0.0);
  CHECK(x[1] == 0.5);
  CHECK(x[2] == -0.5);
  CHECK(x[3] == 32767.0 / 32768.0);
  CHECK(x[4] == -1.0);
  for (double s : x) CHECK(std::abs(s) <= 1.0);
}

TEST_CASE("stereo is averaged") {
  std::vector<std::uint8_t> data;
  for (auto [l, r] : {std::pair<std::int16_t, std::int16_t>{16384, 0}, {-8192, 8192}, {32767, 32767}}) {
    put_u16(data, static_cast<std::uint16_t>(l));
    put_u16(data, static_cast<std::uint16_t>(r));
  }
  const auto d = decode_wav(wav_bytes(data, 10000, 2, 16));
  CHECK(d.channels == 2);
  REQUIRE(d.mono.size() == 3);
  CHECK(d.mono[0] == 0.25);
  CHECK(d.mono[1] == 0.0);
  CHECK(d.mono[2] == 32767.0 / 32768.0);
}

TEST_CASE("20 kHz file decimates to about half the samples") {
  for (std::size_t n : {1u, 2u, 999u, 1000u, 20000u, 12345u}) {
    CAPTURE(n);
    std::vector<std::uint8_t> data(2 * n, 0);
    const auto x = ingest_wav(wav_bytes(data, 20000, 1, 16));
    CHECK(std::abs(static_cast<double>(x.size()) - n / 2.0) <= 1.0);
  }
}

TEST_CASE("resampling interpolates linearly") {
  // A ramp stays a ramp under linear interpolation.
  std::vector<double> ramp(100);
  for (int i = 0; i < 100; ++i) ramp[i] = i / 1000.0;
  LinearResampler up(8000, 10000);
  const auto y = up.push(ramp);
  for (std::size_t j = 0; j < y.size(); ++j) CHECK(y[j] == doctest::Approx(j * 0.8 / 1000.0).epsilon(1e-12));
  CHECK(y.size() >= 123);

  LinearResampler same(10000, 10000);
  CHECK(same.push(ramp) == ramp);
}

TEST_CASE("streaming resampler equals one-shot resampling") {
  const auto x = testsupport::sawtooth(220.0, 0.3, 0.5, 8, 44100);
  LinearResampler whole(44100, 10000);
  const auto ref = whole.push(x);
  for (std::size_t block : {1u, 17u, 441u, 5000u}) {
    LinearResampler r(44100, 10000);
    std::vector<double> out;
    for (std::size_t i = 0; i < x.size(); i += block) {
      const auto part = r.push(std::span<const double>(x).subspan(i, std::min(block, x.size() - i)));
      out.insert(out.end(), part.begin(), part.end());
    }
    CHECK(out == ref);
  }
}

TEST_CASE("unsupported encodings are format errors") {
  std::vector<std::uint8_t> data(100, 0x80);
  CHECK_THROWS_AS(ingest_wav(wav_bytes(data, 10000, 1, 8)), FormatError);
  CHECK_THROWS_AS(ingest_wav(wav_bytes(data, 10000, 1, 16, 3)), FormatError);
  CHECK_THROWS_AS(ingest_wav(wav_bytes(data, 10000, 3, 16)), FormatError);
  const std::vector<std::uint8_t> junk = {'n', 'o', 'p', 'e'};
  CHECK_THROWS_AS(ingest_wav(junk), FormatError);
}

TEST_CASE("encode_wav round trip") {
  const auto x = testsupport::sawtooth(150.0, 0.05, 0.7);
  const auto bytes = encode_wav(x, 10000);
  const auto back = ingest_wav(bytes);
  REQUIRE(back.size() == x.size());
  for (std::size_t i = 0; i < x.size(); ++i) CHECK(std::abs(back[i] - x[i]) <= 1.0 / 32767.0);
}

TEST_CASE("raw PCM ingestion") {
  std::vector<std::uint8_t> data;
  put_u16(data, 16384);
  put_u16(data, static_cast<std::uint16_t>(-16384));
  data.push_back(0x12);  // partial sample ignored
  const auto x = ingest_raw_pcm(data, 10000);
  CHECK(x == std::vector<double>{0.5, -0.5});
}
