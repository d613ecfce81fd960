#include "pitchcoach/dsp.h"

#include <fftw3.h>

#include <algorithm>
#include <cmath>
#include <mutex>
#include <numbers>

#include "pitchcoach/error.h"

namespace pitchcoach {

namespace {

constexpr double kLogFloor = 1e-10;
// A sub-multiple quefrency peak at least this fraction of the global peak wins.
constexpr double kSubmultipleRatio = 0.5;

// FFTW planning and plan destruction are not thread safe.
std::mutex& fftw_planner_mutex() {
  static std::mutex m;
  return m;
}

bool is_power_of_two(int n) { return n > 0 && (n & (n - 1)) == 0; }

double frame_rms(std::span<const double> x) {
  if (x.empty()) return 0.0;
  double acc = 0.0;
  for (double v : x) acc += v * v;
  return std::sqrt(acc / static_cast<double>(x.size()));
}

// Index of the median element (by pitch) among window[0..n), n odd.
std::size_t median_index(std::span<const PitchFrame> window) {
  std::vector<std::size_t> order(window.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return *window[a].f0_hz < *window[b].f0_hz;
  });
  return order[order.size() / 2];
}

}  // namespace

void DspConfig::validate() const {
  if (sample_rate_hz != kSampleRateHz) throw ValidationError("dsp: sample_rate_hz is fixed at 10000");
  if (!is_power_of_two(frame_len)) throw ValidationError("dsp: frame_len must be a power of two");
  if (hop <= 0 || hop > frame_len) throw ValidationError("dsp: hop must be in (0, frame_len]");
  if (!(f0_min_hz > 0.0) || !(f0_min_hz < f0_max_hz)) throw ValidationError("dsp: need 0 < f0_min_hz < f0_max_hz");
  if (f0_max_hz > sample_rate_hz / 2.0) throw ValidationError("dsp: f0_max_hz above Nyquist");
  // The longest searched quefrency (plus one neighbor for interpolation) must fit in half a frame.
  if (std::floor(sample_rate_hz / f0_min_hz) + 1 >= frame_len / 2) {
    throw ValidationError("dsp: frame_len too short for f0_min_hz");
  }
  if (!(cpp_threshold > 0.0)) throw ValidationError("dsp: cpp_threshold must be > 0");
  if (!(rms_gate >= 0.0) || rms_gate > 1.0) throw ValidationError("dsp: rms_gate must be in [0, 1]");
  if (!(dynamic_range_db > 0.0)) throw ValidationError("dsp: dynamic_range_db must be > 0");
}

bool frame_has_enough_signal(std::size_t valid, const DspConfig& cfg) {
  return 2 * valid >= static_cast<std::size_t>(cfg.frame_len);
}

double frame_center_ms(std::size_t k, const DspConfig& cfg) {
  return (static_cast<double>(k) * cfg.hop + cfg.frame_len / 2.0) * 1000.0 / cfg.sample_rate_hz;
}

std::vector<AnalysisFrame> frame_stream(std::span<const double> samples, const DspConfig& cfg) {
  std::vector<AnalysisFrame> frames;
  if (samples.empty()) return frames;
  const std::size_t hop = static_cast<std::size_t>(cfg.hop);
  const std::size_t len = static_cast<std::size_t>(cfg.frame_len);
  const std::size_t count = (samples.size() - 1) / hop + 1;
  frames.reserve(count);
  for (std::size_t k = 0; k < count; ++k) {
    AnalysisFrame f;
    f.t_ms = frame_center_ms(k, cfg);
    f.samples.assign(len, 0.0);
    const std::size_t start = k * hop;
    const std::size_t n = std::min(len, samples.size() - start);
    std::copy_n(samples.begin() + static_cast<std::ptrdiff_t>(start), n, f.samples.begin());
    f.valid = n;
    frames.push_back(std::move(f));
  }
  return frames;
}

// ---------------------------------------------------------------------------
// CepstrumAnalyzer

struct CepstrumAnalyzer::Impl {
  int n = 0;
  double* time = nullptr;         // n reals
  fftw_complex* spectrum = nullptr;  // n/2+1 complex
  double* cepstrum = nullptr;     // n reals
  fftw_plan forward = nullptr;
  fftw_plan inverse = nullptr;
  std::vector<double> window;

  explicit Impl(int size) : n(size), window(static_cast<std::size_t>(size)) {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    time = fftw_alloc_real(static_cast<std::size_t>(n));
    cepstrum = fftw_alloc_real(static_cast<std::size_t>(n));
    spectrum = fftw_alloc_complex(static_cast<std::size_t>(n / 2 + 1));
    forward = fftw_plan_dft_r2c_1d(n, time, spectrum, FFTW_ESTIMATE);
    inverse = fftw_plan_dft_c2r_1d(n, spectrum, cepstrum, FFTW_ESTIMATE);
    for (int i = 0; i < n; ++i) {
      window[static_cast<std::size_t>(i)] = 0.5 - 0.5 * std::cos(2.0 * std::numbers::pi * i / n);
    }
  }

  ~Impl() {
    std::lock_guard<std::mutex> lock(fftw_planner_mutex());
    fftw_destroy_plan(forward);
    fftw_destroy_plan(inverse);
    fftw_free(time);
    fftw_free(cepstrum);
    fftw_free(spectrum);
  }

  Impl(const Impl&) = delete;
  Impl& operator=(const Impl&) = delete;
};

CepstrumAnalyzer::CepstrumAnalyzer(const DspConfig& cfg) : cfg_(cfg) {
  cfg_.validate();
  impl_ = std::make_unique<Impl>(cfg_.frame_len);
}

CepstrumAnalyzer::~CepstrumAnalyzer() = default;
CepstrumAnalyzer::CepstrumAnalyzer(CepstrumAnalyzer&&) noexcept = default;
CepstrumAnalyzer& CepstrumAnalyzer::operator=(CepstrumAnalyzer&&) noexcept = default;

std::span<const double> CepstrumAnalyzer::last_cepstrum() const {
  return {impl_->cepstrum, static_cast<std::size_t>(impl_->n)};
}

CepstralPeak CepstrumAnalyzer::analyze(std::span<const double> frame) {
  const int n = impl_->n;
  if (frame.size() != static_cast<std::size_t>(n)) {
    throw UsageError("estimate_f0: frame length " + std::to_string(frame.size()) + " != frame_len " +
                     std::to_string(n));
  }
  CepstralPeak out;
  out.rms = frame_rms(frame);

  for (int i = 0; i < n; ++i) impl_->time[i] = frame[static_cast<std::size_t>(i)] * impl_->window[static_cast<std::size_t>(i)];
  fftw_execute(impl_->forward);
  double max_mag = 0.0;
  for (int k = 0; k <= n / 2; ++k) {
    const double mag = std::hypot(impl_->spectrum[k][0], impl_->spectrum[k][1]);
    impl_->spectrum[k][0] = mag;
    max_mag = std::max(max_mag, mag);
  }
  // Spectral floor relative to the strongest bin; kLogFloor still guards all-zero frames.
  const double floor_mag = max_mag * std::pow(10.0, -cfg_.dynamic_range_db / 20.0);
  for (int k = 0; k <= n / 2; ++k) {
    impl_->spectrum[k][0] = std::log(std::max(impl_->spectrum[k][0], floor_mag) + kLogFloor);
    impl_->spectrum[k][1] = 0.0;
  }
  fftw_execute(impl_->inverse);
  const double scale = 1.0 / n;
  for (int i = 0; i < n; ++i) impl_->cepstrum[i] *= scale;

  const double sr = cfg_.sample_rate_hz;
  const int q_lo = static_cast<int>(std::ceil(sr / cfg_.f0_max_hz));
  const int q_hi = static_cast<int>(std::floor(sr / cfg_.f0_min_hz));
  const double* c = impl_->cepstrum;

  int best = q_lo;
  double band_abs = 0.0;
  for (int q = q_lo; q <= q_hi; ++q) {
    band_abs += std::abs(c[q]);
    if (c[q] > c[best]) best = q;
  }
  const double band_mean = band_abs / (q_hi - q_lo + 1);

  // Rahmonics at 2T, 3T can outrank the fundamental quefrency T when the
  // harmonic comb is narrow. Walk down to a sub-multiple peak that is still
  // comparably strong.
  const double global = c[best];
  for (bool moved = true; moved && global > 0.0;) {
    moved = false;
    for (int m = 2; m <= 3 && !moved; ++m) {
      const double target = static_cast<double>(best) / m;
      const int radius = std::max(1, static_cast<int>(std::lround(0.05 * target)));
      const int lo = std::max(q_lo, static_cast<int>(std::lround(target)) - radius);
      const int hi = std::min(q_hi, static_cast<int>(std::lround(target)) + radius);
      int cand = -1;
      for (int q = lo; q <= hi; ++q) {
        if (cand < 0 || c[q] > c[cand]) cand = q;
      }
      if (cand < 0 || c[cand] < kSubmultipleRatio * global) continue;
      if (c[cand] < c[cand - 1] || c[cand] < c[cand + 1]) continue;
      best = cand;
      moved = true;
    }
  }

  // Parabolic interpolation through the peak and its neighbours.
  const double a = c[best - 1];
  const double b = c[best];
  const double g = c[best + 1];
  const double denom = a - 2.0 * b + g;
  double delta = 0.0;
  double height = b;
  if (denom < 0.0) {
    delta = std::clamp(0.5 * (a - g) / denom, -0.5, 0.5);
    height = b - 0.25 * (a - g) * delta;
  }
  out.quefrency = best + delta;
  out.peak = height;
  out.prominence = band_mean > 0.0 ? height / band_mean : 0.0;
  return out;
}

std::optional<F0Estimate> CepstrumAnalyzer::estimate(std::span<const double> frame) {
  return decide(analyze(frame));
}

std::optional<F0Estimate> CepstrumAnalyzer::decide(const CepstralPeak& p) const {
  if (p.rms < cfg_.rms_gate) return std::nullopt;
  if (!(p.prominence >= cfg_.cpp_threshold)) return std::nullopt;
  const double f0 = cfg_.sample_rate_hz / p.quefrency;
  if (f0 < cfg_.f0_min_hz || f0 > cfg_.f0_max_hz) return std::nullopt;
  return F0Estimate{f0, std::min(1.0, p.prominence / (2.0 * cfg_.cpp_threshold))};
}

std::optional<F0Estimate> estimate_f0(std::span<const double> frame, const DspConfig& cfg) {
  CepstrumAnalyzer analyzer(cfg);
  return analyzer.estimate(frame);
}

// ---------------------------------------------------------------------------
// Smoothing

std::vector<PitchFrame> smooth_pitch(std::span<const PitchFrame> frames) {
  std::vector<PitchFrame> out(frames.begin(), frames.end());
  std::size_t i = 0;
  while (i < frames.size()) {
    if (!frames[i].voiced()) {
      ++i;
      continue;
    }
    std::size_t end = i;
    while (end < frames.size() && frames[end].voiced()) ++end;
    const std::size_t len = end - i;
    for (std::size_t j = 0; j < len; ++j) {
      const std::size_t h = std::min<std::size_t>({2, j, len - 1 - j});
      if (h == 0) continue;
      auto window = frames.subspan(i + j - h, 2 * h + 1);
      out[i + j].f0_hz = window[median_index(window)].f0_hz;
    }
    i = end;
  }
  return out;
}

std::vector<PitchFrame> StreamingSmoother::push(const PitchFrame& frame) {
  std::size_t pos = 0;
  if (frame.voiced() && !buf_.empty() && buf_.back().frame.voiced()) pos = buf_.back().run_pos + 1;
  buf_.push_back({frame, pos});
  return drain(false);
}

std::vector<PitchFrame> StreamingSmoother::finish() { return drain(true); }

std::vector<PitchFrame> StreamingSmoother::drain(bool final) {
  std::vector<PitchFrame> out;
  while (next_ < buf_.size()) {
    const Item& cur = buf_[next_];
    if (cur.frame.voiced()) {
      std::size_t ahead = 0;
      bool run_ended = false;
      for (std::size_t k = next_ + 1; k < buf_.size() && ahead < 2; ++k) {
        if (!buf_[k].frame.voiced()) {
          run_ended = true;
          break;
        }
        ++ahead;
      }
      if (ahead < 2 && !run_ended && !final) break;

      PitchFrame smoothed = cur.frame;
      const std::size_t h = std::min<std::size_t>({2, cur.run_pos, ahead});
      if (h > 0) {
        std::vector<PitchFrame> window;
        for (std::size_t k = next_ - h; k <= next_ + h; ++k) window.push_back(buf_[k].frame);
        smoothed.f0_hz = window[median_index(window)].f0_hz;
      }
      out.push_back(smoothed);
    } else {
      out.push_back(cur.frame);
    }
    ++next_;
    while (next_ > 2) {
      buf_.pop_front();
      --next_;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// PitchTracker

PitchTracker::PitchTracker(const DspConfig& cfg) : cfg_(cfg), analyzer_(cfg) {}

PitchFrame PitchTracker::analyze_at(std::size_t k, std::span<const double> frame, std::size_t valid) {
  PitchFrame pf;
  pf.t_ms = frame_center_ms(k, cfg_);
  const CepstralPeak peak = analyzer_.analyze(frame);
  pf.rms = std::min(1.0, peak.rms);
  if (!frame_has_enough_signal(valid, cfg_)) return pf;
  if (auto est = analyzer_.decide(peak)) {
    pf.f0_hz = est->f0_hz;
    pf.confidence = est->confidence;
  }
  return pf;
}

std::vector<PitchFrame> PitchTracker::push(std::span<const double> samples) {
  buffer_.insert(buffer_.end(), samples.begin(), samples.end());
  total_ += samples.size();
  std::vector<PitchFrame> out;
  const std::size_t hop = static_cast<std::size_t>(cfg_.hop);
  const std::size_t len = static_cast<std::size_t>(cfg_.frame_len);
  while (next_frame_ * hop + len <= total_) {
    const std::size_t start = next_frame_ * hop - buffer_start_;
    out.push_back(analyze_at(next_frame_, std::span<const double>(buffer_).subspan(start, len), len));
    ++next_frame_;
  }
  // Drop samples no future frame needs.
  const std::size_t keep_from = next_frame_ * hop;
  if (keep_from > buffer_start_) {
    const std::size_t drop = std::min(keep_from - buffer_start_, buffer_.size());
    buffer_.erase(buffer_.begin(), buffer_.begin() + static_cast<std::ptrdiff_t>(drop));
    buffer_start_ += drop;
  }
  return out;
}

std::vector<PitchFrame> PitchTracker::finish() {
  std::vector<PitchFrame> out;
  if (total_ == 0) return out;
  const std::size_t hop = static_cast<std::size_t>(cfg_.hop);
  const std::size_t len = static_cast<std::size_t>(cfg_.frame_len);
  const std::size_t count = (total_ - 1) / hop + 1;
  std::vector<double> frame(len);
  for (; next_frame_ < count; ++next_frame_) {
    std::fill(frame.begin(), frame.end(), 0.0);
    const std::size_t start = next_frame_ * hop;
    const std::size_t n = std::min(len, total_ - start);
    std::copy_n(buffer_.begin() + static_cast<std::ptrdiff_t>(start - buffer_start_), n, frame.begin());
    out.push_back(analyze_at(next_frame_, frame, n));
  }
  return out;
}

std::vector<PitchFrame> track_pitch(std::span<const double> samples, const DspConfig& cfg) {
  CepstrumAnalyzer analyzer(cfg);
  std::vector<PitchFrame> raw;
  for (const AnalysisFrame& f : frame_stream(samples, cfg)) {
    PitchFrame pf;
    pf.t_ms = f.t_ms;
    const CepstralPeak peak = analyzer.analyze(f.samples);
    pf.rms = std::min(1.0, peak.rms);
    if (!frame_has_enough_signal(f.valid, cfg)) {
      raw.push_back(pf);
      continue;
    }
    if (auto est = analyzer.decide(peak)) {
      pf.f0_hz = est->f0_hz;
      pf.confidence = est->confidence;
    }
    raw.push_back(pf);
  }
  return smooth_pitch(raw);
}

void to_json(nlohmann::json& j, const DspConfig& c) {
  j = {{"sample_rate_hz", c.sample_rate_hz}, {"frame_len", c.frame_len},     {"hop", c.hop},
       {"f0_min_hz", c.f0_min_hz},           {"f0_max_hz", c.f0_max_hz},     {"cpp_threshold", c.cpp_threshold},
       {"rms_gate", c.rms_gate},             {"dynamic_range_db", c.dynamic_range_db}};
}

void from_json(const nlohmann::json& j, DspConfig& c) {
  DspConfig d;
  c.sample_rate_hz = j.value("sample_rate_hz", d.sample_rate_hz);
  c.frame_len = j.value("frame_len", d.frame_len);
  c.hop = j.value("hop", d.hop);
  c.f0_min_hz = j.value("f0_min_hz", d.f0_min_hz);
  c.f0_max_hz = j.value("f0_max_hz", d.f0_max_hz);
  c.cpp_threshold = j.value("cpp_threshold", d.cpp_threshold);
  c.rms_gate = j.value("rms_gate", d.rms_gate);
  c.dynamic_range_db = j.value("dynamic_range_db", d.dynamic_range_db);
}

void to_json(nlohmann::json& j, const PitchFrame& f) {
  j = {{"t_ms", f.t_ms},
       {"f0_hz", f.f0_hz ? nlohmann::json(*f.f0_hz) : nlohmann::json(nullptr)},
       {"confidence", f.confidence},
       {"rms", f.rms}};
}

void from_json(const nlohmann::json& j, PitchFrame& f) {
  j.at("t_ms").get_to(f.t_ms);
  const auto& hz = j.at("f0_hz");
  f.f0_hz = hz.is_null() ? std::nullopt : std::optional<double>(hz.get<double>());
  j.at("confidence").get_to(f.confidence);
  j.at("rms").get_to(f.rms);
}

}  // namespace pitchcoach
