#include "pitchcoach/service/pipeline.h"

#include <chrono>
#include <cstdio>
#include <cstring>
#include <ctime>
#include <fstream>
#include <iterator>
#include <memory>

#include "pitchcoach/error.h"
#include "pitchcoach/service/audio.h"
#include "pitchcoach/service/net.h"

namespace pitchcoach::service {

namespace {

class Fnv1a {
 public:
  void add(const void* data, std::size_t n) {
    const auto* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
      h_ ^= p[i];
      h_ *= 0x100000001b3ULL;
    }
  }
  void add(const std::string& s) { add(s.data(), s.size()); }
  std::uint64_t value() const { return h_; }

 private:
  std::uint64_t h_ = 0xcbf29ce484222325ULL;
};

std::vector<std::uint8_t> read_all(std::istream& in) {
  return std::vector<std::uint8_t>(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
}

}  // namespace

TrialPipeline::TrialPipeline(SessionHeader header, const std::filesystem::path& log_path, TrialSinks sinks)
    : header_(std::move(header)),
      writer_(SessionWriter::create(log_path, header_)),
      sinks_(std::move(sinks)),
      controller_(header_.config.melody, header_.config.mode, header_.config.layout),
      tracker_(header_.config.dsp) {}

void TrialPipeline::emit(const SessionRecord& record) {
  writer_.append(record);
  if (sinks_.on_record) sinks_.on_record(record);
  if (const auto* e = std::get_if<FeedbackEvent>(&record)) {
    if (const auto* h = std::get_if<HapticFrame>(&e->payload); h && sinks_.on_haptic) sinks_.on_haptic(*h);
    if (const auto* t = std::get_if<TriggerMarker>(&e->payload); t && sinks_.on_trigger) sinks_.on_trigger(t->code);
  }
}

void TrialPipeline::emit_events(const std::vector<FeedbackEvent>& events) {
  for (const FeedbackEvent& e : align(events)) emit(e);
}

void TrialPipeline::start() {
  auto events = controller_.start_trial(0.0);
  emit(SegmentMark{0.0, false, std::nullopt});
  emit_events(events);
  if (sinks_.on_state) sinks_.on_state(controller_.state(), 0.0);
}

void TrialPipeline::handle_smoothed(const PitchFrame& frame) {
  frames_.push_back(frame);
  emit(frame);
  emit_events(controller_.on_pitch_frame(frame));
}

void TrialPipeline::handle_frames(const std::vector<PitchFrame>& raw) {
  for (const PitchFrame& f : raw) {
    for (const PitchFrame& s : smoother_.push(f)) handle_smoothed(s);
  }
}

void TrialPipeline::push_samples(std::span<const double> samples) {
  if (controller_.state().phase != TrialPhase::phonating) {
    throw StateError("push_samples: trial is not phonating");
  }
  handle_frames(tracker_.push(samples));
}

ScoreReport TrialPipeline::stop() {
  if (controller_.state().phase != TrialPhase::phonating) throw StateError("stop: trial is not phonating");
  handle_frames(tracker_.finish());
  for (const PitchFrame& s : smoother_.finish()) handle_smoothed(s);

  double end_ms = 1000.0 * static_cast<double>(tracker_.samples_seen()) / header_.config.dsp.sample_rate_hz;
  if (!frames_.empty()) end_ms = std::max(end_ms, frames_.back().t_ms);

  const ScoreReport score = score_trial(frames_, header_.config.melody);
  auto events = controller_.end_segment(end_ms, score);
  emit(SegmentMark{end_ms, true, score});
  emit_events(events);
  if (sinks_.on_state) sinks_.on_state(controller_.state(), end_ms);
  return score;
}

std::string derive_session_id(const SessionConfig& config, std::span<const double> samples,
                              const std::string& created_utc) {
  Fnv1a h;
  h.add(nlohmann::json(config).dump());
  h.add(created_utc);
  h.add(samples.data(), samples.size_bytes());
  char buf[24];
  std::snprintf(buf, sizeof buf, "s%016llx", static_cast<unsigned long long>(h.value()));
  return buf;
}

std::string utc_now_iso8601() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t secs = std::chrono::system_clock::to_time_t(now);
  const auto ms = std::chrono::duration_cast<std::chrono::milliseconds>(now.time_since_epoch()).count() % 1000;
  std::tm tm{};
  gmtime_r(&secs, &tm);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%03dZ", tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday,
                tm.tm_hour, tm.tm_min, tm.tm_sec, static_cast<int>(ms));
  return buf;
}

RunResult run_offline(const RunOptions& options, std::istream& stdin_stream) {
  options.dsp.validate();
  options.layout.validate();

  SessionConfig config;
  config.dsp = options.dsp;
  config.layout = options.layout;
  config.mode = options.mode;
  config.melody = load_melody_file(options.melody_path.string());

  std::vector<double> samples;
  if (options.input == "-") {
    const std::vector<std::uint8_t> bytes = read_all(stdin_stream);
    if (bytes.size() >= 4 && std::memcmp(bytes.data(), "RIFF", 4) == 0) {
      samples = ingest_wav(bytes);
    } else {
      samples = ingest_raw_pcm(bytes, options.raw_input_rate);
    }
  } else {
    std::ifstream in(options.input, std::ios::binary);
    if (!in) throw InputError("cannot open input: " + options.input);
    samples = ingest_wav(read_all(in));
  }

  SessionHeader header;
  header.config = config;
  header.created_utc = options.created_utc.empty() ? utc_now_iso8601() : options.created_utc;
  header.session_id =
      options.session_id.empty() ? derive_session_id(config, samples, header.created_utc) : options.session_id;

  std::filesystem::create_directories(options.out_dir);
  const auto log_path = options.out_dir / (header.session_id + ".jsonl");

  std::unique_ptr<TcpByteSink> haptic_out;
  std::unique_ptr<TcpByteSink> trigger_out;
  if (options.haptic_addr) haptic_out = std::make_unique<TcpByteSink>(parse_endpoint(*options.haptic_addr));
  if (options.trigger_addr) trigger_out = std::make_unique<TcpByteSink>(parse_endpoint(*options.trigger_addr));

  TrialSinks sinks;
  if (haptic_out) {
    sinks.on_haptic = [&](const HapticFrame& f) {
      const HapticBytes b = encode_haptic_frame(f);
      haptic_out->write(b);
    };
  }
  if (trigger_out) {
    sinks.on_trigger = [&](std::uint8_t code) { trigger_out->write(std::span<const std::uint8_t>(&code, 1)); };
  }

  TrialPipeline pipeline(header, log_path, std::move(sinks));
  pipeline.start();
  // Feed in hop-sized blocks, as a live capture would arrive.
  const std::size_t block = static_cast<std::size_t>(config.dsp.hop);
  for (std::size_t i = 0; i < samples.size(); i += block) {
    pipeline.push_samples(std::span<const double>(samples).subspan(i, std::min(block, samples.size() - i)));
  }
  RunResult result;
  result.score = pipeline.stop();
  result.session_id = header.session_id;
  result.log_path = log_path;
  return result;
}

}  // namespace pitchcoach::service
