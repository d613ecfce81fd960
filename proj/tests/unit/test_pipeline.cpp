#include <sstream>

#include "doctest.h"
#include "pitchcoach/error.h"
#include "pitchcoach/service/audio.h"
#include "pitchcoach/service/pipeline.h"
#include "scratch.h"
#include "synth.h"
#include "wav.h"

using namespace pitchcoach;
using namespace pitchcoach::service;
using testsupport::ScratchDir;

namespace {

std::filesystem::path write_fixture(const ScratchDir& dir, const MelodyTrack& m) {
  const auto p = dir / "melody.json";
  testsupport::write_file(p, nlohmann::json(m).dump(2));
  return p;
}

RunOptions options_for(const ScratchDir& dir, const MelodyTrack& m, FeedbackMode mode) {
  RunOptions o;
  o.melody_path = write_fixture(dir, m);
  o.mode = mode;
  o.out_dir = dir / "out";
  o.created_utc = "2026-03-01T12:00:00.000Z";
  return o;
}

}  // namespace

TEST_CASE("pipeline emits records in time order and scores the trial") {
  ScratchDir dir("pipeline_order");
  const auto m = testsupport::twelve_note_fixture();
  SessionHeader h;
  h.session_id = "p1";
  h.created_utc = "2026-03-01T12:00:00.000Z";
  h.config.melody = m;
  h.config.mode = FeedbackMode::synchronous;

  std::vector<SessionRecord> records;
  std::vector<HapticFrame> haptics;
  std::vector<std::uint8_t> triggers;
  std::vector<TrialPhase> phases;
  TrialSinks sinks;
  sinks.on_record = [&](const SessionRecord& r) { records.push_back(r); };
  sinks.on_haptic = [&](const HapticFrame& f) { haptics.push_back(f); };
  sinks.on_trigger = [&](std::uint8_t c) { triggers.push_back(c); };
  sinks.on_state = [&](const TrialState& s, double) { phases.push_back(s.phase); };

  TrialPipeline p(h, dir / "p1.jsonl", sinks);
  CHECK_THROWS_AS(p.push_samples(std::vector<double>(10, 0.0)), StateError);
  p.start();
  const auto audio = testsupport::render_melody(m, 0.0, 0.5);
  for (std::size_t i = 0; i < audio.size(); i += 123) {
    p.push_samples(std::span<const double>(audio).subspan(i, std::min<std::size_t>(123, audio.size() - i)));
  }
  const ScoreReport score = p.stop();
  CHECK_THROWS_AS(p.stop(), StateError);

  CHECK(triggers == std::vector<std::uint8_t>{1, 2});
  CHECK(phases == std::vector<TrialPhase>{TrialPhase::phonating, TrialPhase::done});
  CHECK_FALSE(haptics.empty());
  for (std::size_t i = 1; i < records.size(); ++i) CHECK(record_time(records[i - 1]) <= record_time(records[i]));

  CHECK(score.scored_note_count == 12);
  CHECK(score.pitch_deviation_cents < 5.0);
  CHECK(score.contour_accuracy == 1.0);

  const SessionLog log = read_session_file(dir / "p1.jsonl");
  CHECK(log.records == records);
  CHECK(log.stored_score() == score);
  CHECK(score_trial(log.pitch_frames(), m) == score);
}

TEST_CASE("offline run is byte-identical across runs and block sizes of input") {
  ScratchDir dir("pipeline_det");
  const auto m = testsupport::twelve_note_fixture();
  auto o = options_for(dir, m, FeedbackMode::terminal);
  const auto wav = encode_wav(testsupport::add_noise(testsupport::render_melody(m, 30.0, 0.4), 25, 3), 10000);
  const auto wav_path = dir / "take.wav";
  testsupport::write_file(wav_path, std::string(wav.begin(), wav.end()));
  o.input = wav_path.string();

  std::istringstream none;
  o.out_dir = dir / "a";
  const RunResult a = run_offline(o, none);
  o.out_dir = dir / "b";
  const RunResult b = run_offline(o, none);
  CHECK(a.session_id == b.session_id);
  CHECK(testsupport::read_file(a.log_path) == testsupport::read_file(b.log_path));

  // The same WAV on standard input.
  o.out_dir = dir / "c";
  o.input = "-";
  std::istringstream in(std::string(wav.begin(), wav.end()));
  const RunResult c = run_offline(o, in);
  CHECK(testsupport::read_file(c.log_path) == testsupport::read_file(a.log_path));

  const SessionLog log = read_session_file(a.log_path);
  CHECK(score_trial(log.pitch_frames(), log.header.config.melody) == *log.stored_score());
  CHECK(*log.stored_score() == a.score);

  // A second run into the same directory refuses to overwrite.
  o.out_dir = dir / "a";
  o.input = wav_path.string();
  CHECK_THROWS_AS(run_offline(o, none), InputError);
}

TEST_CASE("raw PCM on standard input at another rate") {
  ScratchDir dir("pipeline_raw");
  MelodyTrack m{"short", "", {{0, 400, 57}, {600, 400, 60}}};
  auto o = options_for(dir, m, FeedbackMode::synchronous);
  o.input = "-";
  o.raw_input_rate = 16000;
  const auto audio = testsupport::render_melody(m, 0.0, 0.5, 200.0, 16000);
  const auto bytes = testsupport::s16le(audio);
  std::istringstream in(std::string(bytes.begin(), bytes.end()));
  const RunResult r = run_offline(o, in);
  CHECK(r.score.scored_note_count == 2);
  CHECK(r.score.pitch_deviation_cents < 10.0);
}

TEST_CASE("session ids depend on every input") {
  SessionConfig c;
  c.melody = testsupport::twelve_note_fixture();
  const std::vector<double> x = {0.1, 0.2};
  const auto base = derive_session_id(c, x, "t");
  CHECK(base == derive_session_id(c, x, "t"));
  CHECK(base != derive_session_id(c, x, "u"));
  CHECK(base != derive_session_id(c, std::vector<double>{0.1, 0.3}, "t"));
  SessionConfig c2 = c;
  c2.mode = FeedbackMode::terminal;
  CHECK(base != derive_session_id(c2, x, "t"));
}

TEST_CASE("timestamps are ISO-8601 UTC") {
  const std::string t = utc_now_iso8601();
  CHECK(t.size() == 24);
  CHECK(t[10] == 'T');
  CHECK(t.back() == 'Z');
}

TEST_CASE("missing inputs are input errors") {
  ScratchDir dir("pipeline_missing");
  auto o = options_for(dir, testsupport::twelve_note_fixture(), FeedbackMode::synchronous);
  o.input = (dir / "nope.wav").string();
  std::istringstream none;
  CHECK_THROWS_AS(run_offline(o, none), InputError);
  o.melody_path = dir / "nope.json";
  CHECK_THROWS_AS(run_offline(o, none), InputError);
}
