#include "doctest.h"
#include "pitchcoach/error.h"
#include "pitchcoach/service/protocol.h"

using namespace pitchcoach;
using namespace pitchcoach::service;

TEST_CASE("control messages parse") {
  const auto hello = parse_control(R"({"type":"hello","sample_rate":16000,"client":"ui"})");
  REQUIRE(std::holds_alternative<Hello>(hello));
  CHECK(std::get<Hello>(hello).sample_rate == 16000);
  CHECK(std::get<Hello>(parse_control(R"({"type":"hello"})")).sample_rate == 10000);
  const auto start = parse_control(R"({"type":"start_trial","melody_id":"twinkle","mode":"terminal"})");
  REQUIRE(std::holds_alternative<StartTrial>(start));
  CHECK(std::get<StartTrial>(start).melody_id == "twinkle");
  CHECK(std::get<StartTrial>(start).mode == FeedbackMode::terminal);
  CHECK(std::holds_alternative<StopTrial>(parse_control(R"({"type":"stop_trial"})")));
}

TEST_CASE("bad control messages are rejected") {
  CHECK_THROWS_AS(parse_control(R"({"type":"dance"})"), InputError);
  CHECK_THROWS_AS(parse_control(R"({"type":"start_trial","mode":"sync"})"), InputError);
  CHECK_THROWS_AS(parse_control(R"({"type":"start_trial","melody_id":"x","mode":"loud"})"), InputError);
  CHECK_THROWS_AS(parse_control(R"({"type":"hello","sample_rate":0})"), InputError);
  CHECK_THROWS_AS(parse_control("not json"), InputError);
  CHECK_THROWS_AS(parse_control("[1,2]"), InputError);
}

TEST_CASE("control round trip") {
  for (const ControlMessage& m : {ControlMessage{Hello{22050, "x"}}, ControlMessage{StartTrial{"m1", FeedbackMode::synchronous}},
                                  ControlMessage{StopTrial{}}}) {
    CHECK(serialize_control(parse_control(serialize_control(m))) == serialize_control(m));
  }
}

TEST_CASE("stream message lines") {
  const auto pf = pitch_frame_message(PitchFrame{120, 440.0, 0.9, 0.2});
  CHECK(pf.droppable());
  const auto j = nlohmann::json::parse(pf.to_line());
  CHECK(j["type"] == "pitch_frame");
  CHECK(j["t_ms"] == 120.0);
  CHECK(j["payload"]["f0_hz"] == 440.0);
  CHECK(j["payload"]["midi"] == 69.0);
  CHECK(pf.to_line().find('\n') == std::string::npos);

  const auto unv = nlohmann::json::parse(pitch_frame_message(PitchFrame{130, std::nullopt, 0, 0}).to_line());
  CHECK(unv["payload"]["midi"].is_null());

  const auto fe = feedback_event_message(FeedbackEvent{5, FeedbackMode::synchronous, TriggerMarker{1}});
  CHECK_FALSE(fe.droppable());
  CHECK(nlohmann::json::parse(fe.to_line())["payload"]["channel"] == "trigger");

  ScoreReport s;
  s.rhythm_error_ms = 12;
  const auto sr = score_report_message(900, "abc", s);
  CHECK_FALSE(sr.droppable());
  const auto back = StreamMessage::from_line(sr.to_line());
  CHECK(back.type == StreamType::score_report);
  CHECK(back.t_ms == 900.0);
  CHECK(back.payload["score"].get<ScoreReport>() == s);
  CHECK(back.payload["session_id"] == "abc");

  const auto ts = nlohmann::json::parse(trial_state_message(TrialState{}).to_line());
  CHECK(ts["payload"]["phase"] == "idle");
  CHECK(ts["t_ms"].is_null());
  const auto err = StreamMessage::from_line(error_message("boom").to_line());
  CHECK(err.type == StreamType::error);
  CHECK(err.payload["message"] == "boom");
  CHECK_THROWS_AS(StreamMessage::from_line(R"({"type":"weird","payload":{}})"), InputError);
}
