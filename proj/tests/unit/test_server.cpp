#include <boost/asio.hpp>
#include <boost/beast/core.hpp>
#include <boost/beast/websocket.hpp>
#include <sstream>
#include <thread>

#include "doctest.h"
#include "httplib.h"
#include "pitchcoach/error.h"
#include "pitchcoach/service/audio.h"
#include "pitchcoach/service/http_server.h"
#include "pitchcoach/service/net.h"
#include "pitchcoach/service/pipeline.h"
#include "pitchcoach/session.h"
#include "scratch.h"
#include "synth.h"
#include "wav.h"

using namespace pitchcoach;
using namespace pitchcoach::service;
using testsupport::ScratchDir;
namespace beast = boost::beast;
namespace websocket = beast::websocket;
using tcp = boost::asio::ip::tcp;

namespace {

class RunningServer {
 public:
  explicit RunningServer(const std::filesystem::path& data, std::size_t queue_limit = 256) {
    ServerOptions o;
    o.port = 0;
    o.data_dir = data;
    o.queue_limit = queue_limit;
    o.hub.clock = [] { return std::string("2026-07-01T00:00:00.000Z"); };
    server_ = std::make_unique<HttpServer>(o);
    thread_ = std::thread([this] { server_->run(); });
  }
  ~RunningServer() {
    server_->stop();
    thread_.join();
  }
  std::uint16_t port() const { return server_->port(); }
  HttpServer& server() { return *server_; }

 private:
  std::unique_ptr<HttpServer> server_;
  std::thread thread_;
};

class WsClient {
 public:
  explicit WsClient(std::uint16_t port) : ws_(io_) {
    tcp::resolver resolver(io_);
    boost::asio::connect(ws_.next_layer(), resolver.resolve("127.0.0.1", std::to_string(port)));
    ws_.handshake("127.0.0.1", "/live");
  }
  void send_text(const std::string& s) {
    ws_.text(true);
    ws_.write(boost::asio::buffer(s));
  }
  void send_binary(std::span<const std::uint8_t> b) {
    ws_.binary(true);
    ws_.write(boost::asio::buffer(b.data(), b.size()));
  }
  StreamMessage read() {
    beast::flat_buffer buf;
    ws_.read(buf);
    return StreamMessage::from_line(beast::buffers_to_string(buf.data()));
  }
  /// Reads until a message of `type` arrives; returns everything read.
  std::vector<StreamMessage> read_until(StreamType type) {
    std::vector<StreamMessage> out;
    do {
      out.push_back(read());
    } while (out.back().type != type);
    return out;
  }
  void close() { ws_.close(websocket::close_code::normal); }

 private:
  boost::asio::io_context io_;
  websocket::stream<tcp::socket> ws_;
};

std::string run_fixture_session(const ScratchDir& dir) {
  const auto m = testsupport::twelve_note_fixture();
  testsupport::write_file(dir / "melodies/fixture12.json", nlohmann::json(m).dump());
  RunOptions o;
  o.melody_path = dir / "melodies/fixture12.json";
  o.mode = FeedbackMode::terminal;
  o.out_dir = dir.path();
  o.created_utc = "2026-07-01T00:00:00.000Z";
  const auto wav = encode_wav(testsupport::render_melody(m, 0.0, 0.5), 10000);
  testsupport::write_file(dir / "take.wav", std::string(wav.begin(), wav.end()));
  o.input = (dir / "take.wav").string();
  std::istringstream none;
  return run_offline(o, none).session_id;
}

}  // namespace

TEST_CASE("empty data directory lists nothing") {
  ScratchDir dir("server_empty");
  RunningServer s(dir.path());
  httplib::Client cli("127.0.0.1", s.port());
  auto r = cli.Get("/sessions");
  REQUIRE(r);
  CHECK(r->status == 200);
  CHECK(nlohmann::json::parse(r->body) == nlohmann::json::array());
  CHECK(r->get_header_value("Access-Control-Allow-Origin") == "*");
  r = cli.Get("/melodies");
  REQUIRE(r);
  CHECK(nlohmann::json::parse(r->body) == nlohmann::json::array());
}

TEST_CASE("query endpoints serve stored sessions") {
  ScratchDir dir("server_query");
  const std::string id = run_fixture_session(dir);
  RunningServer s(dir.path());
  httplib::Client cli("127.0.0.1", s.port());

  auto r = cli.Get("/sessions");
  REQUIRE(r);
  const auto list = nlohmann::json::parse(r->body);
  REQUIRE(list.size() == 1);
  CHECK(list[0]["session_id"] == id);
  CHECK(list[0]["melody_id"] == "fixture12");
  CHECK(list[0]["mode"] == "terminal");
  CHECK(list[0]["complete"] == true);

  r = cli.Get("/sessions/" + id + "/log");
  REQUIRE(r);
  CHECK(r->status == 200);
  CHECK(r->body == testsupport::read_file(dir / (id + ".jsonl")));

  r = cli.Get("/sessions/" + id + "/score");
  REQUIRE(r);
  CHECK(r->status == 200);
  // Verbatim: the body equals the score object of the log's end record.
  const SessionLog log = read_session_file(dir / (id + ".jsonl"));
  const auto body = nlohmann::json::parse(r->body);
  CHECK(body.get<ScoreReport>() == *log.stored_score());
  std::istringstream lines(testsupport::read_file(dir / (id + ".jsonl")));
  std::string line, stored;
  while (std::getline(lines, line)) {
    const auto j = nlohmann::json::parse(line);
    if (j.value("event", "") == "end") stored = j["score"].dump();
  }
  CHECK(r->body == stored);

  r = cli.Get("/melodies");
  REQUIRE(r);
  const auto melodies = nlohmann::json::parse(r->body);
  REQUIRE(melodies.size() == 1);
  CHECK(melodies[0]["id"] == "fixture12");
  CHECK(melodies[0]["notes"].size() == 12);
}

TEST_CASE("unknown ids are 404") {
  ScratchDir dir("server_404");
  RunningServer s(dir.path());
  httplib::Client cli("127.0.0.1", s.port());
  for (const char* path : {"/sessions/nope/log", "/sessions/nope/score", "/sessions/..%2F..%2Fetc/log", "/elsewhere"}) {
    auto r = cli.Get(path);
    REQUIRE(r);
    CHECK(r->status == 404);
    CHECK(nlohmann::json::parse(r->body).contains("error"));
  }
  auto r = cli.Post("/sessions", "", "text/plain");
  REQUIRE(r);
  CHECK(r->status == 405);
}

TEST_CASE("live trial over the WebSocket") {
  ScratchDir dir("server_live");
  const auto m = testsupport::twelve_note_fixture();
  testsupport::write_file(dir / "melodies/fixture12.json", nlohmann::json(m).dump());
  RunningServer s(dir.path());

  WsClient ui(s.port());
  WsClient observer(s.port());
  ui.send_text(R"({"type":"hello","client":"ui"})");
  CHECK(ui.read().payload["phase"] == "idle");
  observer.send_text(R"({"type":"hello","client":"observer"})");
  CHECK(observer.read().payload["phase"] == "idle");

  ui.send_text(R"({"type":"stop_trial"})");
  const auto err = ui.read();
  CHECK(err.type == StreamType::error);

  ui.send_text(R"({"type":"start_trial","melody_id":"fixture12","mode":"sync"})");
  const auto first = ui.read();
  CHECK(first.type == StreamType::trial_state);
  CHECK(first.payload["phase"] == "phonating");

  observer.send_text(R"({"type":"start_trial","melody_id":"fixture12","mode":"sync"})");

  const auto pcm = testsupport::s16le(testsupport::render_melody(m, 0.0, 0.5));
  for (std::size_t i = 0; i < pcm.size(); i += 2000) {
    ui.send_binary(std::span<const std::uint8_t>(pcm).subspan(i, std::min<std::size_t>(2000, pcm.size() - i)));
  }
  ui.send_text(R"({"type":"stop_trial"})");
  const auto stream = ui.read_until(StreamType::score_report);
  const auto done = ui.read();
  CHECK(done.type == StreamType::trial_state);
  CHECK(done.payload["phase"] == "done");

  double last = 0.0;
  std::size_t frames = 0, visual = 0;
  for (const auto& msg : stream) {
    REQUIRE(msg.t_ms.has_value());
    CHECK(*msg.t_ms >= last);
    last = *msg.t_ms;
    frames += msg.type == StreamType::pitch_frame;
    visual += msg.type == StreamType::feedback_event && msg.payload["channel"] == "visual";
  }
  // The client does not read while sending, so pitch frames may be shed;
  // visual feedback is never shed.
  const std::size_t expected_frames = (pcm.size() / 2 - 512) / 100 + 1;
  CHECK(frames + s.server().dropped_messages() >= expected_frames);
  CHECK(visual > 400);
  const auto score = stream.back().payload["score"].get<ScoreReport>();
  CHECK(score.scored_note_count == 12);

  // The observer gets the broadcast, after its own error reply.
  const auto seen = observer.read_until(StreamType::score_report);
  bool got_error = false;
  for (const auto& msg : seen) got_error = got_error || msg.type == StreamType::error;
  CHECK(got_error);
  CHECK(seen.back().payload["score"].get<ScoreReport>() == score);

  // And the session is queryable.
  const auto id = done.payload["session_id"].get<std::string>();
  httplib::Client cli("127.0.0.1", s.port());
  auto r = cli.Get("/sessions/" + id + "/score");
  REQUIRE(r);
  CHECK(nlohmann::json::parse(r->body).get<ScoreReport>() == score);
  ui.close();
  observer.close();
}

TEST_CASE("a stalled consumer does not stall the trial") {
  ScratchDir dir("server_stall");
  const auto m = testsupport::twelve_note_fixture();
  testsupport::write_file(dir / "melodies/fixture12.json", nlohmann::json(m).dump());
  RunningServer s(dir.path(), 8);

  WsClient ui(s.port());
  WsClient stalled(s.port());
  stalled.send_text(R"({"type":"hello"})");
  CHECK(stalled.read().type == StreamType::trial_state);
  // From here on `stalled` never reads until the end.
  ui.send_text(R"({"type":"hello"})");
  ui.read();
  ui.send_text(R"({"type":"start_trial","melody_id":"fixture12","mode":"sync"})");
  const auto pcm = testsupport::s16le(testsupport::render_melody(m, 0.0, 0.5));
  for (int rep = 0; rep < 1; ++rep) {
    for (std::size_t i = 0; i < pcm.size(); i += 4000) {
      ui.send_binary(std::span<const std::uint8_t>(pcm).subspan(i, std::min<std::size_t>(4000, pcm.size() - i)));
    }
  }
  ui.send_text(R"({"type":"stop_trial"})");
  const auto got = ui.read_until(StreamType::score_report);
  CHECK(got.back().payload["score"]["scored_note_count"] == 12);

  // The stalled client still receives every non-droppable message.
  const auto late = stalled.read_until(StreamType::score_report);
  std::size_t triggers = 0;
  for (const auto& msg : late) triggers += msg.type == StreamType::feedback_event && msg.payload["channel"] == "trigger";
  CHECK(triggers == 2);
  CHECK(late.back().payload["score"]["scored_note_count"] == 12);
}

TEST_CASE("outbound queue drops only the oldest pitch frames") {
  OutboundQueue q(3);
  auto pf = [](double t) { return pitch_frame_message(PitchFrame{t, 200.0, 1, 0.1}); };
  auto fe = [](double t) { return feedback_event_message(FeedbackEvent{t, FeedbackMode::synchronous, TriggerMarker{1}}); };
  CHECK(q.push(pf(0)));
  CHECK(q.push(fe(1)));
  CHECK(q.push(pf(2)));
  // Full: the oldest pitch frame (t=0) goes.
  CHECK(q.push(pf(3)));
  CHECK(q.dropped() == 1);
  CHECK(q.size() == 3);
  CHECK(nlohmann::json::parse(q.begin_write())["t_ms"] == 1.0);
  // The in-flight entry is protected; t=2 is dropped for the new frame.
  CHECK(q.push(pf(4)));
  CHECK(q.dropped() == 2);
  q.finish_write();
  CHECK(nlohmann::json::parse(q.begin_write())["t_ms"] == 3.0);
  q.finish_write();
  // Non-droppable messages exceed the limit rather than being lost.
  OutboundQueue strict(2);
  for (int i = 0; i < 5; ++i) CHECK(strict.push(fe(i)));
  CHECK(strict.size() == 5);
  CHECK(strict.dropped() == 0);
  CHECK_FALSE(strict.push(pf(9)));
  CHECK(strict.dropped() == 1);
}

TEST_CASE("haptic frames over TCP reach the simulator") {
  std::ostringstream dump;
  DeviceSimulatorServer sim(Endpoint{"127.0.0.1", 0}, dump);
  std::thread t([&] { sim.run(); });
  {
    TcpByteSink sink(Endpoint{"127.0.0.1", sim.port()});
    sink.write(encode_haptic_frame({0, 3, 1.0, 60000}));
    auto bad = encode_haptic_frame({0, 4, 1.0, 60000});
    bad[3] ^= 1;
    sink.write(bad);
    sink.write(encode_haptic_frame({0, 7, 128 / 255.0, 60000}));
  }
  for (int i = 0; i < 200 && sim.frames() < 2; ++i) std::this_thread::sleep_for(std::chrono::milliseconds(5));
  // A second writer is served after the first disconnects.
  {
    TcpByteSink sink(Endpoint{"127.0.0.1", sim.port()});
    sink.write(encode_haptic_frame({0, 3, 0.0, 0}));
  }
  for (int i = 0; i < 200 && sim.frames() < 3; ++i) std::this_thread::sleep_for(std::chrono::milliseconds(5));
  sim.stop();
  t.join();
  CHECK(sim.frames() == 3);
  CHECK(sim.corrupt_frames() == 1);

  std::istringstream lines(dump.str());
  std::vector<std::pair<int, std::string>> rows;
  std::string line;
  while (std::getline(lines, line)) {
    std::istringstream f(line);
    double t_ms, remaining;
    int act;
    std::string intensity;
    f >> t_ms >> act >> intensity >> remaining;
    rows.emplace_back(act, intensity);
  }
  // After frame 1: {3}; after frame 2: {3, 7}; after frame 3 (3 off): {7}.
  REQUIRE(rows.size() == 4);
  CHECK(rows[0] == std::pair<int, std::string>{3, "1.0000"});
  CHECK(rows[1] == std::pair<int, std::string>{3, "1.0000"});
  CHECK(rows[2] == std::pair<int, std::string>{7, "0.5020"});
  CHECK(rows[3] == std::pair<int, std::string>{7, "0.5020"});
}

TEST_CASE("endpoint parsing") {
  CHECK(parse_endpoint("localhost:9000").host == "localhost");
  CHECK(parse_endpoint("localhost:9000").port == 9000);
  CHECK(parse_endpoint(":7").host == "127.0.0.1");
  CHECK(parse_endpoint("7").port == 7);
  CHECK(parse_endpoint("[::1]:80").host == "::1");
  CHECK_THROWS_AS(parse_endpoint("host:"), InputError);
  CHECK_THROWS_AS(parse_endpoint("host:99999"), InputError);
  CHECK_THROWS_AS(parse_endpoint("host:12ab"), InputError);
}

TEST_CASE("unreachable haptic address is an input error") {
  // Bind then close to find a port nobody listens on.
  boost::asio::io_context io;
  tcp::acceptor a(io, tcp::endpoint(tcp::v4(), 0));
  const auto port = a.local_endpoint().port();
  a.close();
  CHECK_THROWS_AS(TcpByteSink(Endpoint{"127.0.0.1", port}), InputError);
}
