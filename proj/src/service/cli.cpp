#include "pitchcoach/service/cli.h"

#include <csignal>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <pthread.h>
#include <set>
#include <sstream>
#include <thread>

#include "CLI11.hpp"
#include "pitchcoach/csv.h"
#include "pitchcoach/error.h"
#include "pitchcoach/service/http_server.h"
#include "pitchcoach/service/net.h"
#include "pitchcoach/service/pipeline.h"

namespace pitchcoach::service {

namespace {

struct Overrides {
  DspConfig dsp;
  ActuatorLayout layout;
};

std::string read_text_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void reject_unknown_keys(const nlohmann::json& j, const std::set<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw InputError("config: '" + where + "' must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) throw InputError("config: unknown key '" + where + "." + key + "'");
  }
}

Overrides load_overrides(const std::string& path) {
  Overrides o;
  if (path.empty()) return o;
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(read_text_file(path));
    reject_unknown_keys(j, {"dsp", "layout"}, "config");
    if (j.contains("dsp")) {
      reject_unknown_keys(j["dsp"],
                          {"sample_rate_hz", "frame_len", "hop", "f0_min_hz", "f0_max_hz", "cpp_threshold", "rms_gate",
                           "dynamic_range_db"},
                          "dsp");
      o.dsp = j["dsp"].get<DspConfig>();
    }
    if (j.contains("layout")) {
      reject_unknown_keys(j["layout"], {"n_actuators", "midi_lo", "midi_hi"}, "layout");
      o.layout = j["layout"].get<ActuatorLayout>();
    }
  } catch (const nlohmann::json::exception& e) {
    throw InputError("config " + path + ": " + e.what());
  }
  o.dsp.validate();
  o.layout.validate();
  return o;
}

// Blocks SIGINT/SIGTERM in the calling thread (and threads it spawns), runs
// `serve` on a worker and waits for a signal before calling `stop`.
template <class Server>
void run_until_signal(Server& server) {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
  std::thread worker([&] { server.run(); });
  int sig = 0;
  sigwait(&set, &sig);
  server.stop();
  worker.join();
}

std::string fixed4(double v) {
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f", v);
  return buf;
}

}  // namespace

GroupedData read_grouped_csv(std::string_view text, const std::string& metric) {
  const auto rows = parse_csv(text);
  if (rows.empty()) throw ParseError("empty CSV", 1);
  const auto& header = rows.front().cells;
  auto column = [&](const std::string& name) -> std::optional<std::size_t> {
    for (std::size_t i = 0; i < header.size(); ++i) {
      if (header[i] == name) return i;
    }
    return std::nullopt;
  };
  const auto group_col = column("group");
  auto value_col = column(metric);
  if (!value_col) value_col = column("value");
  if (!group_col || !value_col) {
    throw ParseError("header must contain 'group' and 'value' (or '" + metric + "') columns", rows.front().line);
  }
  GroupedData data;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const auto& row = rows[r];
    if (row.cells.size() != header.size()) {
      throw ParseError("expected " + std::to_string(header.size()) + " cells, got " + std::to_string(row.cells.size()),
                       row.line);
    }
    const std::string& label = row.cells[*group_col];
    if (label.empty()) throw ParseError("empty group label", row.line);
    const auto value = parse_number(row.cells[*value_col]);
    if (!value || !std::isfinite(*value)) {
      throw ParseError("value '" + row.cells[*value_col] + "' is not a finite number", row.line);
    }
    auto it = std::find_if(data.groups.begin(), data.groups.end(), [&](const Group& g) { return g.label == label; });
    if (it == data.groups.end()) {
      data.groups.push_back({label, {}});
      it = data.groups.end() - 1;
    }
    it->values.push_back(*value);
  }
  data.validate();
  return data;
}

std::string format_anova_table(const AnovaResult& r, const std::string& metric) {
  std::ostringstream out;
  const double ms_between = r.ss_between / static_cast<double>(r.df_between);
  const double ms_within = r.ss_within / static_cast<double>(r.df_within);
  char line[256];
  out << "metric: " << metric << "\n";
  std::snprintf(line, sizeof line, "%-10s %6s %14s %14s %12s %8s\n", "source", "df", "SS", "MS", "F", "p");
  out << line;
  std::snprintf(line, sizeof line, "%-10s %6zu %14s %14s %12s %8s\n", "between", r.df_between,
                fixed4(r.ss_between).c_str(), fixed4(ms_between).c_str(), fixed4(r.f_stat).c_str(),
                fixed4(r.p_value).c_str());
  out << line;
  std::snprintf(line, sizeof line, "%-10s %6zu %14s %14s\n", "within", r.df_within, fixed4(r.ss_within).c_str(),
                fixed4(ms_within).c_str());
  out << line;
  out << "\n";
  std::snprintf(line, sizeof line, "%-24s %12s %6s %8s %8s\n", "pair", "t", "df", "p", "p_adj");
  out << line;
  for (const PairwiseComparison& c : r.pairwise) {
    const std::string pair = c.label_a + " vs " + c.label_b;
    std::snprintf(line, sizeof line, "%-24s %12s %6zu %8s %8s\n", pair.c_str(), fixed4(c.t_stat).c_str(),
                  static_cast<std::size_t>(c.df), fixed4(c.raw_p).c_str(), fixed4(c.adjusted_p).c_str());
    out << line;
  }
  return out.str();
}

int run_cli(const std::vector<std::string>& args, std::istream& in, std::ostream& out, std::ostream& err) {
  CLI::App app{"pitch training engine: offline trials, scoring, statistics and the live service", "pitchcoach"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path, "JSON file with {\"dsp\": {...}, \"layout\": {...}} overrides");

  RunOptions run;
  std::string mode_text = "sync";
  std::string haptic_addr, trigger_addr;
  auto* run_cmd = app.add_subcommand("run", "run one trial over a recording and write its session log");
  run_cmd->add_option("--melody", run.melody_path, "melody JSON")->required();
  run_cmd->add_option("--mode", mode_text, "sync | terminal")->required();
  run_cmd->add_option("--input", run.input, "WAV file, or - for WAV / raw s16le mono on stdin")->required();
  run_cmd->add_option("--input-rate", run.raw_input_rate, "sample rate of raw PCM on stdin");
  run_cmd->add_option("--haptic-addr", haptic_addr, "host:port receiving haptic frames");
  run_cmd->add_option("--trigger-addr", trigger_addr, "host:port receiving trigger bytes");
  run_cmd->add_option("--out", run.out_dir, "output directory")->required();
  run_cmd->add_option("--created-utc", run.created_utc, "header timestamp (default: now)");
  run_cmd->add_option("--session-id", run.session_id, "session id (default: derived from inputs)");

  std::string score_path;
  auto* score_cmd = app.add_subcommand("score", "re-score a session log and print the report");
  score_cmd->add_option("session", score_path, "session .jsonl")->required();

  std::string metric, csv_path;
  auto* anova_cmd = app.add_subcommand("anova", "one-way ANOVA with Bonferroni pairwise tests");
  anova_cmd->add_option("--metric", metric, "metric name")->required();
  anova_cmd->add_option("--csv", csv_path, "CSV with group,value columns")->required();

  ServerOptions serve;
  int serve_port = 8080;
  std::string serve_haptic, serve_trigger;
  auto* serve_cmd = app.add_subcommand("serve", "HTTP query endpoints and the /live WebSocket");
  serve_cmd->add_option("--port", serve_port, "listen port (0: any)")->check(CLI::Range(0, 65535));
  serve_cmd->add_option("--data", serve.data_dir, "data directory")->required();
  serve_cmd->add_option("--bind", serve.address, "listen address");
  serve_cmd->add_option("--haptic-addr", serve_haptic, "host:port receiving haptic frames");
  serve_cmd->add_option("--trigger-addr", serve_trigger, "host:port receiving trigger bytes");

  std::string listen_addr;
  auto* sim_cmd = app.add_subcommand("simulate-device", "accept haptic frames and print actuator state");
  sim_cmd->add_option("--listen", listen_addr, "host:port")->required();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    std::ostringstream o, er;
    const int code = app.exit(e, o, er);
    out << o.str();
    err << er.str();
    return code == 0 ? kExitOk : kExitInput;
  }

  try {
    const Overrides cfg = load_overrides(config_path);
    if (*run_cmd) {
      run.mode = parse_mode(mode_text);
      run.dsp = cfg.dsp;
      run.layout = cfg.layout;
      if (!haptic_addr.empty()) run.haptic_addr = haptic_addr;
      if (!trigger_addr.empty()) run.trigger_addr = trigger_addr;
      const RunResult r = run_offline(run, in);
      out << nlohmann::json{{"session_id", r.session_id}, {"log", r.log_path.string()}, {"score", r.score}}.dump(2)
          << "\n";
    } else if (*score_cmd) {
      const SessionLog log = read_session_file(score_path);
      const ScoreReport fresh = score_trial(log.pitch_frames(), log.header.config.melody);
      out << nlohmann::json(fresh).dump(2) << "\n";
      if (const auto stored = log.stored_score(); stored && !(nlohmann::json(*stored) == nlohmann::json(fresh))) {
        err << "warning: stored score differs from the re-computed score\n";
        return kExitInput;
      }
    } else if (*anova_cmd) {
      const GroupedData data = read_grouped_csv(read_text_file(csv_path), metric);
      out << format_anova_table(one_way_anova(data), metric);
    } else if (*serve_cmd) {
      serve.port = static_cast<std::uint16_t>(serve_port);
      serve.hub.dsp = cfg.dsp;
      serve.hub.layout = cfg.layout;
      std::shared_ptr<TcpByteSink> haptic_sink, trigger_sink;
      if (!serve_haptic.empty()) {
        haptic_sink = std::make_shared<TcpByteSink>(parse_endpoint(serve_haptic));
        serve.hub.on_haptic = [haptic_sink](const HapticFrame& f) { haptic_sink->write(encode_haptic_frame(f)); };
      }
      if (!serve_trigger.empty()) {
        trigger_sink = std::make_shared<TcpByteSink>(parse_endpoint(serve_trigger));
        serve.hub.on_trigger = [trigger_sink](std::uint8_t code) {
          trigger_sink->write(std::span<const std::uint8_t>(&code, 1));
        };
      }
      std::filesystem::create_directories(serve.data_dir);
      HttpServer server(serve);
      err << "listening on " << serve.address << ":" << server.port() << "\n" << std::flush;
      run_until_signal(server);
    } else if (*sim_cmd) {
      DeviceSimulatorServer server(parse_endpoint(listen_addr), out);
      err << "simulator listening on port " << server.port() << "\n" << std::flush;
      run_until_signal(server);
      err << server.frames() << " frames, " << server.corrupt_frames() << " corrupt\n";
    }
  } catch (const InputError& e) {
    err << "error: " << e.what() << "\n";
    return kExitInput;
  } catch (const std::exception& e) {
    err << "internal error: " << e.what() << "\n";
    return kExitInternal;
  }
  return kExitOk;
}

}  // namespace pitchcoach::service
