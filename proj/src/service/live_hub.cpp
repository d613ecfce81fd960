#include "pitchcoach/service/live_hub.h"

#include <filesystem>

#include "pitchcoach/error.h"

namespace pitchcoach::service {

struct LiveHub::Trial {
  ConnectionId owner = 0;
  std::unique_ptr<TrialPipeline> pipeline;
};

LiveHub::LiveHub(DataStore store, HubOptions options) : store_(std::move(store)), options_(std::move(options)) {
  options_.dsp.validate();
  options_.layout.validate();
  if (!options_.clock) options_.clock = utc_now_iso8601;
}

LiveHub::~LiveHub() = default;

ConnectionId LiveHub::connect() {
  const ConnectionId id = next_id_++;
  connections_[id];
  return id;
}

bool LiveHub::greeted(ConnectionId id) const {
  const auto it = connections_.find(id);
  return it != connections_.end() && it->second.greeted;
}

std::optional<std::string> LiveHub::active_session() const {
  if (!trial_) return std::nullopt;
  return trial_->pipeline->header().session_id;
}

std::vector<Outgoing> LiveHub::disconnect(ConnectionId id) {
  std::vector<Outgoing> out;
  if (trial_ && trial_->owner == id) out = stop(id);
  connections_.erase(id);
  return out;
}

std::vector<Outgoing> LiveHub::handle_text(ConnectionId id, std::string_view text) {
  std::vector<Outgoing> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t nl = text.find('\n', pos);
    if (nl == std::string_view::npos) nl = text.size();
    std::string_view line = text.substr(pos, nl - pos);
    pos = nl + 1;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) continue;
    std::vector<Outgoing> part;
    try {
      part = handle_control(id, parse_control(line));
    } catch (const InputError& e) {
      part.push_back(to_one(id, error_message(e.what())));
    }
    out.insert(out.end(), std::make_move_iterator(part.begin()), std::make_move_iterator(part.end()));
  }
  return out;
}

std::vector<Outgoing> LiveHub::handle_control(ConnectionId id, const ControlMessage& msg) {
  auto it = connections_.find(id);
  if (it == connections_.end()) throw StateError("unknown connection");
  Connection& conn = it->second;

  if (const auto* hello = std::get_if<Hello>(&msg)) {
    conn.greeted = true;
    conn.sample_rate = hello->sample_rate;
    conn.resampler =
        hello->sample_rate == kSampleRateHz ? nullptr : std::make_unique<LinearResampler>(hello->sample_rate, kSampleRateHz);
    conn.carry.clear();
    if (trial_) {
      const auto& h = trial_->pipeline->header();
      return {to_one(id, trial_state_message(trial_->pipeline->state(), std::nullopt, h.session_id, h.config.mode))};
    }
    return {to_one(id, trial_state_message(TrialState{}))};
  }
  if (!conn.greeted) return {to_one(id, error_message("hello must be the first message"))};
  if (const auto* s = std::get_if<StartTrial>(&msg)) return start(id, *s);
  return stop(id);
}

std::vector<Outgoing> LiveHub::start(ConnectionId id, const StartTrial& msg) {
  if (trial_) {
    return {to_one(id, error_message("a trial is already active (session " + trial_->pipeline->header().session_id + ")"))};
  }
  SessionConfig config;
  config.dsp = options_.dsp;
  config.layout = options_.layout;
  config.mode = msg.mode;
  try {
    config.melody = store_.melody(msg.melody_id);
  } catch (const InputError& e) {
    return {to_one(id, error_message(e.what()))};
  }

  SessionHeader header;
  header.config = config;
  header.created_utc = options_.clock();
  std::filesystem::create_directories(store_.root());
  for (int attempt = 0;; ++attempt) {
    header.session_id = derive_session_id(config, {}, header.created_utc + "#" + std::to_string(attempt));
    if (!std::filesystem::exists(store_.session_path(header.session_id))) break;
  }

  TrialSinks sinks;
  sinks.on_record = [this](const SessionRecord& r) {
    if (const auto* f = std::get_if<PitchFrame>(&r)) {
      pending_.push_back({std::nullopt, pitch_frame_message(*f)});
    } else if (const auto* e = std::get_if<FeedbackEvent>(&r)) {
      pending_.push_back({std::nullopt, feedback_event_message(*e)});
    }
  };
  sinks.on_haptic = options_.on_haptic;
  sinks.on_trigger = options_.on_trigger;

  auto trial = std::make_unique<Trial>();
  trial->owner = id;
  trial->pipeline = std::make_unique<TrialPipeline>(header, store_.session_path(header.session_id), std::move(sinks));
  pending_.clear();
  trial->pipeline->start();
  trial_ = std::move(trial);

  std::vector<Outgoing> out;
  out.push_back({std::nullopt, trial_state_message(trial_->pipeline->state(), 0.0, header.session_id, config.mode)});
  for (auto& p : pending_) out.push_back(std::move(p));
  pending_.clear();
  return out;
}

std::vector<Outgoing> LiveHub::stop(ConnectionId id) {
  if (!trial_) return {to_one(id, error_message("no active trial"))};
  pending_.clear();
  std::unique_ptr<Trial> trial = std::move(trial_);
  const ScoreReport score = trial->pipeline->stop();
  const auto& header = trial->pipeline->header();
  const TrialState& state = trial->pipeline->state();
  const double t_end = state.segment_end_ms.value_or(0.0);

  std::vector<Outgoing> out = std::move(pending_);
  pending_.clear();
  out.push_back({std::nullopt, score_report_message(t_end, header.session_id, score)});
  out.push_back({std::nullopt, trial_state_message(state, t_end, header.session_id, header.config.mode)});
  return out;
}

std::vector<Outgoing> LiveHub::handle_audio(ConnectionId id, std::span<const std::uint8_t> bytes) {
  auto it = connections_.find(id);
  if (it == connections_.end()) throw StateError("unknown connection");
  Connection& conn = it->second;
  if (!conn.greeted) return {to_one(id, error_message("hello must be the first message"))};
  if (!trial_ || trial_->owner != id) return {to_one(id, error_message("audio received with no trial owned by this connection"))};

  std::vector<std::uint8_t> joined;
  if (!conn.carry.empty()) {
    joined = conn.carry;
    joined.insert(joined.end(), bytes.begin(), bytes.end());
    bytes = joined;
    conn.carry.clear();
  }
  if (bytes.size() % 2 == 1) {
    conn.carry.push_back(bytes.back());
    bytes = bytes.first(bytes.size() - 1);
  }
  std::vector<double> samples = pcm16_to_mono(bytes, 1);
  if (conn.resampler) samples = conn.resampler->push(samples);

  pending_.clear();
  trial_->pipeline->push_samples(samples);
  std::vector<Outgoing> out = std::move(pending_);
  pending_.clear();
  return out;
}

}  // namespace pitchcoach::service
