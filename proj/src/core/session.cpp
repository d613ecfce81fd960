#include "pitchcoach/session.h"

#include <algorithm>
#include <sstream>

#include "pitchcoach/csv.h"
#include "pitchcoach/error.h"

namespace pitchcoach {

namespace {

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

nlohmann::json record_json(const SessionRecord& record) {
  return std::visit(
      overloaded{[](const PitchFrame& f) {
                   nlohmann::json j = f;
                   j["kind"] = "pitch";
                   return j;
                 },
                 [](const FeedbackEvent& e) {
                   nlohmann::json j = e;
                   j["kind"] = e.channel() == Channel::trigger ? "trigger" : "feedback";
                   return j;
                 },
                 [](const SegmentMark& s) {
                   nlohmann::json j = {{"kind", "segment"}, {"t_ms", s.t_ms}, {"event", s.is_end ? "end" : "start"}};
                   if (s.score) j["score"] = *s.score;
                   return j;
                 }},
      record);
}

SessionRecord record_from_json(const nlohmann::json& j) {
  const std::string kind = j.at("kind").get<std::string>();
  if (kind == "pitch") return j.get<PitchFrame>();
  if (kind == "feedback" || kind == "trigger") {
    FeedbackEvent e = j.get<FeedbackEvent>();
    if ((kind == "trigger") != (e.channel() == Channel::trigger)) {
      throw InputError("record kind '" + kind + "' does not match channel");
    }
    return e;
  }
  if (kind == "segment") {
    SegmentMark s;
    j.at("t_ms").get_to(s.t_ms);
    const std::string ev = j.at("event").get<std::string>();
    if (ev != "start" && ev != "end") throw InputError("segment event must be start or end");
    s.is_end = ev == "end";
    if (j.contains("score")) s.score = j.at("score").get<ScoreReport>();
    return s;
  }
  throw InputError("unknown record kind '" + kind + "'");
}

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFound("cannot open " + path.string());
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

double record_time(const SessionRecord& record) {
  return std::visit([](const auto& r) { return r.t_ms; }, record);
}

std::vector<PitchFrame> SessionLog::pitch_frames() const {
  std::vector<PitchFrame> out;
  for (const auto& r : records) {
    if (const auto* f = std::get_if<PitchFrame>(&r)) out.push_back(*f);
  }
  return out;
}

std::vector<FeedbackEvent> SessionLog::feedback_events() const {
  std::vector<FeedbackEvent> out;
  for (const auto& r : records) {
    if (const auto* e = std::get_if<FeedbackEvent>(&r)) out.push_back(*e);
  }
  return out;
}

std::optional<ScoreReport> SessionLog::stored_score() const {
  for (auto it = records.rbegin(); it != records.rend(); ++it) {
    if (const auto* s = std::get_if<SegmentMark>(&*it); s && s->is_end && s->score) return s->score;
  }
  return std::nullopt;
}

void append_event(SessionLog& log, SessionRecord record) {
  if (!log.records.empty() && record_time(record) < record_time(log.records.back())) {
    throw OrderingError("append_event: t_ms " + std::to_string(record_time(record)) + " precedes last record " +
                        std::to_string(record_time(log.records.back())));
  }
  log.records.push_back(std::move(record));
}

std::string serialize_header(const SessionHeader& header) {
  nlohmann::json j = {{"kind", "header"},
                      {"format", kSessionFormat},
                      {"version", kSessionFormatVersion},
                      {"session_id", header.session_id},
                      {"created_utc", header.created_utc},
                      {"config", header.config}};
  return j.dump();
}

std::string serialize_record(const SessionRecord& record) { return record_json(record).dump(); }

std::string write_session(const SessionLog& log) {
  std::string out = serialize_header(log.header);
  out += '\n';
  for (const auto& r : log.records) {
    out += serialize_record(r);
    out += '\n';
  }
  return out;
}

SessionLog replay(std::string_view content) {
  SessionLog log;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  bool have_header = false;
  while (pos < content.size()) {
    ++line_no;
    const std::size_t nl = content.find('\n', pos);
    if (nl == std::string_view::npos) {
      throw ParseError("truncated record (no terminating newline)", line_no);
    }
    const std::string_view line = content.substr(pos, nl - pos);
    pos = nl + 1;

    nlohmann::json j;
    try {
      j = nlohmann::json::parse(line);
    } catch (const nlohmann::json::parse_error& e) {
      throw ParseError(std::string("malformed record: ") + e.what(), line_no);
    }
    try {
      if (!have_header) {
        if (j.value("kind", std::string{}) != "header" || j.value("format", std::string{}) != kSessionFormat) {
          throw InputError("first line is not a session header");
        }
        if (j.at("version").get<int>() != kSessionFormatVersion) throw InputError("unsupported session version");
        j.at("session_id").get_to(log.header.session_id);
        j.at("created_utc").get_to(log.header.created_utc);
        log.header.config = j.at("config").get<SessionConfig>();
        have_header = true;
        continue;
      }
      SessionRecord rec = record_from_json(j);
      if (!log.records.empty() && record_time(rec) < record_time(log.records.back())) {
        throw CorruptionError("line " + std::to_string(line_no) + ": t_ms goes backwards");
      }
      log.records.push_back(std::move(rec));
    } catch (const CorruptionError&) {
      throw;
    } catch (const nlohmann::json::exception& e) {
      throw ParseError(std::string("bad record: ") + e.what(), line_no);
    } catch (const InputError& e) {
      throw ParseError(e.what(), line_no);
    }
  }
  if (!have_header) throw ParseError("missing session header", 1);
  return log;
}

SessionLog read_session_file(const std::filesystem::path& path) { return replay(read_file(path)); }

SessionWriter::SessionWriter(std::filesystem::path path, std::ofstream out, std::optional<double> last)
    : path_(std::move(path)), out_(std::move(out)), last_t_ms_(last) {}

SessionWriter SessionWriter::create(const std::filesystem::path& path, const SessionHeader& header) {
  if (std::filesystem::exists(path)) throw InputError("session file already exists: " + path.string());
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw InputError("cannot create session file: " + path.string());
  out << serialize_header(header) << '\n';
  out.flush();
  return SessionWriter(path, std::move(out), std::nullopt);
}

SessionWriter SessionWriter::reopen(const std::filesystem::path& path) {
  const SessionLog existing = read_session_file(path);
  std::optional<double> last;
  if (!existing.records.empty()) last = record_time(existing.records.back());
  std::ofstream out(path, std::ios::binary | std::ios::app);
  if (!out) throw InputError("cannot open session file: " + path.string());
  return SessionWriter(path, std::move(out), last);
}

void SessionWriter::append(const SessionRecord& record) {
  const double t = record_time(record);
  if (last_t_ms_ && t < *last_t_ms_) {
    throw OrderingError("session append: t_ms " + std::to_string(t) + " precedes " + std::to_string(*last_t_ms_));
  }
  out_ << serialize_record(record) << '\n';
  out_.flush();
  if (!out_) throw Error("session append: write failed for " + path_.string());
  last_t_ms_ = t;
}

// ---------------------------------------------------------------------------
// Questionnaires and HbO

QuestionnaireScales QuestionnaireScales::from_json_text(std::string_view text) {
  QuestionnaireScales scales;
  scales.bounds.clear();
  try {
    const auto j = nlohmann::json::parse(text);
    for (const auto& [name, b] : j.items()) {
      ScaleBounds sb{b.at("min").get<double>(), b.at("max").get<double>()};
      if (!(sb.min < sb.max)) throw InputError("scale '" + name + "': min must be < max");
      scales.bounds[name] = sb;
    }
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("scale sidecar: ") + e.what(), 0);
  }
  return scales;
}

std::vector<SubscaleMean> QuestionnaireTable::subscale_means() const {
  std::vector<SubscaleMean> out;
  std::vector<double> sums;
  for (const QuestionnaireRow& r : rows) {
    auto it = std::find_if(out.begin(), out.end(), [&](const SubscaleMean& m) {
      return m.participant_id == r.participant_id && m.condition == r.condition && m.instrument == r.instrument;
    });
    std::size_t idx;
    if (it == out.end()) {
      out.push_back({r.participant_id, r.condition, r.instrument, 0.0, 0});
      sums.push_back(0.0);
      idx = out.size() - 1;
    } else {
      idx = static_cast<std::size_t>(it - out.begin());
    }
    for (double v : r.items) sums[idx] += v;
    out[idx].item_count += r.items.size();
  }
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].mean = out[i].item_count ? sums[i] / static_cast<double>(out[i].item_count) : 0.0;
  }
  return out;
}

QuestionnaireTable ingest_questionnaire(std::string_view csv, const QuestionnaireScales& scales) {
  const auto rows = parse_csv(csv);
  if (rows.empty()) throw ParseError("questionnaire: missing header", 1);
  const auto& header = rows.front().cells;
  if (header.size() < 4 || header[0] != "participant_id" || header[1] != "condition" || header[2] != "instrument") {
    throw ParseError("questionnaire: header must be participant_id,condition,instrument,item_1..item_N",
                     rows.front().line);
  }
  for (std::size_t c = 3; c < header.size(); ++c) {
    if (header[c] != "item_" + std::to_string(c - 2)) {
      throw ParseError("questionnaire: expected column item_" + std::to_string(c - 2), rows.front().line);
    }
  }

  QuestionnaireTable table;
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const CsvRow& row = rows[r];
    const auto fail = [&](const std::string& msg) { throw ParseError("questionnaire row: " + msg, row.line); };
    if (row.cells.size() > header.size()) fail("more cells than header columns");
    if (row.cells.size() < 4) fail("no item scores");
    QuestionnaireRow q{row.cells[0], row.cells[1], row.cells[2], {}};
    if (q.participant_id.empty() || q.condition.empty()) fail("participant_id and condition are required");
    auto bounds = scales.bounds.find(q.instrument);
    if (bounds == scales.bounds.end()) fail("unknown instrument '" + q.instrument + "'");

    std::size_t last = row.cells.size();
    while (last > 3 && row.cells[last - 1].empty()) --last;
    for (std::size_t c = 3; c < last; ++c) {
      auto v = parse_number(row.cells[c]);
      if (!v) fail(header[c] + " is not a number: '" + row.cells[c] + "'");
      if (*v < bounds->second.min || *v > bounds->second.max) {
        std::ostringstream msg;
        msg << header[c] << " = " << *v << " outside " << q.instrument << " scale [" << bounds->second.min << ", "
            << bounds->second.max << "]";
        fail(msg.str());
      }
      q.items.push_back(*v);
    }
    if (q.items.empty()) fail("no item scores");
    table.rows.push_back(std::move(q));
  }
  return table;
}

ChannelSeries ingest_hbo(std::string_view csv) {
  const auto rows = parse_csv(csv);
  if (rows.empty()) throw ParseError("hbo: missing header", 1);
  const auto& header = rows.front().cells;
  if (header.size() < 2 || header[0] != "t_ms") throw ParseError("hbo: header must be t_ms,ch1,...", rows.front().line);

  ChannelSeries series;
  series.channel_names.assign(header.begin() + 1, header.end());
  for (std::size_t r = 1; r < rows.size(); ++r) {
    const CsvRow& row = rows[r];
    if (row.cells.size() != header.size()) {
      throw ParseError("hbo: expected " + std::to_string(header.size()) + " cells, got " +
                           std::to_string(row.cells.size()),
                       row.line);
    }
    std::vector<double> values;
    for (std::size_t c = 0; c < row.cells.size(); ++c) {
      auto v = parse_number(row.cells[c]);
      if (!v) {
        throw ParseError("hbo: row " + std::to_string(row.line) + ", column " + std::to_string(c + 1) + " (" +
                             header[c] + "): not a number: '" + row.cells[c] + "'",
                         row.line);
      }
      values.push_back(*v);
    }
    const double t = values.front();
    if (!series.t_ms.empty() && !(t > series.t_ms.back())) {
      throw OrderingError("hbo: line " + std::to_string(row.line) + ": t_ms " + row.cells[0] +
                          " is not after the previous row");
    }
    series.t_ms.push_back(t);
    series.rows.emplace_back(values.begin() + 1, values.end());
  }
  return series;
}

void to_json(nlohmann::json& j, const SessionConfig& c) {
  j = {{"dsp", c.dsp},
       {"layout", c.layout},
       {"mode", to_string(c.mode)},
       {"melody_id", c.melody.id},
       {"melody", c.melody}};
}

void from_json(const nlohmann::json& j, SessionConfig& c) {
  j.at("dsp").get_to(c.dsp);
  j.at("layout").get_to(c.layout);
  c.mode = parse_mode(j.at("mode").get<std::string>());
  j.at("melody").get_to(c.melody);
}

}  // namespace pitchcoach
