#pragma once

#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "json.hpp"
#include "pitchcoach/dsp.h"
#include "pitchcoach/feedback.h"
#include "pitchcoach/haptics.h"
#include "pitchcoach/melody.h"
#include "pitchcoach/scoring.h"
#include "pitchcoach/stats.h"

namespace pitchcoach {

/// Everything needed to reproduce a trial offline. The full melody is
/// embedded so a log can be re-scored on its own.
struct SessionConfig {
  DspConfig dsp;
  ActuatorLayout layout;
  FeedbackMode mode = FeedbackMode::synchronous;
  MelodyTrack melody;
  bool operator==(const SessionConfig&) const = default;
};

struct SessionHeader {
  std::string session_id;
  std::string created_utc;
  SessionConfig config;
  bool operator==(const SessionHeader&) const = default;
};

/// Segment boundary. The end mark carries the score computed at stop time.
struct SegmentMark {
  double t_ms = 0.0;
  bool is_end = false;
  std::optional<ScoreReport> score;
  bool operator==(const SegmentMark&) const = default;
};

using SessionRecord = std::variant<PitchFrame, FeedbackEvent, SegmentMark>;

double record_time(const SessionRecord& record);

struct SessionLog {
  SessionHeader header;
  std::vector<SessionRecord> records;

  std::vector<PitchFrame> pitch_frames() const;
  std::vector<FeedbackEvent> feedback_events() const;
  /// Score from the segment end mark, if the trial completed.
  std::optional<ScoreReport> stored_score() const;
  bool operator==(const SessionLog&) const = default;
};

inline constexpr std::string_view kSessionFormat = "pitchcoach-session";
inline constexpr int kSessionFormatVersion = 1;

/// In-memory append; throws OrderingError on timestamp regression.
void append_event(SessionLog& log, SessionRecord record);

std::string serialize_header(const SessionHeader& header);
/// One JSON object, no trailing newline.
std::string serialize_record(const SessionRecord& record);
/// Header line plus one line per record, each newline-terminated.
std::string write_session(const SessionLog& log);

/// Parses a complete session file. Throws ParseError naming the line on
/// malformed or truncated input and CorruptionError on time regressions.
SessionLog replay(std::string_view content);
SessionLog read_session_file(const std::filesystem::path& path);

/// Appends records to a session file, flushing each line before returning.
class SessionWriter {
 public:
  /// Fails if the file already exists.
  static SessionWriter create(const std::filesystem::path& path, const SessionHeader& header);
  /// Opens an existing log for further appends; existing bytes are never rewritten.
  static SessionWriter reopen(const std::filesystem::path& path);

  void append(const SessionRecord& record);
  std::optional<double> last_t_ms() const { return last_t_ms_; }
  const std::filesystem::path& path() const { return path_; }

 private:
  SessionWriter(std::filesystem::path path, std::ofstream out, std::optional<double> last);

  std::filesystem::path path_;
  std::ofstream out_;
  std::optional<double> last_t_ms_;
};

// ---------------------------------------------------------------------------
// Questionnaires

struct ScaleBounds {
  double min = 0.0;
  double max = 0.0;
};

/// Per-instrument item scale, normally loaded from a JSON sidecar
/// {"GEQ": {"min": 0, "max": 4}, "IMI": {"min": 1, "max": 7}}.
struct QuestionnaireScales {
  std::map<std::string, ScaleBounds> bounds{{"GEQ", {0.0, 4.0}}, {"IMI", {1.0, 7.0}}};
  static QuestionnaireScales from_json_text(std::string_view text);
};

struct QuestionnaireRow {
  std::string participant_id;
  std::string condition;
  std::string instrument;
  std::vector<double> items;
};

struct SubscaleMean {
  std::string participant_id;
  std::string condition;
  std::string instrument;
  double mean = 0.0;
  std::size_t item_count = 0;
};

struct QuestionnaireTable {
  std::vector<QuestionnaireRow> rows;
  /// Arithmetic mean of all items per (participant, condition, instrument),
  /// in first-appearance order.
  std::vector<SubscaleMean> subscale_means() const;
};

/// CSV with header participant_id,condition,instrument,item_1..item_N.
/// Trailing blank item cells are allowed; out-of-scale values raise a
/// ParseError naming the CSV line.
QuestionnaireTable ingest_questionnaire(std::string_view csv, const QuestionnaireScales& scales = {});

/// CSV `t_ms,ch1,ch2,...` with strictly increasing time.
ChannelSeries ingest_hbo(std::string_view csv);

void to_json(nlohmann::json& j, const SessionConfig& c);
void from_json(const nlohmann::json& j, SessionConfig& c);

}  // namespace pitchcoach
