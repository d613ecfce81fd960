#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"
#include "pitchcoach/melody.h"

namespace pitchcoach::service {

/// Read-only view of a data directory:
///   <root>/<session_id>.jsonl   session logs
///   <root>/melodies/<id>.json   melody tracks
class DataStore {
 public:
  explicit DataStore(std::filesystem::path root);

  const std::filesystem::path& root() const { return root_; }
  std::filesystem::path session_path(const std::string& id) const;

  /// [{session_id, created_utc, melody_id, mode, complete}] sorted by id.
  /// Unreadable logs are listed with "error" instead of being skipped.
  nlohmann::json list_sessions() const;
  /// Raw .jsonl bytes. Throws NotFound.
  std::string fetch_log(const std::string& id) const;
  /// The ScoreReport stored in the log's segment end record. Throws NotFound
  /// when the session is unknown or has no score yet.
  nlohmann::json fetch_score(const std::string& id) const;

  /// [{id, description, span_ms, notes}] sorted by id.
  nlohmann::json list_melodies() const;
  MelodyTrack melody(const std::string& id) const;

 private:
  std::filesystem::path root_;
};

/// Session and melody ids are restricted to [A-Za-z0-9._-] and may not start
/// with a dot.
bool is_safe_id(const std::string& id);

}  // namespace pitchcoach::service
