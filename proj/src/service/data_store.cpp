#include "pitchcoach/service/data_store.h"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <sstream>

#include "pitchcoach/error.h"
#include "pitchcoach/session.h"

namespace pitchcoach::service {

namespace fs = std::filesystem;

namespace {

std::string slurp(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw NotFound("cannot read " + path.filename().string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace

bool is_safe_id(const std::string& id) {
  if (id.empty() || id.front() == '.' || id.size() > 200) return false;
  return std::all_of(id.begin(), id.end(), [](unsigned char c) {
    return std::isalnum(c) || c == '.' || c == '_' || c == '-';
  });
}

DataStore::DataStore(fs::path root) : root_(std::move(root)) {}

fs::path DataStore::session_path(const std::string& id) const {
  if (!is_safe_id(id)) throw NotFound("no session '" + id + "'");
  return root_ / (id + ".jsonl");
}

nlohmann::json DataStore::list_sessions() const {
  nlohmann::json out = nlohmann::json::array();
  std::error_code ec;
  if (!fs::is_directory(root_, ec)) return out;
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(root_, ec)) {
    if (entry.is_regular_file() && entry.path().extension() == ".jsonl" && is_safe_id(entry.path().stem().string())) {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  for (const fs::path& p : files) {
    nlohmann::json item = {{"session_id", p.stem().string()}};
    try {
      const SessionLog log = read_session_file(p);
      item["session_id"] = log.header.session_id;
      item["created_utc"] = log.header.created_utc;
      item["melody_id"] = log.header.config.melody.id;
      item["mode"] = to_string(log.header.config.mode);
      item["complete"] = log.stored_score().has_value();
    } catch (const std::exception& e) {
      item["error"] = e.what();
    }
    out.push_back(std::move(item));
  }
  return out;
}

std::string DataStore::fetch_log(const std::string& id) const {
  const fs::path p = session_path(id);
  if (!fs::is_regular_file(p)) throw NotFound("no session '" + id + "'");
  return slurp(p);
}

nlohmann::json DataStore::fetch_score(const std::string& id) const {
  const std::string content = fetch_log(id);
  // Validate the whole log first so a corrupt file is not served as a score.
  replay(content);
  std::istringstream in(content);
  std::string line;
  nlohmann::json score;
  while (std::getline(in, line)) {
    const auto j = nlohmann::json::parse(line);
    if (j.value("kind", std::string{}) == "segment" && j.value("event", std::string{}) == "end" && j.contains("score")) {
      score = j.at("score");
    }
  }
  if (score.is_null()) throw NotFound("session '" + id + "' has no score yet");
  return score;
}

nlohmann::json DataStore::list_melodies() const {
  nlohmann::json out = nlohmann::json::array();
  const fs::path dir = root_ / "melodies";
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) return out;
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir, ec)) {
    if (entry.is_regular_file() && entry.path().extension() == ".json" && is_safe_id(entry.path().stem().string())) {
      files.push_back(entry.path());
    }
  }
  std::sort(files.begin(), files.end());
  for (const fs::path& p : files) {
    nlohmann::json item = {{"id", p.stem().string()}};
    try {
      const MelodyTrack m = load_melody_file(p.string());
      item["description"] = m.description;
      item["span_ms"] = m.span_ms();
      item["notes"] = m.notes;
    } catch (const std::exception& e) {
      item["error"] = e.what();
    }
    out.push_back(std::move(item));
  }
  return out;
}

MelodyTrack DataStore::melody(const std::string& id) const {
  if (!is_safe_id(id)) throw NotFound("no melody '" + id + "'");
  const fs::path p = root_ / "melodies" / (id + ".json");
  if (!fs::is_regular_file(p)) throw NotFound("no melody '" + id + "'");
  return load_melody_file(p.string());
}

}  // namespace pitchcoach::service
