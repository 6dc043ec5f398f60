#pragma once

// Inferred-interest snapshots and their per-persona timelines.

#include <filesystem>
#include <set>
#include <string>
#include <vector>

#include "echoaudit/trace.h"

namespace echoaudit {

enum class RequestLabel { kPostInstall, kPostInteract1, kPostInteract2 };
const char* to_string(RequestLabel l);
RequestLabel parse_request_label(std::string_view s);

struct InterestSnapshot {
  PersonaId persona;
  RequestLabel request_label = RequestLabel::kPostInstall;
  std::set<std::string> interests;
  bool file_present = true;
};

// JSON array of {persona, request_label, file_present, interests}. A
// snapshot with file_present=false and a non-empty interest list, or a
// repeated (persona, request_label), throws InvariantViolation.
std::vector<InterestSnapshot> interest_snapshots_from_json(const nlohmann::json& j);
std::vector<InterestSnapshot> load_interest_snapshots(const std::filesystem::path& path);

struct InterestStep {
  RequestLabel request_label = RequestLabel::kPostInstall;
  bool missing = false;   // file not returned
  bool baseline = false;  // first present snapshot; nothing to diff against
  std::set<std::string> interests;
  std::set<std::string> added;
  std::set<std::string> removed;
};

struct InterestTimeline {
  std::string persona;
  std::vector<InterestStep> steps;  // request order
};

// Differences are taken against the previous present snapshot, so a
// missing file never reads as "everything removed". Personas sorted by name.
std::vector<InterestTimeline> diff_interests(const std::vector<InterestSnapshot>& snapshots);

}  // namespace echoaudit
