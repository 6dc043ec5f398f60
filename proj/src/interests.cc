#include "echoaudit/interests.h"

#include <algorithm>
#include <map>

#include "echoaudit/error.h"
#include "echoaudit/jsonl.h"
#include "json_fields.h"

namespace echoaudit {

using nlohmann::json;

const char* to_string(RequestLabel l) {
  switch (l) {
    case RequestLabel::kPostInstall: return "post_install";
    case RequestLabel::kPostInteract1: return "post_interact_1";
    case RequestLabel::kPostInteract2: return "post_interact_2";
  }
  return "?";
}

RequestLabel parse_request_label(std::string_view s) {
  if (s == "post_install") return RequestLabel::kPostInstall;
  if (s == "post_interact_1") return RequestLabel::kPostInteract1;
  if (s == "post_interact_2") return RequestLabel::kPostInteract2;
  throw InputError("unknown request_label '" + std::string(s) + "'");
}

std::vector<InterestSnapshot> interest_snapshots_from_json(const json& j) {
  if (!j.is_array()) throw InputError("interest snapshots must be a JSON array");
  std::vector<InterestSnapshot> out;
  std::set<std::pair<std::string, RequestLabel>> seen;
  for (const json& e : j) {
    if (!e.is_object()) throw InputError("interest snapshots must be objects");
    detail::reject_unknown_keys(e, {"persona", "request_label", "file_present", "interests"},
                                "interest snapshot");
    InterestSnapshot s;
    s.persona = persona_from_json(detail::require(e, "persona"));
    s.request_label = parse_request_label(detail::require_string(e, "request_label"));
    const json& present = detail::require(e, "file_present");
    if (!present.is_boolean()) throw InputError("file_present must be a boolean");
    s.file_present = present.get<bool>();
    if (auto it = e.find("interests"); it != e.end() && !it->is_null()) {
      if (!it->is_array()) throw InputError("interests must be an array");
      for (const json& v : *it) {
        if (!v.is_string()) throw InputError("interests must be strings");
        s.interests.insert(v.get<std::string>());
      }
    }
    if (!s.file_present && !s.interests.empty()) {
      throw InvariantViolation("snapshot " + s.persona.name + "/" + to_string(s.request_label) +
                               " has interests but file_present=false");
    }
    if (!seen.emplace(s.persona.name, s.request_label).second) {
      throw InvariantViolation("snapshot " + s.persona.name + "/" + to_string(s.request_label) +
                               " listed twice");
    }
    out.push_back(std::move(s));
  }
  return out;
}

std::vector<InterestSnapshot> load_interest_snapshots(const std::filesystem::path& path) {
  try {
    return interest_snapshots_from_json(json::parse(read_file(path)));
  } catch (const json::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

std::vector<InterestTimeline> diff_interests(const std::vector<InterestSnapshot>& snapshots) {
  std::map<std::string, std::vector<const InterestSnapshot*>> by;
  for (const InterestSnapshot& s : snapshots) by[s.persona.name].push_back(&s);
  std::vector<InterestTimeline> out;
  for (auto& [persona, list] : by) {
    std::stable_sort(list.begin(), list.end(), [](const auto* a, const auto* b) {
      return a->request_label < b->request_label;
    });
    InterestTimeline tl;
    tl.persona = persona;
    const std::set<std::string>* prev = nullptr;
    for (const InterestSnapshot* s : list) {
      InterestStep step;
      step.request_label = s->request_label;
      if (!s->file_present) {
        step.missing = true;
      } else {
        step.interests = s->interests;
        if (!prev) {
          step.baseline = true;
        } else {
          std::set_difference(s->interests.begin(), s->interests.end(), prev->begin(), prev->end(),
                              std::inserter(step.added, step.added.end()));
          std::set_difference(prev->begin(), prev->end(), s->interests.begin(), s->interests.end(),
                              std::inserter(step.removed, step.removed.end()));
        }
        prev = &s->interests;
      }
      tl.steps.push_back(std::move(step));
    }
    out.push_back(std::move(tl));
  }
  return out;
}

}  // namespace echoaudit
