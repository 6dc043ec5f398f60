#include "echoaudit/trace.h"

#include <algorithm>
#include <array>
#include <set>
#include <unordered_map>

#include "echoaudit/error.h"
#include "echoaudit/jsonl.h"
#include "echoaudit/strings.h"
#include "echoaudit/url.h"
#include "json_fields.h"

namespace echoaudit {

using nlohmann::json;

namespace {

using detail::optional_string;
using detail::reject_unknown_keys;
using detail::require;
using detail::require_string;

template <typename E, std::size_t N>
using NameTable = std::array<std::pair<E, const char*>, N>;

constexpr NameTable<PersonaKind, 3> kPersonaKinds{{
    {PersonaKind::kInterest, "interest"},
    {PersonaKind::kVanilla, "vanilla"},
    {PersonaKind::kWebControl, "web_control"},
}};
constexpr NameTable<Phase, 4> kPhases{{
    {Phase::kInstall, "install"},
    {Phase::kInteract, "interact"},
    {Phase::kIdle, "idle"},
    {Phase::kCrawl, "crawl"},
}};
constexpr NameTable<Direction, 2> kDirections{{
    {Direction::kOutbound, "outbound"},
    {Direction::kInbound, "inbound"},
}};
constexpr NameTable<Protocol, 3> kProtocols{{
    {Protocol::kDns, "dns"},
    {Protocol::kTls, "tls"},
    {Protocol::kHttp, "http"},
}};

template <typename E, std::size_t N>
const char* name_of(const NameTable<E, N>& table, E v) {
  for (const auto& [e, name] : table) {
    if (e == v) return name;
  }
  return "?";
}

template <typename E, std::size_t N>
E parse_name(const NameTable<E, N>& table, std::string_view s, const char* what) {
  for (const auto& [e, name] : table) {
    if (s == name) return e;
  }
  throw InputError(std::string("unknown ") + what + " '" + std::string(s) + "'");
}

std::vector<HeaderField> header_list(const json& j, const char* key) {
  std::vector<HeaderField> out;
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) return out;
  if (!it->is_array()) throw InputError(std::string("field '") + key + "' must be an array");
  for (const json& pair : *it) {
    if (!pair.is_array() || pair.size() != 2 || !pair[0].is_string() || !pair[1].is_string()) {
      throw InputError(std::string("entries of '") + key + "' must be [name, value] pairs");
    }
    out.emplace_back(pair[0].get<std::string>(), pair[1].get<std::string>());
  }
  return out;
}

json header_json(const std::vector<HeaderField>& headers) {
  json arr = json::array();
  for (const auto& [name, value] : headers) arr.push_back(json::array({name, value}));
  return arr;
}

// Cuts at most `max` bytes without splitting a UTF-8 sequence.
std::string truncate_utf8(std::string s, std::size_t max) {
  if (s.size() <= max) return s;
  std::size_t cut = max;
  while (cut > 0 && (static_cast<unsigned char>(s[cut]) & 0xC0) == 0x80) --cut;
  s.resize(cut);
  return s;
}

HttpEvent http_from_json(const json& j, const IngestOptions& options) {
  if (!j.is_object()) throw InputError("field 'http' must be an object");
  reject_unknown_keys(j,
                      {"method", "url", "request_headers", "set_cookies", "referer",
                       "body_excerpt"},
                      "http");
  HttpEvent ev;
  ev.method = parse_http_method(require_string(j, "method"));
  ev.url = require_string(j, "url");
  if (!parse_url(ev.url)) throw InputError("http.url is not an absolute URL: " + ev.url);
  ev.request_headers = header_list(j, "request_headers");
  ev.set_cookies = header_list(j, "set_cookies");
  ev.referer = optional_string(j, "referer");
  if (auto body = optional_string(j, "body_excerpt")) {
    ev.body_excerpt = truncate_utf8(std::move(*body), options.body_excerpt_max);
  }
  return ev;
}

}  // namespace

const char* to_string(PersonaKind v) { return name_of(kPersonaKinds, v); }
const char* to_string(Phase v) { return name_of(kPhases, v); }
const char* to_string(Direction v) { return name_of(kDirections, v); }
const char* to_string(Protocol v) { return name_of(kProtocols, v); }
const char* to_string(HttpMethod v) {
  switch (v) {
    case HttpMethod::kGet: return "GET";
    case HttpMethod::kPost: return "POST";
    case HttpMethod::kOther: return "other";
  }
  return "other";
}

PersonaKind parse_persona_kind(std::string_view s) {
  return parse_name(kPersonaKinds, s, "persona kind");
}
Phase parse_phase(std::string_view s) { return parse_name(kPhases, s, "phase"); }
Direction parse_direction(std::string_view s) {
  return parse_name(kDirections, s, "direction");
}
Protocol parse_protocol(std::string_view s) { return parse_name(kProtocols, s, "protocol"); }

// Methods other than GET and POST collapse to kOther.
HttpMethod parse_http_method(std::string_view s) {
  if (s == "GET") return HttpMethod::kGet;
  if (s == "POST") return HttpMethod::kPost;
  if (s.empty()) throw InputError("empty http method");
  return HttpMethod::kOther;
}

PersonaId persona_from_json(const json& j) {
  if (!j.is_object()) throw InputError("field 'persona' must be an object {name, kind}");
  reject_unknown_keys(j, {"name", "kind"}, "persona");
  PersonaId p;
  p.name = require_string(j, "name");
  if (p.name.empty()) throw InputError("persona.name is empty");
  p.kind = parse_persona_kind(require_string(j, "kind"));
  return p;
}

json persona_to_json(const PersonaId& p) {
  return json{{"name", p.name}, {"kind", to_string(p.kind)}};
}

FlowRecord flow_from_json(const json& j, const IngestOptions& options) {
  if (!j.is_object()) throw InputError("record is not a JSON object");
  reject_unknown_keys(j,
                      {"session_id", "persona", "skill_id", "phase", "timestamp_ms",
                       "direction", "dst_ip", "dst_port", "protocol", "sni", "dns_query",
                       "http", "byte_count"},
                      "flow record");
  FlowRecord f;
  f.session_id = require_string(j, "session_id");
  if (f.session_id.empty()) throw InputError("session_id is empty");
  f.persona = persona_from_json(require(j, "persona"));
  f.skill_id = optional_string(j, "skill_id");
  f.phase = parse_phase(require_string(j, "phase"));

  const json& ts = require(j, "timestamp_ms");
  if (!ts.is_number_integer()) throw InputError("timestamp_ms must be an integer");
  f.timestamp_ms = ts.get<std::int64_t>();

  f.direction = parse_direction(require_string(j, "direction"));
  f.dst_ip = require_string(j, "dst_ip");
  if (!is_ip_address(f.dst_ip)) throw InputError("dst_ip is not an IP address: " + f.dst_ip);

  const json& port = require(j, "dst_port");
  if (!port.is_number_integer() || port.get<std::int64_t>() < 0 ||
      port.get<std::int64_t>() > 65535) {
    throw InputError("dst_port must be an integer in [0, 65535]");
  }
  f.dst_port = port.get<int>();
  f.protocol = parse_protocol(require_string(j, "protocol"));

  if (auto sni = optional_string(j, "sni")) {
    if (!is_valid_hostname(*sni)) throw InputError("sni is not a valid hostname: " + *sni);
    f.sni = to_lower(*sni);
  }
  if (auto it = j.find("dns_query"); it != j.end() && !it->is_null()) {
    if (!it->is_object()) throw InputError("field 'dns_query' must be an object");
    reject_unknown_keys(*it, {"qname", "answers"}, "dns_query");
    DnsQuery q;
    q.qname = require_string(*it, "qname");
    if (!is_valid_hostname(q.qname)) throw InputError("dns qname is not a valid hostname");
    q.qname = to_lower(q.qname);
    if (q.qname.back() == '.') q.qname.pop_back();
    const json& answers = require(*it, "answers");
    if (!answers.is_array()) throw InputError("dns_query.answers must be an array");
    for (const json& a : answers) {
      if (!a.is_string() || !is_ip_address(a.get<std::string>())) {
        throw InputError("dns answers must be IP address strings");
      }
      q.answers.push_back(a.get<std::string>());
    }
    f.dns_query = std::move(q);
  }
  if (auto it = j.find("http"); it != j.end() && !it->is_null()) {
    f.http = http_from_json(*it, options);
  }

  const json& bytes = require(j, "byte_count");
  if (!bytes.is_number_integer() || bytes.get<std::int64_t>() < 0) {
    throw InputError("byte_count must be a non-negative integer");
  }
  f.byte_count = bytes.get<std::uint64_t>();

  if (f.protocol == Protocol::kDns && !f.dns_query) {
    throw InputError("protocol dns requires dns_query");
  }
  if (f.protocol == Protocol::kHttp && !f.http) {
    throw InputError("protocol http requires http");
  }
  return f;
}

json flow_to_json(const FlowRecord& f) {
  json j;
  j["session_id"] = f.session_id;
  j["persona"] = persona_to_json(f.persona);
  if (f.skill_id) j["skill_id"] = *f.skill_id;
  j["phase"] = to_string(f.phase);
  j["timestamp_ms"] = f.timestamp_ms;
  j["direction"] = to_string(f.direction);
  j["dst_ip"] = f.dst_ip;
  j["dst_port"] = f.dst_port;
  j["protocol"] = to_string(f.protocol);
  if (f.sni) j["sni"] = *f.sni;
  if (f.dns_query) {
    j["dns_query"] = json{{"qname", f.dns_query->qname}, {"answers", f.dns_query->answers}};
  }
  if (f.http) {
    json h;
    h["method"] = to_string(f.http->method);
    h["url"] = f.http->url;
    h["request_headers"] = header_json(f.http->request_headers);
    h["set_cookies"] = header_json(f.http->set_cookies);
    if (f.http->referer) h["referer"] = *f.http->referer;
    if (f.http->body_excerpt) h["body_excerpt"] = *f.http->body_excerpt;
    j["http"] = std::move(h);
  }
  j["byte_count"] = f.byte_count;
  return j;
}

IngestResult ingest_trace_text(std::string_view text, const IngestOptions& options,
                               std::string_view source) {
  auto parsed = read_jsonl<FlowRecord>(
      text, source, [&](const json& j) { return flow_from_json(j, options); });

  IngestResult result;
  result.total_lines = parsed.total_lines;
  result.malformed_lines = parsed.malformed.size();
  for (auto& [line, reason] : parsed.malformed) {
    result.warnings.push_back({line, std::move(reason)});
  }

  std::unordered_map<std::string, PersonaKind> kinds;
  for (std::size_t i = 0; i < parsed.records.size(); ++i) {
    const PersonaId& p = parsed.records[i].persona;
    auto [it, inserted] = kinds.emplace(p.name, p.kind);
    if (!inserted && it->second != p.kind) {
      throw InvariantViolation(std::string(source) + ":" + std::to_string(parsed.record_lines[i]) +
                               ": persona '" + p.name + "' used with kinds '" +
                               to_string(it->second) + "' and '" + to_string(p.kind) + "'");
    }
  }

  result.flows = std::move(parsed.records);
  std::stable_sort(result.flows.begin(), result.flows.end(),
                   [](const FlowRecord& a, const FlowRecord& b) {
                     if (a.session_id != b.session_id) return a.session_id < b.session_id;
                     return a.timestamp_ms < b.timestamp_ms;
                   });
  return result;
}

IngestResult ingest_trace(const std::filesystem::path& path, const IngestOptions& options) {
  return ingest_trace_text(read_file(path), options, path.string());
}

std::string serialize_trace(const std::vector<FlowRecord>& flows) {
  std::string out;
  for (const FlowRecord& f : flows) {
    out += flow_to_json(f).dump();
    out += '\n';
  }
  return out;
}

std::vector<SkillSession> segment_sessions(const std::vector<FlowRecord>& flows) {
  std::map<std::string, SkillSession> by_id;
  for (const FlowRecord& f : flows) {
    auto [it, inserted] = by_id.try_emplace(f.session_id);
    SkillSession& s = it->second;
    if (inserted) {
      s.session_id = f.session_id;
      s.persona = f.persona;
      s.start_ms = s.end_ms = f.timestamp_ms;
    } else if (!(s.persona == f.persona)) {
      throw InvariantViolation("session '" + f.session_id + "' spans personas '" +
                               s.persona.name + "' and '" + f.persona.name + "'");
    }
    if (f.skill_id) {
      if (s.skill_id && *s.skill_id != *f.skill_id) {
        throw InvariantViolation("session '" + f.session_id + "' carries skill ids '" +
                                 *s.skill_id + "' and '" + *f.skill_id + "'");
      }
      s.skill_id = f.skill_id;
    }
    s.start_ms = std::min(s.start_ms, f.timestamp_ms);
    s.end_ms = std::max(s.end_ms, f.timestamp_ms);
    s.flows.push_back(f);
  }
  std::vector<SkillSession> out;
  out.reserve(by_id.size());
  for (auto& [id, s] : by_id) {
    std::stable_sort(s.flows.begin(), s.flows.end(), [](const FlowRecord& a, const FlowRecord& b) {
      return a.timestamp_ms < b.timestamp_ms;
    });
    out.push_back(std::move(s));
  }
  return out;
}

namespace {

struct DnsObservation {
  std::int64_t timestamp_ms;
  std::string qname;

  friend auto operator<=>(const DnsObservation&, const DnsObservation&) = default;
};

// persona name -> ip -> observations sorted by (timestamp, qname)
using DnsIndex =
    std::unordered_map<std::string, std::unordered_map<std::string, std::vector<DnsObservation>>>;

DnsIndex build_dns_index(const std::vector<SkillSession>& sessions) {
  DnsIndex index;
  for (const SkillSession& s : sessions) {
    for (const FlowRecord& f : s.flows) {
      if (f.protocol != Protocol::kDns || !f.dns_query) continue;
      auto& by_ip = index[f.persona.name];
      for (const std::string& ip : f.dns_query->answers) {
        by_ip[ip].push_back({f.timestamp_ms, f.dns_query->qname});
      }
    }
  }
  for (auto& [persona, by_ip] : index) {
    for (auto& [ip, obs] : by_ip) {
      std::sort(obs.begin(), obs.end());
      obs.erase(std::unique(obs.begin(), obs.end()), obs.end());
    }
  }
  return index;
}

}  // namespace

ResolutionReport resolve_domains(const std::vector<SkillSession>& sessions) {
  const DnsIndex dns = build_dns_index(sessions);
  ResolutionReport report;
  report.flow_hosts.resize(sessions.size());
  std::set<std::tuple<std::string, std::string, std::int64_t>> conflicts_seen;

  for (std::size_t si = 0; si < sessions.size(); ++si) {
    const SkillSession& s = sessions[si];
    auto& hosts = report.flow_hosts[si];
    hosts.resize(s.flows.size());
    for (std::size_t fi = 0; fi < s.flows.size(); ++fi) {
      const FlowRecord& f = s.flows[fi];
      if (f.protocol == Protocol::kDns) continue;

      std::optional<ResolvedHost> resolved;
      if (f.sni) {
        resolved = ResolvedHost{*f.sni, HostSource::kSni};
      } else if (f.http) {
        if (auto url = parse_url(f.http->url); url && !is_ip_address(url->host)) {
          resolved = ResolvedHost{url->host, HostSource::kHttpHost};
        }
      }
      if (!resolved) {
        auto pit = dns.find(f.persona.name);
        if (pit != dns.end()) {
          auto iit = pit->second.find(f.dst_ip);
          if (iit != pit->second.end()) {
            const auto& obs = iit->second;
            auto hi = std::upper_bound(
                obs.begin(), obs.end(), f.timestamp_ms,
                [](std::int64_t t, const DnsObservation& o) { return t < o.timestamp_ms; });
            if (hi != obs.begin()) {
              const std::int64_t winner_ts = std::prev(hi)->timestamp_ms;
              auto lo = std::lower_bound(
                  obs.begin(), hi, winner_ts,
                  [](const DnsObservation& o, std::int64_t t) { return o.timestamp_ms < t; });
              resolved = ResolvedHost{lo->qname, HostSource::kDns};
              if (std::distance(lo, hi) > 1 &&
                  conflicts_seen.emplace(f.persona.name, f.dst_ip, winner_ts).second) {
                std::string names;
                for (auto it = lo; it != hi; ++it) names += (it == lo ? "" : ", ") + it->qname;
                report.warnings.push_back("persona '" + f.persona.name + "': ip " + f.dst_ip +
                                          " answered by {" + names + "} at " +
                                          std::to_string(winner_ts) + " ms; using '" + lo->qname +
                                          "'");
              }
            }
          }
        }
      }

      if (resolved) {
        report.endpoints.try_emplace({s.session_id, f.dst_ip}, resolved->hostname);
        ++report.resolved_flows;
        hosts[fi] = std::move(resolved);
      } else {
        report.unresolved.push_back({s.session_id, f.dst_ip, f.timestamp_ms});
      }
    }
  }
  return report;
}

}  // namespace echoaudit
