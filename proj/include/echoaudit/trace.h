#pragma once

// Trace data model, JSONL ingestion, session segmentation and DNS/SNI based
// hostname resolution.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

namespace echoaudit {

enum class PersonaKind { kInterest, kVanilla, kWebControl };
enum class Phase { kInstall, kInteract, kIdle, kCrawl };
enum class Direction { kOutbound, kInbound };
enum class Protocol { kDns, kTls, kHttp };
enum class HttpMethod { kGet, kPost, kOther };

struct PersonaId {
  std::string name;
  PersonaKind kind = PersonaKind::kInterest;

  friend bool operator==(const PersonaId&, const PersonaId&) = default;
};

struct DnsQuery {
  std::string qname;
  std::vector<std::string> answers;

  friend bool operator==(const DnsQuery&, const DnsQuery&) = default;
};

using HeaderField = std::pair<std::string, std::string>;

struct HttpEvent {
  HttpMethod method = HttpMethod::kGet;
  std::string url;
  std::vector<HeaderField> request_headers;
  std::vector<HeaderField> set_cookies;
  std::optional<std::string> referer;
  std::optional<std::string> body_excerpt;

  friend bool operator==(const HttpEvent&, const HttpEvent&) = default;
};

struct FlowRecord {
  std::string session_id;
  PersonaId persona;
  std::optional<std::string> skill_id;
  Phase phase = Phase::kInteract;
  std::int64_t timestamp_ms = 0;
  Direction direction = Direction::kOutbound;
  std::string dst_ip;
  int dst_port = 0;
  Protocol protocol = Protocol::kTls;
  std::optional<std::string> sni;
  std::optional<DnsQuery> dns_query;
  std::optional<HttpEvent> http;
  std::uint64_t byte_count = 0;

  friend bool operator==(const FlowRecord&, const FlowRecord&) = default;
};

struct SkillSession {
  std::string session_id;
  PersonaId persona;
  std::optional<std::string> skill_id;
  std::vector<FlowRecord> flows;
  std::int64_t start_ms = 0;
  std::int64_t end_ms = 0;
};

// Enum <-> wire-name helpers. Parsing throws InputError on unknown names.
const char* to_string(PersonaKind v);
const char* to_string(Phase v);
const char* to_string(Direction v);
const char* to_string(Protocol v);
const char* to_string(HttpMethod v);
PersonaKind parse_persona_kind(std::string_view s);
Phase parse_phase(std::string_view s);
Direction parse_direction(std::string_view s);
Protocol parse_protocol(std::string_view s);
HttpMethod parse_http_method(std::string_view s);

PersonaId persona_from_json(const nlohmann::json& j);
nlohmann::json persona_to_json(const PersonaId& p);

struct IngestOptions {
  std::size_t body_excerpt_max = 4096;
};

// Decodes and validates one trace record. Throws InputError describing the
// first problem found.
FlowRecord flow_from_json(const nlohmann::json& j, const IngestOptions& options = {});
nlohmann::json flow_to_json(const FlowRecord& flow);

struct LineWarning {
  std::size_t line = 0;
  std::string message;
};

struct IngestResult {
  std::vector<FlowRecord> flows;
  std::vector<LineWarning> warnings;
  std::size_t malformed_lines = 0;
  std::size_t total_lines = 0;
};

// Reads a JSONL trace. Records come back sorted by (session_id, timestamp_ms)
// with file order preserved among equal keys. Blank lines are ignored.
// Throws InputError if the file cannot be read or more than 10% of the
// non-blank lines are malformed; InvariantViolation if a persona name is used
// with two different kinds.
IngestResult ingest_trace(const std::filesystem::path& path, const IngestOptions& options = {});

// Same contract as ingest_trace, over in-memory text. `source` labels errors.
IngestResult ingest_trace_text(std::string_view text, const IngestOptions& options = {},
                               std::string_view source = "<memory>");

// One canonical JSON object per line, keys sorted.
std::string serialize_trace(const std::vector<FlowRecord>& flows);

// Groups flows by session_id. Throws InvariantViolation if one session_id
// carries two distinct skill ids or two personas.
std::vector<SkillSession> segment_sessions(const std::vector<FlowRecord>& flows);

// Location of a flow inside a segmented trace.
struct FlowRef {
  std::size_t session = 0;
  std::size_t flow = 0;

  friend auto operator<=>(const FlowRef&, const FlowRef&) = default;
};

enum class HostSource { kSni, kDns, kHttpHost };

struct ResolvedHost {
  std::string hostname;
  HostSource source = HostSource::kSni;
};

struct UnresolvedFlow {
  std::string session_id;
  std::string dst_ip;
  std::int64_t timestamp_ms = 0;
};

struct ResolutionReport {
  // (session_id, dst_ip) -> hostname; the earliest resolved flow wins.
  std::map<std::pair<std::string, std::string>, std::string> endpoints;
  // Parallel to sessions[i].flows. Empty for DNS flows and unresolved flows.
  std::vector<std::vector<std::optional<ResolvedHost>>> flow_hosts;
  std::vector<UnresolvedFlow> unresolved;
  std::vector<std::string> warnings;
  std::size_t resolved_flows = 0;

  const std::optional<ResolvedHost>& host(FlowRef ref) const {
    return flow_hosts[ref.session][ref.flow];
  }
};

// For every non-DNS flow: SNI if present; for HTTP the URL host; otherwise
// the qname of the most recent DNS answer for dst_ip at or before the flow's
// timestamp within the same persona's flows (all sessions). Answers sharing
// the winning timestamp but naming different qnames resolve to the
// lexicographically smallest qname and raise a warning.
ResolutionReport resolve_domains(const std::vector<SkillSession>& sessions);

}  // namespace echoaudit
