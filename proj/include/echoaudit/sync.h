#pragma once

// Cookie-sync detection over HTTP evidence, partner graph derivation and
// partner labeling of bidders.

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "echoaudit/bids.h"
#include "echoaudit/endpoint.h"
#include "echoaudit/trace.h"

namespace echoaudit {

enum class TokenSource { kCookieValue, kQueryParam, kPathSegment };
const char* to_string(TokenSource s);

struct SyncOptions {
  std::size_t min_id_length = 8;
};

inline constexpr std::size_t kMinIdLengthFloor = 4;
inline constexpr std::size_t kMinIdLengthCeiling = 256;

// One HTTP request in global order: (timestamp_ms, url) ascending, original
// order among exact ties.
struct HttpObservation {
  std::size_t seq = 0;
  FlowRef flow;
  std::int64_t timestamp_ms = 0;
  std::string url;
  std::string host;
  std::string org;  // EndpointClassifier::org_identity(host)
  const HttpEvent* http = nullptr;
};

// HTTP flows whose URL parses. Observations borrow from `sessions`.
std::vector<HttpObservation> collect_http_observations(const std::vector<SkillSession>& sessions,
                                                       const EndpointClassifier& classifier);

struct IdentifierToken {
  std::string value;
  std::string origin_org;
  TokenSource source = TokenSource::kCookieValue;
  std::int64_t first_seen_ms = 0;
  std::size_t first_seen_seq = 0;
};

// True if `value` passes the length gate and is not a low-entropy shape:
// short digit runs, 10/13-digit epoch timestamps, locale codes, WxH
// dimension lists, URLs/hostnames, or single-case dictionary-like words.
bool is_identifier_candidate(std::string_view value, const SyncOptions& options = {});

// One token per distinct value; the first observation carrying it decides
// origin_org and first_seen. Ordered by first_seen_seq.
std::vector<IdentifierToken> extract_identifiers(const std::vector<HttpObservation>& observations,
                                                 const SyncOptions& options = {});

struct SyncEvent {
  IdentifierToken token;
  std::string sender_org;
  std::string receiver_org;
  std::string evidence_url;
  std::int64_t timestamp_ms = 0;
};

// A token seen verbatim in a later request URL to a different org. One event
// per (token, sender, receiver), at the earliest such request.
std::vector<SyncEvent> detect_syncs(const std::vector<IdentifierToken>& tokens,
                                    const std::vector<HttpObservation>& observations);

struct PartnerEdge {
  std::string sender;
  std::string receiver;
  std::size_t count = 0;
};

struct PartnerGraph {
  std::set<std::string> nodes;
  std::vector<PartnerEdge> edges;  // sorted by (sender, receiver)
  std::string focus_org;
};

PartnerGraph build_partner_graph(const std::vector<SyncEvent>& events, std::string focus_org);

struct PartnerSets {
  std::set<std::string> direct_partners;
  std::set<std::string> second_hop;
};

// direct: orgs with an edge to or from focus_org. second_hop: orgs with an
// edge to or from a direct partner, excluding focus_org and direct partners.
PartnerSets partner_sets(const std::vector<SyncEvent>& events, const std::string& focus_org);

struct LabeledBids {
  std::vector<LabeledBid> bids;
  std::vector<std::string> warnings;
};

// Bidder codes are resolved through ontology names and aliases
// (case-insensitive). Unmapped bidders are labeled non_partner with one
// warning per distinct bidder.
LabeledBids label_bidders(const std::vector<BidRecord>& bids,
                          const std::set<std::string>& direct_partners,
                          const OrgOntology& ontology);

// Exact multi-pattern substring search (Aho-Corasick).
class PatternMatcher {
 public:
  explicit PatternMatcher(const std::vector<std::string>& patterns);
  // Indices of every pattern occurring in `text`, ascending, without
  // duplicates.
  std::vector<std::size_t> find_all(std::string_view text) const;

 private:
  struct Node {
    std::vector<std::pair<unsigned char, std::int32_t>> next;  // sorted by byte
    std::int32_t fail = 0;
    std::int32_t out_link = -1;  // nearest suffix node that ends a pattern
    std::vector<std::size_t> outputs;
  };
  std::int32_t child(std::int32_t node, unsigned char c) const;
  std::int32_t step(std::int32_t node, unsigned char c) const;
  std::vector<Node> nodes_;
  std::size_t pattern_count_ = 0;
};

}  // namespace echoaudit
