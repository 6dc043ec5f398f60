#include "echoaudit/sync.h"

#include <algorithm>
#include <cctype>
#include <deque>
#include <map>
#include <unordered_map>

#include "echoaudit/strings.h"
#include "echoaudit/url.h"

namespace echoaudit {

const char* to_string(TokenSource s) {
  switch (s) {
    case TokenSource::kCookieValue: return "cookie_value";
    case TokenSource::kQueryParam: return "query_param";
    case TokenSource::kPathSegment: return "path_segment";
  }
  return "?";
}

// ---------------------------------------------------------------------------
// PatternMatcher

PatternMatcher::PatternMatcher(const std::vector<std::string>& patterns)
    : pattern_count_(patterns.size()) {
  nodes_.emplace_back();
  for (std::size_t p = 0; p < patterns.size(); ++p) {
    if (patterns[p].empty()) continue;
    std::int32_t cur = 0;
    for (unsigned char c : patterns[p]) {
      std::int32_t nxt = child(cur, c);
      if (nxt < 0) {
        nxt = static_cast<std::int32_t>(nodes_.size());
        auto& kids = nodes_[cur].next;
        kids.insert(std::lower_bound(kids.begin(), kids.end(), std::make_pair(c, std::int32_t{0})),
                    {c, nxt});
        nodes_.emplace_back();
      }
      cur = nxt;
    }
    nodes_[cur].outputs.push_back(p);
  }

  std::deque<std::int32_t> queue;
  for (const auto& [c, kid] : nodes_[0].next) {
    nodes_[kid].fail = 0;
    queue.push_back(kid);
  }
  while (!queue.empty()) {
    const std::int32_t u = queue.front();
    queue.pop_front();
    for (const auto& [c, v] : nodes_[u].next) {
      std::int32_t f = nodes_[u].fail;
      while (f != 0 && child(f, c) < 0) f = nodes_[f].fail;
      const std::int32_t target = child(f, c);
      nodes_[v].fail = (target >= 0 && target != v) ? target : 0;
      const Node& fn = nodes_[nodes_[v].fail];
      nodes_[v].out_link = fn.outputs.empty() ? fn.out_link : nodes_[v].fail;
      queue.push_back(v);
    }
  }
}

std::int32_t PatternMatcher::child(std::int32_t node, unsigned char c) const {
  const auto& kids = nodes_[node].next;
  auto it = std::lower_bound(kids.begin(), kids.end(), std::make_pair(c, std::int32_t{0}));
  return (it != kids.end() && it->first == c) ? it->second : -1;
}

std::int32_t PatternMatcher::step(std::int32_t node, unsigned char c) const {
  while (true) {
    const std::int32_t nxt = child(node, c);
    if (nxt >= 0) return nxt;
    if (node == 0) return 0;
    node = nodes_[node].fail;
  }
}

std::vector<std::size_t> PatternMatcher::find_all(std::string_view text) const {
  std::vector<std::size_t> hits;
  std::int32_t state = 0;
  for (unsigned char c : text) {
    state = step(state, c);
    for (std::int32_t n = nodes_[state].outputs.empty() ? nodes_[state].out_link : state; n > 0;
         n = nodes_[n].out_link) {
      hits.insert(hits.end(), nodes_[n].outputs.begin(), nodes_[n].outputs.end());
    }
  }
  std::sort(hits.begin(), hits.end());
  hits.erase(std::unique(hits.begin(), hits.end()), hits.end());
  return hits;
}

// ---------------------------------------------------------------------------
// Observations and tokens

std::vector<HttpObservation> collect_http_observations(const std::vector<SkillSession>& sessions,
                                                       const EndpointClassifier& classifier) {
  std::vector<HttpObservation> obs;
  std::unordered_map<std::string, std::string> org_cache;
  for (std::size_t si = 0; si < sessions.size(); ++si) {
    for (std::size_t fi = 0; fi < sessions[si].flows.size(); ++fi) {
      const FlowRecord& f = sessions[si].flows[fi];
      if (!f.http) continue;
      auto url = parse_url(f.http->url);
      if (!url || is_ip_address(url->host)) continue;
      HttpObservation o;
      o.flow = {si, fi};
      o.timestamp_ms = f.timestamp_ms;
      o.url = f.http->url;
      o.host = url->host;
      auto it = org_cache.find(o.host);
      if (it == org_cache.end()) it = org_cache.emplace(o.host, classifier.org_identity(o.host)).first;
      o.org = it->second;
      o.http = &*f.http;
      obs.push_back(std::move(o));
    }
  }
  std::stable_sort(obs.begin(), obs.end(), [](const HttpObservation& a, const HttpObservation& b) {
    if (a.timestamp_ms != b.timestamp_ms) return a.timestamp_ms < b.timestamp_ms;
    return a.url < b.url;
  });
  for (std::size_t i = 0; i < obs.size(); ++i) obs[i].seq = i;
  return obs;
}

namespace {

bool all_of(std::string_view s, int (*pred)(int)) {
  return std::all_of(s.begin(), s.end(), [&](char c) { return pred(static_cast<unsigned char>(c)); });
}

bool is_locale_code(std::string_view s) {
  // ll, lll, ll-CC, ll_CC, ll-Hant-TW
  const std::vector<std::string> parts = split(s, s.find('_') != std::string_view::npos ? '_' : '-');
  if (parts.empty() || parts.size() > 3) return false;
  if (parts[0].size() < 2 || parts[0].size() > 3 || !all_of(parts[0], std::isalpha)) return false;
  for (std::size_t i = 1; i < parts.size(); ++i) {
    if (parts[i].size() < 2 || parts[i].size() > 4 || !all_of(parts[i], std::isalnum)) return false;
  }
  return true;
}

bool is_dimension(std::string_view s) {
  const std::size_t x = s.find_first_of("xX");
  if (x == std::string_view::npos || x == 0 || x + 1 == s.size()) return false;
  return all_of(s.substr(0, x), std::isdigit) && all_of(s.substr(x + 1), std::isdigit);
}

// Splits on any of `seps`, dropping empty pieces.
std::vector<std::string_view> pieces(std::string_view s, std::string_view seps) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (start <= s.size()) {
    std::size_t end = s.find_first_of(seps, start);
    if (end == std::string_view::npos) end = s.size();
    if (end > start) out.push_back(s.substr(start, end - start));
    start = end + 1;
  }
  return out;
}

bool is_locale_list(std::string_view s) {
  auto ps = pieces(s, ",;");
  if (ps.empty()) return false;
  return std::all_of(ps.begin(), ps.end(), [](std::string_view p) {
    return is_locale_code(p) || p.starts_with("q=");
  });
}

bool is_dimension_list(std::string_view s) {
  auto ps = pieces(s, ",;|");
  return !ps.empty() && std::all_of(ps.begin(), ps.end(), is_dimension);
}

bool looks_like_location(std::string_view s) {
  if (s.find("://") != std::string_view::npos) return true;
  const std::string lower = to_lower(s);
  if (lower.find("%3a%2f%2f") != std::string::npos) return true;
  if (s.find('.') == std::string_view::npos || !is_valid_hostname(s)) return false;
  const std::string_view tld = s.substr(s.rfind('.') + 1);
  return !tld.empty() && all_of(tld, std::isalpha);
}

bool is_single_case_word(std::string_view s) {
  bool lower = false, upper = false;
  for (char ch : s) {
    const auto c = static_cast<unsigned char>(ch);
    if (std::islower(c)) lower = true;
    else if (std::isupper(c)) upper = true;
    else if (c != '_' && c != '-') return false;
  }
  return lower != upper;
}

bool is_decimal_number(std::string_view s) {
  return s.find('.') != std::string_view::npos &&
         std::all_of(s.begin(), s.end(), [](char c) { return c == '.' || std::isdigit(static_cast<unsigned char>(c)); });
}

}  // namespace

bool is_identifier_candidate(std::string_view v, const SyncOptions& options) {
  if (v.size() < options.min_id_length) return false;
  if (all_of(v, std::isdigit)) {
    if (v.size() < 6) return false;
    if (v.size() == 10 || v.size() == 13) return false;  // epoch seconds / millis
    return true;
  }
  if (is_decimal_number(v)) return false;
  if (is_locale_code(v) || is_locale_list(v)) return false;
  if (is_dimension_list(v)) return false;
  if (looks_like_location(v)) return false;
  if (is_single_case_word(v)) return false;
  return true;
}

std::vector<IdentifierToken> extract_identifiers(const std::vector<HttpObservation>& observations,
                                                 const SyncOptions& options) {
  std::vector<IdentifierToken> tokens;
  std::unordered_map<std::string, std::size_t> index;
  auto offer = [&](const std::string& value, TokenSource src, const HttpObservation& o) {
    if (index.contains(value) || !is_identifier_candidate(value, options)) return;
    index.emplace(value, tokens.size());
    tokens.push_back({value, o.org, src, o.timestamp_ms, o.seq});
  };
  for (const HttpObservation& o : observations) {
    for (const auto& [name, value] : o.http->set_cookies) offer(value, TokenSource::kCookieValue, o);
    if (auto url = parse_url(o.url)) {
      for (const auto& [name, value] : query_params(url->query)) {
        offer(value, TokenSource::kQueryParam, o);
      }
      for (const std::string& seg : path_segments(url->path)) offer(seg, TokenSource::kPathSegment, o);
    }
  }
  return tokens;
}

std::vector<SyncEvent> detect_syncs(const std::vector<IdentifierToken>& tokens,
                                    const std::vector<HttpObservation>& observations) {
  std::vector<std::string> patterns;
  patterns.reserve(tokens.size());
  for (const IdentifierToken& t : tokens) patterns.push_back(t.value);
  const PatternMatcher matcher(patterns);

  std::vector<SyncEvent> events;
  std::set<std::pair<std::size_t, std::string>> emitted;  // (token, receiver)
  for (const HttpObservation& o : observations) {
    for (std::size_t ti : matcher.find_all(o.url)) {
      const IdentifierToken& t = tokens[ti];
      if (t.first_seen_seq >= o.seq || t.origin_org == o.org) continue;
      if (!emitted.emplace(ti, o.org).second) continue;
      events.push_back({t, t.origin_org, o.org, o.url, o.timestamp_ms});
    }
  }
  return events;
}

// ---------------------------------------------------------------------------
// Partner graph

PartnerGraph build_partner_graph(const std::vector<SyncEvent>& events, std::string focus_org) {
  PartnerGraph g;
  g.focus_org = std::move(focus_org);
  std::map<std::pair<std::string, std::string>, std::size_t> counts;
  for (const SyncEvent& e : events) {
    ++counts[{e.sender_org, e.receiver_org}];
    g.nodes.insert(e.sender_org);
    g.nodes.insert(e.receiver_org);
  }
  for (const auto& [k, n] : counts) g.edges.push_back({k.first, k.second, n});
  return g;
}

PartnerSets partner_sets(const std::vector<SyncEvent>& events, const std::string& focus_org) {
  PartnerSets out;
  for (const SyncEvent& e : events) {
    if (e.sender_org == focus_org) out.direct_partners.insert(e.receiver_org);
    if (e.receiver_org == focus_org) out.direct_partners.insert(e.sender_org);
  }
  out.direct_partners.erase(focus_org);
  for (const SyncEvent& e : events) {
    if (out.direct_partners.contains(e.sender_org)) out.second_hop.insert(e.receiver_org);
    if (out.direct_partners.contains(e.receiver_org)) out.second_hop.insert(e.sender_org);
  }
  out.second_hop.erase(focus_org);
  for (const std::string& d : out.direct_partners) out.second_hop.erase(d);
  return out;
}

LabeledBids label_bidders(const std::vector<BidRecord>& bids,
                          const std::set<std::string>& direct_partners,
                          const OrgOntology& ontology) {
  LabeledBids out;
  std::set<std::string> warned;
  for (const BidRecord& b : bids) {
    LabeledBid lb{b, BidderLabel::kNonPartner, std::nullopt};
    if (const OrgEntry* org = ontology.find_by_alias(b.bidder)) {
      lb.org = org->org_name;
      if (direct_partners.contains(org->org_name)) lb.label = BidderLabel::kPartner;
    } else if (warned.insert(b.bidder).second) {
      out.warnings.push_back("bidder '" + b.bidder + "' not in ontology; labeled non_partner");
    }
    out.bids.push_back(std::move(lb));
  }
  return out;
}

}  // namespace echoaudit
