#include <gtest/gtest.h>

#include <algorithm>
#include <random>

#include "echoaudit/sync.h"
#include "helpers.h"

using namespace echoaudit;
using testutil::http;

namespace {

struct SyncFixture {
  OrgOntology orgs = testutil::ontology(R"([
    {"org_name": "AdOrg", "domains": ["adorg.example"], "categories": ["advertising_network"]},
    {"org_name": "OrgX", "domains": ["orgx.example"], "categories": ["advertising_network"], "aliases": ["ox"]},
    {"org_name": "OrgY", "domains": ["orgy.example"], "categories": ["advertising_network"]},
    {"org_name": "Focus", "domains": ["focus.example"], "categories": ["advertising_network"]}
  ])");
  FilterMatcher rules;
  PurposeOverrides overrides;
  EndpointClassifier classifier{orgs, rules, overrides, {}, "Focus"};

  std::vector<SkillSession> sessions;
  std::vector<HttpObservation> obs;
  std::vector<IdentifierToken> tokens;
  std::vector<SyncEvent> events;

  void run(const std::vector<FlowRecord>& flows) {
    sessions = segment_sessions(flows);
    obs = collect_http_observations(sessions, classifier);
    tokens = extract_identifiers(obs);
    events = detect_syncs(tokens, obs);
  }
};

SyncEvent edge(const std::string& from, const std::string& to) {
  SyncEvent e;
  e.sender_org = from;
  e.receiver_org = to;
  return e;
}

}  // namespace

TEST(Identifiers, CookieValueFromAdOrg) {
  SyncFixture fx;
  fx.run({http("c", 1, "https://px.adorg.example/p", {{"uid", "AbC123xYz789"}})});
  ASSERT_EQ(fx.tokens.size(), 1u);
  EXPECT_EQ(fx.tokens[0].value, "AbC123xYz789");
  EXPECT_EQ(fx.tokens[0].origin_org, "AdOrg");
  EXPECT_EQ(fx.tokens[0].source, TokenSource::kCookieValue);
}

TEST(Identifiers, ShortNumericParamIsNotToken) {
  SyncFixture fx;
  fx.run({http("c", 1, "https://px.adorg.example/p?w=300")});
  EXPECT_TRUE(fx.tokens.empty());
}

TEST(Identifiers, LowEntropyShapesRejected) {
  for (const char* v : {"300", "1650000000", "1650000000123", "en-US", "en-US,en;q=0.9", "300x250,728x90",
                        "https://a.example/x", "www.example.com", "homepage", "CATEGORY", "12.5000001"}) {
    EXPECT_FALSE(is_identifier_candidate(v)) << v;
  }
  for (const char* v : {"AbC123xYz789", "9a3705bfc8fa227bc7cf7ecd", "12345678", "u_7Hq2Zk9"}) {
    EXPECT_TRUE(is_identifier_candidate(v)) << v;
  }
}

TEST(Identifiers, LengthGateFollowsOption) {
  SyncOptions opts;
  opts.min_id_length = 16;
  EXPECT_FALSE(is_identifier_candidate("AbC123xYz789", opts));
}

TEST(Identifiers, PlantedAmongNoise) {
  const std::vector<std::string> planted = {"Zq81KdLm02Xc", "a7B9c3D1e5F0", "Q2w3E4r5T6y7", "mN0pQ1rS2tU3",
                                            "8f4e2a9c7b1d6e0f3a5b"};
  std::vector<std::string> noise;
  for (int i = 0; i < 10; ++i) noise.push_back(std::to_string(100 + i * 37));
  for (int i = 0; i < 10; ++i) noise.push_back(std::to_string(1650000000 + i));
  for (const char* s : {"en-US", "de-DE", "fr", "pt-BR", "en-GB,en;q=0.8", "300x250", "728x90", "160x600",
                        "320x50,300x250", "970x250"}) {
    noise.push_back(s);
  }
  for (const char* s : {"homepage", "articles", "sportsnews", "BANNER", "leaderboard", "sidebar_top",
                        "https://news.example.com/a", "www.recipes.example.com", "0.0123", "3.14159"}) {
    noise.push_back(s);
  }
  for (int i = 0; i < 10; ++i) noise.push_back(std::to_string(1650000000000LL + i));
  ASSERT_EQ(noise.size(), 50u);

  std::vector<FlowRecord> flows;
  std::int64_t t = 0;
  std::size_t p = 0;
  for (std::size_t i = 0; i < noise.size(); ++i) {
    std::string url = "https://px.adorg.example/b?k" + std::to_string(i) + "=" + noise[i];
    if (i % 10 == 3 && p < planted.size()) url += "&id=" + planted[p++];
    flows.push_back(http("c", ++t, url));
  }
  SyncFixture fx;
  fx.run(flows);
  std::vector<std::string> got;
  for (const auto& tk : fx.tokens) got.push_back(tk.value);
  std::sort(got.begin(), got.end());
  std::vector<std::string> want = planted;
  std::sort(want.begin(), want.end());
  EXPECT_EQ(got, want);
}

TEST(Syncs, TokenForwardedToOtherOrg) {
  SyncFixture fx;
  fx.run({http("c", 1, "https://a.orgx.example/set", {{"id", "Tk9aB8cD7eF6"}}),
          http("c", 2, "https://match.orgy.example/m?pid=Tk9aB8cD7eF6")});
  ASSERT_EQ(fx.events.size(), 1u);
  EXPECT_EQ(fx.events[0].sender_org, "OrgX");
  EXPECT_EQ(fx.events[0].receiver_org, "OrgY");
  EXPECT_EQ(fx.events[0].timestamp_ms, 2);
}

TEST(Syncs, SameOrgIsNotASync) {
  SyncFixture fx;
  fx.run({http("c", 1, "https://a.orgx.example/set", {{"id", "Tk9aB8cD7eF6"}}),
          http("c", 2, "https://b.orgx.example/m?pid=Tk9aB8cD7eF6")});
  EXPECT_TRUE(fx.events.empty());
}

TEST(Syncs, ChainsAndDecoys) {
  std::vector<FlowRecord> flows;
  std::int64_t t = 0;
  const std::vector<std::pair<std::string, std::string>> chains = {
      {"orgx.example", "orgy.example"}, {"adorg.example", "focus.example"}, {"orgy.example", "adorg.example"}};
  int k = 0;
  for (const auto& [from, to] : chains) {
    const std::string id = "Chn" + std::to_string(k++) + "xY7zQ2w";
    flows.push_back(http("c", ++t, "https://s." + from + "/c", {{"u", id}}));
    flows.push_back(http("c", ++t, "https://r." + to + "/m?u=" + id));
  }
  for (int d = 0; d < 2; ++d) {
    const std::string id = "Dec" + std::to_string(d) + "aB3cD4e";
    flows.push_back(http("c", ++t, "https://s.orgx.example/c", {{"u", id}}));
    flows.push_back(http("c", ++t, "https://other.orgx.example/m?u=" + id));
  }
  SyncFixture fx;
  fx.run(flows);
  EXPECT_EQ(fx.events.size(), 3u);
}

TEST(Syncs, NeverPrecedeFirstSeenAndOrderInvariant) {
  std::mt19937 rng(21);
  const std::vector<std::string> hosts = {"a.orgx.example", "b.orgy.example", "c.adorg.example",
                                          "d.focus.example", "e.unmapped.example"};
  const std::vector<std::string> ids = {"Id1aB2cD3eF4", "Id2gH3iJ4kL5", "Id3mN4oP5qR6"};
  for (int round = 0; round < 30; ++round) {
    std::vector<FlowRecord> flows;
    for (int i = 0; i < 40; ++i) {
      const std::string& host = hosts[rng() % hosts.size()];
      const std::string& id = ids[rng() % ids.size()];
      const std::int64_t t = static_cast<std::int64_t>(rng() % 10);
      if (rng() % 2) flows.push_back(http("c", t, "https://" + host + "/s", {{"u", id}}));
      else flows.push_back(http("c", t, "https://" + host + "/m?x=" + id));
    }
    SyncFixture a;
    a.run(flows);
    for (const SyncEvent& e : a.events) EXPECT_GE(e.timestamp_ms, e.token.first_seen_ms);

    std::stable_sort(flows.begin(), flows.end(),
                     [](const FlowRecord& x, const FlowRecord& y) { return x.timestamp_ms < y.timestamp_ms; });
    std::vector<FlowRecord> shuffled = flows;
    for (std::size_t i = 0; i < shuffled.size();) {
      std::size_t j = i;
      while (j < shuffled.size() && shuffled[j].timestamp_ms == shuffled[i].timestamp_ms) ++j;
      std::shuffle(shuffled.begin() + static_cast<std::ptrdiff_t>(i),
                   shuffled.begin() + static_cast<std::ptrdiff_t>(j), rng);
      i = j;
    }
    SyncFixture b;
    b.run(shuffled);
    ASSERT_EQ(a.events.size(), b.events.size());
    for (std::size_t i = 0; i < a.events.size(); ++i) {
      EXPECT_EQ(a.events[i].token.value, b.events[i].token.value);
      EXPECT_EQ(a.events[i].sender_org, b.events[i].sender_org);
      EXPECT_EQ(a.events[i].receiver_org, b.events[i].receiver_org);
      EXPECT_EQ(a.events[i].evidence_url, b.events[i].evidence_url);
    }
  }
}

TEST(PartnerSets, DirectAndSecondHop) {
  PartnerSets s = partner_sets({edge("B", "F"), edge("C", "B")}, "F");
  EXPECT_EQ(s.direct_partners, (std::set<std::string>{"B"}));
  EXPECT_EQ(s.second_hop, (std::set<std::string>{"C"}));
}

TEST(PartnerSets, NoEdges) {
  PartnerSets s = partner_sets({}, "F");
  EXPECT_TRUE(s.direct_partners.empty());
  EXPECT_TRUE(s.second_hop.empty());
}

TEST(PartnerSets, PlantedCardinalities) {
  std::vector<SyncEvent> events;
  for (int d = 0; d < 4; ++d) {
    const std::string direct = "D" + std::to_string(d);
    events.push_back(d % 2 ? edge(direct, "F") : edge("F", direct));
  }
  for (int h = 0; h < 6; ++h) events.push_back(edge("H" + std::to_string(h), "D" + std::to_string(h % 4)));
  events.push_back(edge("D0", "D1"));
  events.push_back(edge("H0", "H1"));  // not adjacent to a direct partner through this edge
  PartnerSets s = partner_sets(events, "F");
  EXPECT_EQ(s.direct_partners.size(), 4u);
  EXPECT_EQ(s.second_hop.size(), 6u);
}

TEST(PartnerGraph, EdgesCounted) {
  PartnerGraph g = build_partner_graph({edge("A", "B"), edge("A", "B"), edge("B", "C")}, "A");
  ASSERT_EQ(g.edges.size(), 2u);
  EXPECT_EQ(g.edges[0].count, 2u);
  EXPECT_EQ(g.nodes.size(), 3u);
}

TEST(LabelBidders, PartnerNonPartnerAndUnmapped) {
  SyncFixture fx;
  std::vector<BidRecord> bids;
  for (int i = 0; i < 10; ++i) {
    BidRecord b;
    b.persona = {"Vanilla", PersonaKind::kVanilla};
    b.bidder = i < 4 ? "ox" : (i < 8 ? "OrgY" : "mystery");
    b.cpm = 0.1 * (i + 1);
    bids.push_back(b);
  }
  LabeledBids out = label_bidders(bids, {"OrgX"}, fx.orgs);
  std::size_t partners = 0;
  for (const auto& lb : out.bids) partners += lb.label == BidderLabel::kPartner;
  EXPECT_EQ(partners, 4u);
  EXPECT_EQ(out.bids[0].org.value_or(""), "OrgX");
  EXPECT_EQ(out.bids[9].label, BidderLabel::kNonPartner);
  EXPECT_FALSE(out.bids[9].org.has_value());
  EXPECT_EQ(out.warnings.size(), 1u);
}

TEST(PatternMatcher, MatchesNaiveSearch) {
  std::mt19937 rng(8);
  const std::string alphabet = "abc";
  auto word = [&](std::size_t n) {
    std::string s;
    for (std::size_t i = 0; i < n; ++i) s += alphabet[rng() % alphabet.size()];
    return s;
  };
  for (int round = 0; round < 200; ++round) {
    std::vector<std::string> patterns;
    for (int i = 0; i < 6; ++i) patterns.push_back(word(1 + rng() % 4));
    const std::string text = word(30);
    PatternMatcher m(patterns);
    std::vector<std::size_t> expect;
    for (std::size_t i = 0; i < patterns.size(); ++i) {
      if (text.find(patterns[i]) != std::string::npos) expect.push_back(i);
    }
    EXPECT_EQ(m.find_all(text), expect);
  }
}
