#include <gtest/gtest.h>

#include <random>

#include "echoaudit/error.h"
#include "echoaudit/metrics.h"
#include "echoaudit/policy.h"
#include "helpers.h"

using namespace echoaudit;

namespace {

struct PolicyEnv {
  std::filesystem::path dir = testutil::fixture("policy_audit");
  PolicyLexicon lexicon = PolicyLexicon::load(dir / "lexicon.json");
  DataOntology data = DataOntology::load(dir / "data_ontology.json");
  OrgOntology orgs = OrgOntology::load(dir / "org_ontology.json");
  DisclosureClassifier classifier{lexicon, data, orgs};

  PolicyDocument doc(const std::string& text) { return make_policy("k", text, lexicon); }
  Disclosure entity(const std::string& org, const std::string& text) {
    PolicyDocument d = doc(text);
    return classifier.classify({std::nullopt, org, "k"}, &d).verdict;
  }
  Disclosure typed(const std::string& type, const std::string& org, const std::string& text) {
    PolicyDocument d = doc(text);
    return classifier.classify({type, org, "k"}, &d).verdict;
  }
};

}  // namespace

TEST(Tokens, PluralsPossessivesHyphens) {
  EXPECT_EQ(policy_tokens("Amazon's partners don't e-mail"),
            (std::vector<std::string>{"amazon", "partner", "don't", "e", "mail"}));
  EXPECT_EQ(policy_tokens("address ads"), (std::vector<std::string>{"address", "ads"}));
}

TEST(Sentences, SplitsAndRejoins) {
  const std::vector<std::string> abbr = {"e.g.", "inc."};
  const std::string text = "We send data, e.g. Logs to Acme Inc. Partners. Then   more!  Yes? ok.";
  auto s = split_sentences(text, abbr);
  EXPECT_EQ(s, (std::vector<std::string>{"We send data, e.g. Logs to Acme Inc. Partners.", "Then more!",
                                         "Yes? ok."}));
  std::string joined;
  for (const auto& x : s) joined += (joined.empty() ? "" : " ") + x;
  EXPECT_EQ(joined, normalize_whitespace(text));
}

TEST(Sentences, PartitionProperty) {
  std::mt19937 rng(17);
  const std::vector<std::string> words = {"We", "share", "data.", "Amazon", "e.g.", "x!", "Then", "?", "ok",
                                          "\"Quoted.\"", "(Note.)", "Inc.", "b"};
  for (int round = 0; round < 300; ++round) {
    std::string text;
    for (int i = 0; i < 20; ++i) text += words[rng() % words.size()] + std::string(1 + rng() % 3, ' ');
    auto s = split_sentences(text, {"e.g.", "inc."});
    std::string joined;
    for (const auto& x : s) {
      EXPECT_FALSE(x.empty());
      joined += (joined.empty() ? "" : " ") + x;
    }
    EXPECT_EQ(joined, normalize_whitespace(text));
  }
}

TEST(DataOntology, Ancestors) {
  PolicyEnv env;
  EXPECT_EQ(env.data.ancestors("voice_recording"),
            (std::vector<std::string>{"audio", "personal_information", "information"}));
}

TEST(DataOntology, CycleRejected) {
  auto j = nlohmann::json::parse(R"({"nodes": [
    {"term": "a", "synonyms": [], "parents": ["b"]},
    {"term": "b", "synonyms": [], "parents": ["a"]}]})");
  EXPECT_THROW(DataOntology::from_json(j), InvariantViolation);
}

TEST(Disclosure, NamedOrgIsClear) {
  PolicyEnv env;
  EXPECT_EQ(env.entity("Amazon", "Your spoken request is passed to the voice partner you chose, such as Amazon, "
                                 "which may then process it."),
            Disclosure::kClear);
}

TEST(Disclosure, RecordingNamedToAmazonIsClearInDataMode) {
  PolicyEnv env;
  EXPECT_EQ(env.typed("voice_recording", "Amazon",
                      "The voice recording is sent on to Amazon. We send the audio recording to Amazon."),
            Disclosure::kClear);
}

TEST(Disclosure, CategoryTermIsVague) {
  PolicyEnv env;
  EXPECT_EQ(env.entity("Amazon", "Our products may send anonymized details to an analytics tool."),
            Disclosure::kVague);
  EXPECT_EQ(env.entity("Triton Digital", "We share some details with external service providers."),
            Disclosure::kVague);
}

TEST(Disclosure, AncestorTermIsVagueInDataMode) {
  PolicyEnv env;
  EXPECT_EQ(env.typed("precise_location", "Garmin", "We collect your location."), Disclosure::kVague);
}

TEST(Disclosure, NothingMatchingIsOmitted) {
  PolicyEnv env;
  EXPECT_EQ(env.entity("Podtrac", "We collect your name."), Disclosure::kOmitted);
}

TEST(Disclosure, NegatedSentenceIsOmitted) {
  PolicyEnv env;
  EXPECT_EQ(env.entity("Amazon", "We do not share anything with Amazon."), Disclosure::kOmitted);
}

TEST(Disclosure, VerbRequired) {
  PolicyEnv env;
  EXPECT_EQ(env.entity("Amazon", "Amazon is a company."), Disclosure::kOmitted);
}

TEST(Disclosure, NoPolicy) {
  PolicyEnv env;
  DisclosureVerdict v = env.classifier.classify({std::nullopt, "Amazon", "k"}, nullptr);
  EXPECT_EQ(v.verdict, Disclosure::kNoPolicy);
  EXPECT_FALSE(v.evidence_sentence);
}

TEST(Disclosure, ClearOutranksEarlierVague) {
  PolicyEnv env;
  PolicyDocument d = env.doc("We share data with partners. We share data with Amazon.");
  DisclosureVerdict v = env.classifier.classify({std::nullopt, "Amazon", "k"}, &d);
  EXPECT_EQ(v.verdict, Disclosure::kClear);
  EXPECT_EQ(*v.evidence_sentence, "We share data with Amazon.");
}

TEST(Disclosure, EvidencePresentForClearAndVague) {
  PolicyEnv env;
  PolicyDocument d = env.doc("We share data with partners.");
  DisclosureVerdict v = env.classifier.classify({std::nullopt, "Podtrac", "k"}, &d);
  EXPECT_EQ(v.verdict, Disclosure::kVague);
  ASSERT_TRUE(v.evidence_sentence);
  EXPECT_EQ(*v.matched_term, "partner");
}

TEST(Disclosure, MonotoneInEvidence) {
  PolicyEnv env;
  const std::vector<std::string> extra = {"We never sell data.", "Partners may receive logs.",
                                          "Hello there.", "We share usage data with advertisers.",
                                          "We do not use Amazon."};
  std::string text = "We send requests to Amazon.";
  std::mt19937 rng(2);
  for (int i = 0; i < 30; ++i) {
    const std::string& s = extra[rng() % extra.size()];
    text = rng() % 2 ? text + " " + s : s + " " + text;
    EXPECT_EQ(env.entity("Amazon", text), Disclosure::kClear);
  }
}

TEST(Disclosure, WhitespaceNormalizationInvariant) {
  PolicyEnv env;
  const std::string a = "We share data with partners. We send logs to Podtrac.";
  const std::string b = "  We   share data\nwith partners.\n\n\tWe send logs   to Podtrac.  ";
  for (const char* org : {"Podtrac", "Amazon", "Chartable"}) {
    EXPECT_EQ(env.entity(org, a), env.entity(org, b));
  }
}

TEST(Disclosure, JointModeTakesWeakerSide) {
  PolicyEnv env;
  PolicyDocument d = env.doc("We send your location to Garmin.");
  auto v = env.classifier.classify({"precise_location", "Garmin", "k"}, &d, MatchMode::kJoint);
  EXPECT_EQ(v.verdict, Disclosure::kVague);
}

namespace {

struct AuditEnv : PolicyEnv {
  PolicySet policies = load_policies(dir / "policies", lexicon, dir / "platform_policy.txt");
  std::vector<GoldLabel> gold = load_gold(dir / "labels.csv");

  std::vector<DataFlowTuple> tuples() const {
    std::vector<DataFlowTuple> out;
    for (const auto& g : gold) out.push_back(g.tuple);
    return out;
  }
  std::set<std::string> skills() const {
    std::set<std::string> out;
    for (const auto& g : gold) out.insert(g.tuple.skill_id);
    return out;
  }
};

}  // namespace

TEST(AuditSkill, TenSkillFixtureMatchesHandLabels) {
  AuditEnv env;
  ASSERT_EQ(env.skills().size(), 10u);
  DisclosureSummary total;
  std::vector<DisclosureVerdict> all;
  for (const auto& skill : env.skills()) {
    SkillAudit a = audit_skill(skill, env.tuples(), env.policies, false, env.classifier);
    for (int i = 0; i < 4; ++i) total.counts[static_cast<std::size_t>(i)] += a.summary.counts[static_cast<std::size_t>(i)];
    all.insert(all.end(), a.verdicts.begin(), a.verdicts.end());
  }
  EXPECT_EQ(total[Disclosure::kClear], 8u);
  EXPECT_EQ(total[Disclosure::kVague], 11u);
  EXPECT_EQ(total[Disclosure::kOmitted], 6u);
  EXPECT_EQ(total[Disclosure::kNoPolicy], 5u);
  ValidationMetrics m = validation_metrics(all, env.gold);
  EXPECT_DOUBLE_EQ(m.micro_f1, 1.0);
}

TEST(AuditSkill, NoPolicySkill) {
  AuditEnv env;
  SkillAudit a = audit_skill("delta_fit", env.tuples(), env.policies, false, env.classifier);
  EXPECT_EQ(a.verdicts.size(), 3u);
  EXPECT_EQ(a.summary[Disclosure::kNoPolicy], 3u);
}

TEST(AuditSkill, PlatformPolicyUpgrades) {
  AuditEnv env;
  SkillAudit off = audit_skill("hotel_host", env.tuples(), env.policies, false, env.classifier);
  SkillAudit on = audit_skill("hotel_host", env.tuples(), env.policies, true, env.classifier);
  ASSERT_EQ(off.verdicts.size(), 2u);
  EXPECT_EQ(off.verdicts[1].verdict, Disclosure::kOmitted);
  EXPECT_EQ(on.verdicts[1].verdict, Disclosure::kClear);
  EXPECT_EQ(on.verdicts[1].evidence_source.value_or(""), "platform");
}

TEST(AuditSkill, PlatformPolicyNeverWorse) {
  AuditEnv env;
  for (const auto& skill : env.skills()) {
    SkillAudit off = audit_skill(skill, env.tuples(), env.policies, false, env.classifier);
    SkillAudit on = audit_skill(skill, env.tuples(), env.policies, true, env.classifier);
    ASSERT_EQ(off.verdicts.size(), on.verdicts.size());
    for (std::size_t i = 0; i < off.verdicts.size(); ++i) {
      EXPECT_GE(clarity(on.verdicts[i].verdict), clarity(off.verdicts[i].verdict)) << skill;
    }
  }
}

namespace {

struct FlowEnv : PolicyEnv {
  FilterMatcher rules{{parse_filter_list("podtrac.com\n", "t")}};
  PurposeOverrides overrides;
  EndpointClassifier endpoints{orgs, rules, overrides, {}, "Amazon"};
  std::vector<PayloadSignature> signatures = load_signatures(dir / "signatures.json");

  std::vector<DataFlowTuple> run(const std::vector<FlowRecord>& flows, bool unencrypted) {
    auto sessions = segment_sessions(flows);
    auto resolution = resolve_domains(sessions);
    auto verdicts = classify_flows(sessions, resolution, endpoints);
    return extract_flows(sessions, verdicts, unencrypted, signatures);
  }
};

FlowRecord post(const std::string& url, const std::string& body) {
  FlowRecord f = testutil::http("s1", 1, url);
  f.phase = Phase::kInteract;
  f.skill_id = "sonos";
  f.persona = {"P", PersonaKind::kInterest};
  f.http->method = HttpMethod::kPost;
  f.http->body_excerpt = body;
  return f;
}

}  // namespace

TEST(ExtractFlows, AudioPayloadToAmazon) {
  FlowEnv env;
  auto tuples = env.run({post("https://avs-alexa-4-na.amazon.com/v1/events", "OggS\x01rest")}, true);
  ASSERT_EQ(tuples.size(), 1u);
  EXPECT_EQ(tuples[0].data_type.value_or(""), "voice_recording");
  EXPECT_EQ(tuples[0].entity, "Amazon");
}

TEST(ExtractFlows, PlantedCustomerIdKey) {
  FlowEnv env;
  auto tuples = env.run({post("https://api.amazonalexa.com/v2/x", R"({"customerId":"A1B2C3","n":1})")}, true);
  ASSERT_EQ(tuples.size(), 1u);
  EXPECT_EQ(tuples[0].data_type.value_or(""), "customer_id");
}

TEST(ExtractFlows, EncryptedFlowGivesEntityOnly) {
  FlowEnv env;
  FlowRecord f = testutil::tls("s1", 1, "10.0.0.1", "dts.podtrac.com", "pod");
  auto tuples = env.run({f}, false);
  ASSERT_EQ(tuples.size(), 1u);
  EXPECT_FALSE(tuples[0].data_type);
  EXPECT_EQ(tuples[0].entity, "Podtrac");
}

TEST(ExtractFlows, UndetectablePayloadGivesNothing) {
  FlowEnv env;
  EXPECT_TRUE(env.run({post("https://api.amazonalexa.com/v2/x", "hello")}, true).empty());
}
