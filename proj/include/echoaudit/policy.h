#pragma once

// Data-flow extraction and privacy-policy disclosure classification.

#include <array>
#include <filesystem>
#include <map>
#include <memory>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "echoaudit/endpoint.h"
#include "echoaudit/trace.h"
#include "json.hpp"

namespace echoaudit {

// ---------------------------------------------------------------------------
// Text normalization

// Collapses whitespace runs to one space and trims.
std::string normalize_whitespace(std::string_view text);

// Lowercased word tokens. Hyphens and punctuation separate words, apostrophes
// are kept ("don't"), a trailing possessive "'s" is dropped, and a plural
// "s" is stripped from words longer than three letters not ending in "ss".
std::vector<std::string> policy_tokens(std::string_view text);

// ---------------------------------------------------------------------------
// Data ontology

struct DataNode {
  std::string term;
  std::vector<std::string> synonyms;
  std::vector<std::string> parents;
  // Umbrella terms so broad they are never evidence (e.g. "pii").
  bool ignore = false;
};

class DataOntology {
 public:
  // {"nodes": [{term, synonyms, parents[, ignore]}]}. Throws InputError on
  // schema errors or dangling parents, InvariantViolation on cycles.
  static DataOntology from_json(const nlohmann::json& j);
  static DataOntology load(const std::filesystem::path& path);

  const DataNode* find(std::string_view term) const;
  // Transitive parents, nearest first (BFS order, deduplicated).
  std::vector<std::string> ancestors(std::string_view term) const;
  const std::vector<DataNode>& nodes() const { return nodes_; }

 private:
  std::vector<DataNode> nodes_;
  std::map<std::string, std::size_t, std::less<>> index_;
};

// ---------------------------------------------------------------------------
// Lexicon

struct PolicyLexicon {
  std::vector<std::string> verbs;
  std::vector<std::string> negations;
  std::map<OrgCategory, std::vector<std::string>> category_terms;
  std::vector<std::string> third_party_terms;
  std::vector<std::string> abbreviations;  // lowercased, with trailing '.'

  static PolicyLexicon from_json(const nlohmann::json& j);
  static PolicyLexicon load(const std::filesystem::path& path);
};

// ---------------------------------------------------------------------------
// Documents

// Splits normalized text after '.', '!' or '?' (plus any closing quotes or
// brackets) when followed by a space and an uppercase letter, unless the
// word ending there is a listed abbreviation. Joining the result with single
// spaces gives back normalize_whitespace(text).
std::vector<std::string> split_sentences(std::string_view text,
                                         const std::vector<std::string>& abbreviations);

struct PolicyDocument {
  std::string skill_id;
  std::string text;  // whitespace-normalized
  std::vector<std::string> sentences;
  std::vector<std::vector<std::string>> sentence_tokens;  // policy_tokens per sentence
  std::optional<std::string> source_url;
  bool includes_platform_policy = false;
};

PolicyDocument make_policy(std::string skill_id, std::string_view raw_text,
                           const PolicyLexicon& lexicon);

struct PolicySet {
  std::map<std::string, PolicyDocument> skills;  // by skill_id
  std::optional<PolicyDocument> platform;
};

// Reads every "<skill_id>.txt" in `dir`. `platform_file`, if given, names
// the platform policy inside or outside that directory; it is not treated
// as a skill policy.
PolicySet load_policies(const std::filesystem::path& dir, const PolicyLexicon& lexicon,
                        const std::optional<std::filesystem::path>& platform_file = std::nullopt);

// ---------------------------------------------------------------------------
// Data flows

struct DataFlowTuple {
  std::optional<std::string> data_type;  // absent in endpoint-only mode
  std::string entity;
  std::string skill_id;

  friend auto operator<=>(const DataFlowTuple&, const DataFlowTuple&) = default;
};

struct PayloadSignature {
  enum class Kind { kMagic, kContains, kKey };
  Kind kind = Kind::kContains;
  std::string pattern;
  std::string data_type;
};

// {"signatures": [{"data_type", "kind": "magic"|"contains"|"key", "pattern"}]}
// magic: body starts with pattern. contains: body contains pattern
// (case-insensitive). key: a JSON key, form/query field or request header
// with that name (case-insensitive).
std::vector<PayloadSignature> load_signatures(const std::filesystem::path& path);
std::vector<PayloadSignature> signatures_from_json(const nlohmann::json& j);

// Data types detected in one HTTP request, sorted.
std::set<std::string> detect_data_types(const HttpEvent& http,
                                        const std::vector<PayloadSignature>& signatures);

// One tuple per distinct (skill, data type, entity) over skill sessions
// (crawl phase excluded). With `unencrypted`, HTTP flows yield typed tuples
// from signatures and nothing when no signature fires; every other resolved
// flow yields an entity-only tuple. Sorted.
std::vector<DataFlowTuple> extract_flows(const std::vector<SkillSession>& sessions,
                                         const FlowVerdicts& verdicts, bool unencrypted,
                                         const std::vector<PayloadSignature>& signatures);

// ---------------------------------------------------------------------------
// Disclosure

enum class Disclosure { kClear, kVague, kOmitted, kNoPolicy };
const char* to_string(Disclosure d);
Disclosure parse_disclosure(std::string_view s);
// Higher is clearer: clear 3, vague 2, omitted 1, no_policy 0.
int clarity(Disclosure d);

enum class MatchMode { kEntity, kDataType, kJoint };
const char* to_string(MatchMode m);
MatchMode parse_match_mode(std::string_view s);

struct DisclosureVerdict {
  DataFlowTuple tuple;
  Disclosure verdict = Disclosure::kOmitted;
  std::optional<std::string> evidence_sentence;
  std::optional<std::string> matched_term;
  std::optional<std::string> evidence_source;  // skill id or "platform"
};

// Rule-based statement matcher. A sentence qualifies only if it has a
// collection/sharing verb and no negation cue.
class DisclosureClassifier {
 public:
  DisclosureClassifier(const PolicyLexicon& lexicon, const DataOntology& data_ontology,
                       const OrgOntology& org_ontology);

  // mode defaults to kEntity when tuple.data_type is absent, else kDataType.
  DisclosureVerdict classify(const DataFlowTuple& tuple, const PolicyDocument* policy,
                             std::optional<MatchMode> mode = std::nullopt) const;

 private:
  struct Term {
    std::string text;
    std::vector<std::string> tokens;
  };
  struct SentenceMatch {
    Disclosure level = Disclosure::kOmitted;
    std::string term;
  };
  SentenceMatch match_entity(const std::vector<std::string>& toks, const std::string& entity) const;
  SentenceMatch match_data(const std::vector<std::string>& toks, const std::string& data_type) const;
  bool qualifies(const std::vector<std::string>& toks) const;
  static std::optional<std::string> find_term(const std::vector<std::string>& toks,
                                              const std::vector<Term>& terms);
  std::vector<Term> terms_of(const std::vector<std::string>& raw) const;

  const DataOntology* data_;
  const OrgOntology* orgs_;
  std::set<std::string> verbs_;
  std::set<std::string> negations_;
  std::map<OrgCategory, std::vector<Term>> category_terms_;
  std::vector<Term> third_party_terms_;
};

struct DisclosureSummary {
  std::array<std::size_t, 4> counts{};  // indexed by Disclosure
  std::size_t operator[](Disclosure d) const { return counts[static_cast<int>(d)]; }
};

struct SkillAudit {
  std::string skill_id;
  std::vector<DisclosureVerdict> verdicts;
  DisclosureSummary summary;
};

// Tuples of other skills are ignored. With include_platform_policy the
// clearest verdict across the skill and platform policies is kept.
SkillAudit audit_skill(const std::string& skill_id, const std::vector<DataFlowTuple>& tuples,
                       const PolicySet& policies, bool include_platform_policy,
                       const DisclosureClassifier& classifier);

}  // namespace echoaudit
