#pragma once

// Hostname -> organization mapping, party/purpose classification and the
// traffic distribution tables built on top of it.

#include <array>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <unordered_map>
#include <unordered_set>
#include <vector>

#include "echoaudit/trace.h"
#include "json.hpp"

namespace echoaudit {

// ---------------------------------------------------------------------------
// Registered domains (eTLD+1)

enum class DomainFlag {
  kOk,
  kUnknownSuffix,  // no suffix rule matched; last two labels used
  kSingleLabel,    // hostname returned unchanged
  kIsSuffix,       // hostname is itself a public suffix; returned unchanged
  kIpAddress,      // IP literal; returned unchanged
};

struct RegisteredDomain {
  std::string domain;
  DomainFlag flag = DomainFlag::kOk;
};

// Public-suffix rules in the publicsuffix.org file format: one rule per line,
// "//" comments, "*." wildcards and "!" exceptions.
class PublicSuffixList {
 public:
  static PublicSuffixList parse(std::string_view text);
  static PublicSuffixList load(const std::filesystem::path& path);
  // The snapshot compiled into the library.
  static const PublicSuffixList& builtin();

  // Throws InputError if `hostname` is not syntactically valid.
  RegisteredDomain registered_domain(std::string_view hostname) const;
  std::size_t rule_count() const { return rules_.size() + wildcards_.size() + exceptions_.size(); }

 private:
  std::unordered_set<std::string> rules_;
  std::unordered_set<std::string> wildcards_;   // "ck" for "*.ck"
  std::unordered_set<std::string> exceptions_;  // "www.ck" for "!www.ck"
};

// Uses the builtin snapshot.
RegisteredDomain registered_domain(std::string_view hostname);

// ---------------------------------------------------------------------------
// Organizations

enum class OrgCategory {
  kAnalyticProvider,
  kAdvertisingNetwork,
  kContentProvider,
  kPlatformProvider,
  kVoiceAssistantService,
};

const char* to_string(OrgCategory c);
OrgCategory parse_org_category(std::string_view s);

struct OrgEntry {
  std::string org_name;
  std::vector<std::string> domains;  // registered domains
  std::set<OrgCategory> categories;
  // Alternative spellings: legal names used in policies, header-bidding
  // bidder codes.
  std::vector<std::string> aliases;
};

class OrgOntology {
 public:
  // JSON array of {org_name, domains, categories[, aliases]}. Throws
  // InputError on schema problems and InvariantViolation if a domain maps to
  // two organizations or an entry has no categories.
  static OrgOntology from_json(const nlohmann::json& j);
  static OrgOntology load(const std::filesystem::path& path);

  const std::vector<OrgEntry>& entries() const { return entries_; }
  const OrgEntry* find_by_domain(std::string_view registered_domain) const;
  const OrgEntry* find_by_name(std::string_view org_name) const;
  // Case-insensitive match on org_name or any alias.
  const OrgEntry* find_by_alias(std::string_view name) const;

 private:
  std::vector<OrgEntry> entries_;
  std::unordered_map<std::string, std::size_t> by_domain_;
  std::unordered_map<std::string, std::size_t> by_name_;
  std::unordered_map<std::string, std::size_t> by_alias_;
};

// ---------------------------------------------------------------------------
// Verdicts

enum class Party { kPlatform, kSkillVendor, kThirdParty };
enum class Purpose { kFunctional, kAdvertisingTracking };

const char* to_string(Party p);
const char* to_string(Purpose p);
Purpose parse_purpose(std::string_view s);

inline constexpr std::string_view kUnknownOrg = "unknown";

struct SkillContext {
  std::string skill_id;
  std::vector<std::string> vendor_domains;
};

struct EndpointVerdict {
  std::string hostname;
  std::string registered_domain;
  std::string org_name;
  Party party = Party::kThirdParty;
  Purpose purpose = Purpose::kFunctional;
  std::optional<std::string> skill_id;  // context the party was computed in
};

// Fills org and party. Purpose is left functional; see classify_purpose.
EndpointVerdict map_org(std::string_view hostname, const OrgOntology& ontology,
                        const std::optional<SkillContext>& skill_context,
                        std::string_view platform_org = "Amazon",
                        const PublicSuffixList& psl = PublicSuffixList::builtin());

// ---------------------------------------------------------------------------
// Filter lists

enum class RuleScope { kExactHost, kDomainAndSubdomains };

struct FilterRule {
  std::string pattern;
  RuleScope scope = RuleScope::kDomainAndSubdomains;
};

struct FilterRuleSet {
  std::vector<FilterRule> rules;
  std::string source;
  std::vector<LineWarning> rejected;
};

// Hosts-style ("0.0.0.0 host") or bare-domain lines; '#' starts a comment
// line. Hosts entries are exact-host rules, bare domains cover subdomains.
FilterRuleSet parse_filter_list(std::string_view text, std::string source);
FilterRuleSet parse_filter_list(const std::filesystem::path& path);

// Immutable hash index over one or more rule sets.
class FilterMatcher {
 public:
  FilterMatcher() = default;
  explicit FilterMatcher(const std::vector<FilterRuleSet>& sets);
  void add(const FilterRuleSet& set);
  bool matches(std::string_view hostname) const;

 private:
  std::unordered_set<std::string> exact_;
  std::unordered_set<std::string> domains_;
};

// Brute-force reference semantics for one rule.
bool rule_matches(const FilterRule& rule, std::string_view hostname);

using PurposeOverrides = std::map<std::string, Purpose>;

// JSON object {hostname: "functional" | "advertising_tracking"}.
PurposeOverrides load_overrides(const std::filesystem::path& path);

Purpose classify_purpose(std::string_view hostname, const FilterMatcher& rules,
                         const PurposeOverrides& overrides);

// JSON object {skill_id: [vendor registered domains]}.
std::map<std::string, std::vector<std::string>> load_skill_vendors(
    const std::filesystem::path& path);

// Everything needed to produce an EndpointVerdict for (hostname, skill).
class EndpointClassifier {
 public:
  EndpointClassifier(const OrgOntology& ontology, const FilterMatcher& rules,
                     const PurposeOverrides& overrides,
                     std::map<std::string, std::vector<std::string>> skill_vendors,
                     std::string platform_org,
                     const PublicSuffixList& psl = PublicSuffixList::builtin());

  EndpointVerdict classify(std::string_view hostname,
                           const std::optional<std::string>& skill_id) const;

  // Organization identity used for sync analysis: the ontology name when
  // known, else the registered domain.
  std::string org_identity(std::string_view hostname) const;

  const OrgOntology& ontology() const { return *ontology_; }
  const std::string& platform_org() const { return platform_org_; }

 private:
  const OrgOntology* ontology_;
  const FilterMatcher* rules_;
  const PurposeOverrides* overrides_;
  std::map<std::string, std::vector<std::string>> skill_vendors_;
  std::string platform_org_;
  const PublicSuffixList* psl_;
};

// Per-flow verdicts for a segmented, resolved trace.
struct FlowVerdicts {
  std::vector<EndpointVerdict> verdicts;
  // Parallel to sessions[i].flows; index into `verdicts`.
  std::vector<std::vector<std::optional<std::size_t>>> index;

  const EndpointVerdict* at(FlowRef ref) const {
    const auto& slot = index[ref.session][ref.flow];
    return slot ? &verdicts[*slot] : nullptr;
  }
};

FlowVerdicts classify_flows(const std::vector<SkillSession>& sessions,
                            const ResolutionReport& resolution,
                            const EndpointClassifier& classifier);

// ---------------------------------------------------------------------------
// Distribution tables

enum class DistributionWeight { kFlows, kBytes };
const char* to_string(DistributionWeight w);
DistributionWeight parse_distribution_weight(std::string_view s);

struct PartyPurposeMatrix {
  // weight[party][purpose]
  std::array<std::array<double, 2>, 3> weight{};
  double total = 0;                // over attributed flows
  std::size_t unresolved_flows = 0;
  double unresolved_weight = 0;

  // Percent of `total`; 0 when total is 0.
  double percent(Party party, Purpose purpose) const;
  double party_percent(Party party) const;
  double purpose_percent(Purpose purpose) const;
};

struct PersonaThirdPartyCounts {
  std::string persona;
  std::size_t advertising_tracking = 0;  // distinct third-party hostnames
  std::size_t functional = 0;
};

struct SkillAtsDomains {
  std::string skill_id;
  std::vector<std::string> hostnames;   // sorted
  std::vector<std::string> aggregated;  // "*(n).domain" for n > 1 subdomains
};

struct ContactedDomainRow {
  Party party = Party::kThirdParty;
  std::string org_name;
  std::string label;  // hostname or "*(n).registered_domain"
  std::string registered_domain;
  Purpose purpose = Purpose::kFunctional;
  std::size_t hostnames = 0;
  std::size_t skills = 0;
  std::size_t flows = 0;
};

struct TrafficDistribution {
  PartyPurposeMatrix matrix;
  std::vector<PersonaThirdPartyCounts> personas;
  std::vector<SkillAtsDomains> skills;
  std::vector<ContactedDomainRow> domains;
};

// Renders a group of hostnames under one registered domain the way the
// domain tables do: the hostname itself, or "*(n).domain".
std::string aggregate_label(const std::set<std::string>& hostnames,
                            const std::string& registered_domain);

// Crawl-phase (browser) flows and DNS flows are excluded; unresolved flows
// are counted separately and excluded from the percentages.
TrafficDistribution traffic_distribution(const std::vector<SkillSession>& sessions,
                                         const FlowVerdicts& verdicts,
                                         DistributionWeight weight = DistributionWeight::kFlows);

}  // namespace echoaudit
