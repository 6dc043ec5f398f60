#include "echoaudit/endpoint.h"

#include <algorithm>
#include <sstream>
#include <tuple>

#include "echoaudit/error.h"
#include "echoaudit/jsonl.h"
#include "echoaudit/strings.h"

namespace echoaudit {

namespace detail {
extern const std::string_view kBuiltinPublicSuffixes;
}

using nlohmann::json;

// ---------------------------------------------------------------------------
// PublicSuffixList

PublicSuffixList PublicSuffixList::parse(std::string_view text) {
  PublicSuffixList psl;
  std::istringstream in{std::string(text)};
  std::string raw;
  while (std::getline(in, raw)) {
    std::string_view line = trim(raw);
    if (line.empty() || line.starts_with("//")) continue;
    // Only the first whitespace-delimited token is a rule.
    line = line.substr(0, line.find_first_of(" \t"));
    std::string rule = to_lower(line);
    if (rule.starts_with("!")) {
      psl.exceptions_.insert(rule.substr(1));
    } else if (rule.starts_with("*.")) {
      psl.wildcards_.insert(rule.substr(2));
    } else {
      psl.rules_.insert(std::move(rule));
    }
  }
  return psl;
}

PublicSuffixList PublicSuffixList::load(const std::filesystem::path& path) {
  return parse(read_file(path));
}

const PublicSuffixList& PublicSuffixList::builtin() {
  static const PublicSuffixList psl = parse(detail::kBuiltinPublicSuffixes);
  return psl;
}

RegisteredDomain PublicSuffixList::registered_domain(std::string_view hostname) const {
  std::string host = to_lower(hostname);
  if (!host.empty() && host.back() == '.') host.pop_back();
  if (is_ip_address(host)) return {host, DomainFlag::kIpAddress};
  if (!is_valid_hostname(host)) throw InputError("invalid hostname '" + std::string(hostname) + "'");

  const std::vector<std::string> labels = split(host, '.');
  const std::size_t n = labels.size();
  if (n == 1) return {host, DomainFlag::kSingleLabel};

  // suffix_at(i) = labels[i..n) joined with '.'
  std::vector<std::size_t> offsets(n);
  for (std::size_t i = 0, off = 0; i < n; ++i) {
    offsets[i] = off;
    off += labels[i].size() + 1;
  }
  auto suffix_at = [&](std::size_t i) { return std::string_view(host).substr(offsets[i]); };

  std::size_t suffix_labels = 0;
  bool matched = false;
  for (std::size_t i = 0; i < n && !matched; ++i) {
    const std::string key(suffix_at(i));
    if (exceptions_.contains(key)) {
      suffix_labels = n - i - 1;
      matched = true;
    } else if (rules_.contains(key) || (i + 1 < n && wildcards_.contains(std::string(suffix_at(i + 1))))) {
      suffix_labels = n - i;
      matched = true;
    }
  }
  DomainFlag flag = DomainFlag::kOk;
  if (!matched) {
    suffix_labels = 1;
    flag = DomainFlag::kUnknownSuffix;
  }
  if (suffix_labels >= n) return {host, DomainFlag::kIsSuffix};
  return {std::string(suffix_at(n - suffix_labels - 1)), flag};
}

RegisteredDomain registered_domain(std::string_view hostname) {
  return PublicSuffixList::builtin().registered_domain(hostname);
}

// ---------------------------------------------------------------------------
// OrgOntology

namespace {

constexpr std::array<std::pair<OrgCategory, const char*>, 5> kCategories{{
    {OrgCategory::kAnalyticProvider, "analytic_provider"},
    {OrgCategory::kAdvertisingNetwork, "advertising_network"},
    {OrgCategory::kContentProvider, "content_provider"},
    {OrgCategory::kPlatformProvider, "platform_provider"},
    {OrgCategory::kVoiceAssistantService, "voice_assistant_service"},
}};

std::vector<std::string> string_array(const json& j, const char* key, bool required) {
  std::vector<std::string> out;
  auto it = j.find(key);
  if (it == j.end() || it->is_null()) {
    if (required) throw InputError(std::string("missing field '") + key + "'");
    return out;
  }
  if (!it->is_array()) throw InputError(std::string("field '") + key + "' must be an array");
  for (const json& v : *it) {
    if (!v.is_string()) throw InputError(std::string("entries of '") + key + "' must be strings");
    out.push_back(v.get<std::string>());
  }
  return out;
}

}  // namespace

const char* to_string(OrgCategory c) {
  for (const auto& [cat, name] : kCategories) {
    if (cat == c) return name;
  }
  return "?";
}

OrgCategory parse_org_category(std::string_view s) {
  for (const auto& [cat, name] : kCategories) {
    if (s == name) return cat;
  }
  throw InputError("unknown organization category '" + std::string(s) + "'");
}

OrgOntology OrgOntology::from_json(const json& j) {
  if (!j.is_array()) throw InputError("organization ontology must be a JSON array");
  OrgOntology onto;
  for (const json& e : j) {
    if (!e.is_object()) throw InputError("ontology entries must be objects");
    OrgEntry entry;
    auto name = e.find("org_name");
    if (name == e.end() || !name->is_string() || name->get<std::string>().empty()) {
      throw InputError("ontology entry without org_name");
    }
    entry.org_name = name->get<std::string>();
    for (std::string d : string_array(e, "domains", true)) {
      d = to_lower(d);
      if (!is_valid_hostname(d)) throw InputError("invalid ontology domain '" + d + "'");
      entry.domains.push_back(std::move(d));
    }
    for (const std::string& c : string_array(e, "categories", true)) {
      entry.categories.insert(parse_org_category(c));
    }
    if (entry.categories.empty()) {
      throw InvariantViolation("organization '" + entry.org_name + "' has no categories");
    }
    entry.aliases = string_array(e, "aliases", false);

    const std::size_t idx = onto.entries_.size();
    if (!onto.by_name_.emplace(entry.org_name, idx).second) {
      throw InvariantViolation("organization '" + entry.org_name + "' listed twice");
    }
    for (const std::string& d : entry.domains) {
      auto [it, inserted] = onto.by_domain_.emplace(d, idx);
      if (!inserted && it->second != idx) {
        throw InvariantViolation("domain '" + d + "' maps to both '" +
                                 onto.entries_[it->second].org_name + "' and '" +
                                 entry.org_name + "'");
      }
    }
    onto.by_alias_.emplace(to_lower(entry.org_name), idx);
    for (const std::string& a : entry.aliases) onto.by_alias_.emplace(to_lower(a), idx);
    onto.entries_.push_back(std::move(entry));
  }
  return onto;
}

OrgOntology OrgOntology::load(const std::filesystem::path& path) {
  try {
    return from_json(json::parse(read_file(path)));
  } catch (const json::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

const OrgEntry* OrgOntology::find_by_domain(std::string_view registered_domain) const {
  auto it = by_domain_.find(std::string(registered_domain));
  return it == by_domain_.end() ? nullptr : &entries_[it->second];
}

const OrgEntry* OrgOntology::find_by_name(std::string_view org_name) const {
  auto it = by_name_.find(std::string(org_name));
  return it == by_name_.end() ? nullptr : &entries_[it->second];
}

const OrgEntry* OrgOntology::find_by_alias(std::string_view name) const {
  auto it = by_alias_.find(to_lower(name));
  return it == by_alias_.end() ? nullptr : &entries_[it->second];
}

// ---------------------------------------------------------------------------
// Verdicts

const char* to_string(Party p) {
  switch (p) {
    case Party::kPlatform: return "platform";
    case Party::kSkillVendor: return "skill_vendor";
    case Party::kThirdParty: return "third_party";
  }
  return "?";
}

const char* to_string(Purpose p) {
  return p == Purpose::kFunctional ? "functional" : "advertising_tracking";
}

Purpose parse_purpose(std::string_view s) {
  if (s == "functional") return Purpose::kFunctional;
  if (s == "advertising_tracking") return Purpose::kAdvertisingTracking;
  throw InputError("unknown purpose '" + std::string(s) + "'");
}

EndpointVerdict map_org(std::string_view hostname, const OrgOntology& ontology,
                        const std::optional<SkillContext>& skill_context,
                        std::string_view platform_org, const PublicSuffixList& psl) {
  EndpointVerdict v;
  v.hostname = to_lower(hostname);
  v.registered_domain = psl.registered_domain(v.hostname).domain;
  const OrgEntry* org = ontology.find_by_domain(v.registered_domain);
  v.org_name = org ? org->org_name : std::string(kUnknownOrg);

  if (org && org->org_name == platform_org) {
    v.party = Party::kPlatform;
  } else if (skill_context &&
             std::find(skill_context->vendor_domains.begin(), skill_context->vendor_domains.end(),
                       v.registered_domain) != skill_context->vendor_domains.end()) {
    v.party = Party::kSkillVendor;
  } else {
    v.party = Party::kThirdParty;
  }
  if (skill_context) v.skill_id = skill_context->skill_id;
  return v;
}

// ---------------------------------------------------------------------------
// Filter lists

FilterRuleSet parse_filter_list(std::string_view text, std::string source) {
  FilterRuleSet set;
  set.source = std::move(source);
  std::size_t line_no = 0;
  std::istringstream in{std::string(text)};
  std::string raw;
  while (std::getline(in, raw)) {
    ++line_no;
    std::string_view line = trim(raw);
    if (line.empty() || line.front() == '#') continue;

    std::vector<std::string> fields;
    std::istringstream ls{std::string(line)};
    for (std::string f; ls >> f;) fields.push_back(std::move(f));

    FilterRule rule;
    if (fields.size() == 1) {
      rule.pattern = to_lower(fields[0]);
      rule.scope = RuleScope::kDomainAndSubdomains;
    } else if (fields.size() == 2 && is_ip_address(fields[0])) {
      rule.pattern = to_lower(fields[1]);
      rule.scope = RuleScope::kExactHost;
    } else {
      set.rejected.push_back({line_no, "unexpected fields: '" + std::string(line) + "'"});
      continue;
    }
    if (!rule.pattern.empty() && rule.pattern.back() == '.') rule.pattern.pop_back();
    if (!is_valid_hostname(rule.pattern) || is_ip_address(rule.pattern) ||
        rule.pattern.find('.') == std::string::npos) {
      set.rejected.push_back({line_no, "not a domain pattern: '" + rule.pattern + "'"});
      continue;
    }
    set.rules.push_back(std::move(rule));
  }
  return set;
}

FilterRuleSet parse_filter_list(const std::filesystem::path& path) {
  return parse_filter_list(read_file(path), path.filename().string());
}

FilterMatcher::FilterMatcher(const std::vector<FilterRuleSet>& sets) {
  for (const FilterRuleSet& s : sets) add(s);
}

void FilterMatcher::add(const FilterRuleSet& set) {
  for (const FilterRule& r : set.rules) {
    (r.scope == RuleScope::kExactHost ? exact_ : domains_).insert(r.pattern);
  }
}

bool FilterMatcher::matches(std::string_view hostname) const {
  const std::string host = to_lower(hostname);
  if (exact_.contains(host)) return true;
  std::string_view rest = host;
  while (true) {
    if (domains_.contains(std::string(rest))) return true;
    const std::size_t dot = rest.find('.');
    if (dot == std::string_view::npos) return false;
    rest.remove_prefix(dot + 1);
  }
}

bool rule_matches(const FilterRule& rule, std::string_view hostname) {
  if (rule.scope == RuleScope::kExactHost) return hostname == rule.pattern;
  return ends_with_label(hostname, rule.pattern);
}

PurposeOverrides load_overrides(const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw InputError(path.string() + ": overrides must be a JSON object");
  PurposeOverrides out;
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (!it->is_string()) throw InputError(path.string() + ": override values must be strings");
    out[to_lower(it.key())] = parse_purpose(it->get<std::string>());
  }
  return out;
}

Purpose classify_purpose(std::string_view hostname, const FilterMatcher& rules,
                         const PurposeOverrides& overrides) {
  const std::string host = to_lower(hostname);
  if (auto it = overrides.find(host); it != overrides.end()) return it->second;
  return rules.matches(host) ? Purpose::kAdvertisingTracking : Purpose::kFunctional;
}

std::map<std::string, std::vector<std::string>> load_skill_vendors(
    const std::filesystem::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
  if (!j.is_object()) throw InputError(path.string() + ": skill vendors must be a JSON object");
  std::map<std::string, std::vector<std::string>> out;
  for (auto it = j.begin(); it != j.end(); ++it) {
    auto& domains = out[it.key()];
    for (std::string d : string_array(j, it.key().c_str(), true)) {
      domains.push_back(to_lower(d));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// EndpointClassifier

EndpointClassifier::EndpointClassifier(const OrgOntology& ontology, const FilterMatcher& rules,
                                       const PurposeOverrides& overrides,
                                       std::map<std::string, std::vector<std::string>> skill_vendors,
                                       std::string platform_org, const PublicSuffixList& psl)
    : ontology_(&ontology),
      rules_(&rules),
      overrides_(&overrides),
      skill_vendors_(std::move(skill_vendors)),
      platform_org_(std::move(platform_org)),
      psl_(&psl) {}

EndpointVerdict EndpointClassifier::classify(std::string_view hostname,
                                             const std::optional<std::string>& skill_id) const {
  std::optional<SkillContext> ctx;
  if (skill_id) {
    ctx = SkillContext{*skill_id, {}};
    if (auto it = skill_vendors_.find(*skill_id); it != skill_vendors_.end()) {
      ctx->vendor_domains = it->second;
    }
  }
  EndpointVerdict v = map_org(hostname, *ontology_, ctx, platform_org_, *psl_);
  v.purpose = classify_purpose(v.hostname, *rules_, *overrides_);
  return v;
}

std::string EndpointClassifier::org_identity(std::string_view hostname) const {
  const std::string rd = psl_->registered_domain(hostname).domain;
  const OrgEntry* org = ontology_->find_by_domain(rd);
  return org ? org->org_name : rd;
}

FlowVerdicts classify_flows(const std::vector<SkillSession>& sessions,
                            const ResolutionReport& resolution,
                            const EndpointClassifier& classifier) {
  FlowVerdicts out;
  out.index.resize(sessions.size());
  std::unordered_map<std::string, std::size_t> cache;
  for (std::size_t si = 0; si < sessions.size(); ++si) {
    const SkillSession& s = sessions[si];
    out.index[si].resize(s.flows.size());
    for (std::size_t fi = 0; fi < s.flows.size(); ++fi) {
      const auto& host = resolution.host({si, fi});
      if (!host) continue;
      std::string key = host->hostname;
      key += '\0';
      if (s.skill_id) key += *s.skill_id;
      auto [it, inserted] = cache.try_emplace(std::move(key), out.verdicts.size());
      if (inserted) out.verdicts.push_back(classifier.classify(host->hostname, s.skill_id));
      out.index[si][fi] = it->second;
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Distribution tables

const char* to_string(DistributionWeight w) {
  return w == DistributionWeight::kFlows ? "flows" : "bytes";
}

DistributionWeight parse_distribution_weight(std::string_view s) {
  if (s == "flows") return DistributionWeight::kFlows;
  if (s == "bytes") return DistributionWeight::kBytes;
  throw InputError("distribution.weight must be 'flows' or 'bytes', got '" + std::string(s) + "'");
}

double PartyPurposeMatrix::percent(Party party, Purpose purpose) const {
  if (total <= 0) return 0;
  return 100.0 * weight[static_cast<int>(party)][static_cast<int>(purpose)] / total;
}

double PartyPurposeMatrix::party_percent(Party party) const {
  if (total <= 0) return 0;
  const auto& row = weight[static_cast<int>(party)];
  return 100.0 * (row[0] + row[1]) / total;
}

double PartyPurposeMatrix::purpose_percent(Purpose purpose) const {
  if (total <= 0) return 0;
  double sum = 0;
  for (const auto& row : weight) sum += row[static_cast<int>(purpose)];
  return 100.0 * sum / total;
}

std::string aggregate_label(const std::set<std::string>& hostnames,
                            const std::string& registered_domain) {
  if (hostnames.size() == 1) return *hostnames.begin();
  return "*(" + std::to_string(hostnames.size()) + ")." + registered_domain;
}

namespace {

std::vector<std::string> aggregate_hostnames(const std::set<std::string>& hostnames) {
  std::map<std::string, std::set<std::string>> by_domain;
  for (const std::string& h : hostnames) by_domain[registered_domain(h).domain].insert(h);
  std::vector<std::string> out;
  for (const auto& [domain, hosts] : by_domain) out.push_back(aggregate_label(hosts, domain));
  return out;
}

}  // namespace

TrafficDistribution traffic_distribution(const std::vector<SkillSession>& sessions,
                                         const FlowVerdicts& verdicts,
                                         DistributionWeight weight) {
  TrafficDistribution out;
  // persona -> purpose -> third-party hostnames
  std::map<std::string, std::array<std::set<std::string>, 2>> persona_hosts;
  std::map<std::string, std::set<std::string>> skill_ats;
  struct DomainAcc {
    std::set<std::string> hostnames;
    std::set<std::string> skills;
    std::size_t flows = 0;
  };
  std::map<std::tuple<Party, std::string, std::string, Purpose>, DomainAcc> domains;

  for (std::size_t si = 0; si < sessions.size(); ++si) {
    const SkillSession& s = sessions[si];
    for (std::size_t fi = 0; fi < s.flows.size(); ++fi) {
      const FlowRecord& f = s.flows[fi];
      if (f.protocol == Protocol::kDns || f.phase == Phase::kCrawl) continue;
      const double w = weight == DistributionWeight::kFlows ? 1.0 : static_cast<double>(f.byte_count);
      const EndpointVerdict* v = verdicts.at({si, fi});
      if (!v) {
        ++out.matrix.unresolved_flows;
        out.matrix.unresolved_weight += w;
        continue;
      }
      out.matrix.weight[static_cast<int>(v->party)][static_cast<int>(v->purpose)] += w;
      out.matrix.total += w;

      if (v->party == Party::kThirdParty) {
        persona_hosts[s.persona.name][static_cast<int>(v->purpose)].insert(v->hostname);
        if (v->purpose == Purpose::kAdvertisingTracking && s.skill_id) {
          skill_ats[*s.skill_id].insert(v->hostname);
        }
      }
      DomainAcc& acc = domains[{v->party, v->org_name, v->registered_domain, v->purpose}];
      acc.hostnames.insert(v->hostname);
      if (s.skill_id) acc.skills.insert(*s.skill_id);
      ++acc.flows;
    }
  }

  for (const auto& [persona, hosts] : persona_hosts) {
    out.personas.push_back({persona, hosts[1].size(), hosts[0].size()});
  }
  std::stable_sort(out.personas.begin(), out.personas.end(),
                   [](const PersonaThirdPartyCounts& a, const PersonaThirdPartyCounts& b) {
                     return std::tie(b.advertising_tracking, b.functional) <
                            std::tie(a.advertising_tracking, a.functional);
                   });

  for (const auto& [skill, hosts] : skill_ats) {
    out.skills.push_back({skill, {hosts.begin(), hosts.end()}, aggregate_hostnames(hosts)});
  }
  std::stable_sort(out.skills.begin(), out.skills.end(),
                   [](const SkillAtsDomains& a, const SkillAtsDomains& b) {
                     return a.hostnames.size() > b.hostnames.size();
                   });

  for (const auto& [key, acc] : domains) {
    const auto& [party, org, rd, purpose] = key;
    out.domains.push_back({party, org, aggregate_label(acc.hostnames, rd), rd, purpose,
                           acc.hostnames.size(), acc.skills.size(), acc.flows});
  }
  std::stable_sort(out.domains.begin(), out.domains.end(),
                   [](const ContactedDomainRow& a, const ContactedDomainRow& b) {
                     if (a.party != b.party) return a.party < b.party;
                     if (a.skills != b.skills) return a.skills > b.skills;
                     return a.label < b.label;
                   });
  return out;
}

}  // namespace echoaudit
