#include "echoaudit/pipeline.h"

#include <openssl/evp.h>

#include <algorithm>
#include <fstream>
#include <map>

#include "echoaudit/error.h"
#include "echoaudit/interests.h"
#include "echoaudit/jsonl.h"
#include "echoaudit/metrics.h"
#include "echoaudit/policy.h"
#include "echoaudit/strings.h"
#include "echoaudit/sync.h"
#include "echoaudit/trace.h"

namespace echoaudit {

namespace fs = std::filesystem;
using nlohmann::json;

// ---------------------------------------------------------------------------
// Stages

namespace {

constexpr std::array<std::pair<Stage, const char*>, 7> kStages{{
    {Stage::kIngest, "ingest"},
    {Stage::kResolve, "resolve"},
    {Stage::kClassify, "classify"},
    {Stage::kSyncs, "syncs"},
    {Stage::kBids, "bids"},
    {Stage::kPolicy, "policy"},
    {Stage::kInterests, "interests"},
}};

}  // namespace

const char* to_string(Stage s) {
  for (const auto& [st, name] : kStages) {
    if (st == s) return name;
  }
  return "?";
}

Stage parse_stage(std::string_view s) {
  for (const auto& [st, name] : kStages) {
    if (s == name) return st;
  }
  throw InputError("unknown stage '" + std::string(s) + "'");
}

std::set<Stage> all_stages() {
  std::set<Stage> out;
  for (const auto& [st, name] : kStages) out.insert(st);
  return out;
}

std::set<Stage> parse_stage_list(std::string_view csv) {
  std::set<Stage> out;
  for (const std::string& part : split(csv, ',')) {
    const std::string_view name = trim(part);
    if (!name.empty()) out.insert(parse_stage(name));
  }
  if (out.empty()) throw InputError("--stages needs at least one stage");
  return out;
}

// ---------------------------------------------------------------------------
// Config

namespace {

void reject_unknown(const json& j, std::initializer_list<std::string_view> allowed,
                    const std::string& where) {
  if (!j.is_object()) throw InputError("config: '" + where + "' must be an object");
  for (auto it = j.begin(); it != j.end(); ++it) {
    if (std::find(allowed.begin(), allowed.end(), it.key()) == allowed.end()) {
      throw InputError("config: unknown key '" + where + "." + it.key() + "'");
    }
  }
}

const json* section(const json& j, const char* key) {
  auto it = j.find(key);
  return it == j.end() || it->is_null() ? nullptr : &*it;
}

std::size_t get_size(const json& j, const char* key, std::size_t fallback, const std::string& where) {
  const json* v = section(j, key);
  if (!v) return fallback;
  if (!v->is_number_unsigned()) {
    throw InputError("config: '" + where + "." + key + "' must be a non-negative integer");
  }
  return v->get<std::size_t>();
}

bool get_bool(const json& j, const char* key, bool fallback, const std::string& where) {
  const json* v = section(j, key);
  if (!v) return fallback;
  if (!v->is_boolean()) throw InputError("config: '" + where + "." + key + "' must be a boolean");
  return v->get<bool>();
}

std::string get_string(const json& j, const char* key, std::string fallback, const std::string& where) {
  const json* v = section(j, key);
  if (!v) return fallback;
  if (!v->is_string()) throw InputError("config: '" + where + "." + key + "' must be a string");
  return v->get<std::string>();
}

std::vector<std::string> get_strings(const json& j, const char* key, const std::string& where) {
  std::vector<std::string> out;
  const json* v = section(j, key);
  if (!v) return out;
  if (!v->is_array()) throw InputError("config: '" + where + "." + key + "' must be an array");
  for (const json& s : *v) {
    if (!s.is_string()) throw InputError("config: '" + where + "." + key + "' must hold strings");
    out.push_back(s.get<std::string>());
  }
  return out;
}

fs::path resolve_path(const fs::path& base, const std::string& p) {
  fs::path path(p);
  return path.is_absolute() ? path : (base / path).lexically_normal();
}

std::optional<fs::path> opt_path(const json& paths, const char* key, const fs::path& base) {
  const json* v = section(paths, key);
  if (!v) return std::nullopt;
  if (!v->is_string()) throw InputError(std::string("config: 'paths.") + key + "' must be a string");
  return resolve_path(base, v->get<std::string>());
}

std::vector<fs::path> path_list(const json& paths, const char* key, const fs::path& base) {
  std::vector<fs::path> out;
  const json* v = section(paths, key);
  if (!v) return out;
  if (v->is_string()) {
    out.push_back(resolve_path(base, v->get<std::string>()));
  } else if (v->is_array()) {
    for (const json& s : *v) {
      if (!s.is_string()) throw InputError(std::string("config: 'paths.") + key + "' must hold strings");
      out.push_back(resolve_path(base, s.get<std::string>()));
    }
  } else {
    throw InputError(std::string("config: 'paths.") + key + "' must be a string or an array");
  }
  return out;
}

}  // namespace

AuditConfig AuditConfig::from_json(const json& j, const fs::path& base_dir) {
  reject_unknown(j, {"paths", "platform_org", "distribution", "slots", "ingest", "sync", "stats",
                     "bids", "policy"},
                 "<root>");
  AuditConfig c;
  c.base_dir = base_dir;
  if (const json* p = section(j, "paths")) {
    reject_unknown(*p, {"traces", "bids", "policies", "platform_policy", "org_ontology",
                        "data_ontology", "lexicon", "signatures", "filter_lists", "overrides",
                        "skill_vendors", "gold_labels", "interests", "public_suffix_list"},
                   "paths");
    c.paths.traces = path_list(*p, "traces", base_dir);
    c.paths.bids = opt_path(*p, "bids", base_dir);
    c.paths.policies = opt_path(*p, "policies", base_dir);
    c.paths.platform_policy = opt_path(*p, "platform_policy", base_dir);
    c.paths.org_ontology = opt_path(*p, "org_ontology", base_dir);
    c.paths.data_ontology = opt_path(*p, "data_ontology", base_dir);
    c.paths.lexicon = opt_path(*p, "lexicon", base_dir);
    c.paths.signatures = opt_path(*p, "signatures", base_dir);
    c.paths.filter_lists = path_list(*p, "filter_lists", base_dir);
    c.paths.overrides = opt_path(*p, "overrides", base_dir);
    c.paths.skill_vendors = opt_path(*p, "skill_vendors", base_dir);
    c.paths.gold_labels = opt_path(*p, "gold_labels", base_dir);
    c.paths.interests = opt_path(*p, "interests", base_dir);
    c.paths.public_suffix_list = opt_path(*p, "public_suffix_list", base_dir);
  }
  c.platform_org = get_string(j, "platform_org", c.platform_org, "<root>");
  if (const json* s = section(j, "distribution")) {
    reject_unknown(*s, {"weight"}, "distribution");
    c.distribution_weight = parse_distribution_weight(get_string(*s, "weight", "flows", "distribution"));
  }
  if (const json* s = section(j, "slots")) {
    reject_unknown(*s, {"key"}, "slots");
    c.slot_key = parse_slot_key(get_string(*s, "key", "site+slot", "slots"));
  }
  if (const json* s = section(j, "ingest")) {
    reject_unknown(*s, {"body_excerpt_max"}, "ingest");
    c.body_excerpt_max = get_size(*s, "body_excerpt_max", c.body_excerpt_max, "ingest");
  }
  if (const json* s = section(j, "sync")) {
    reject_unknown(*s, {"min_id_length"}, "sync");
    c.min_id_length = get_size(*s, "min_id_length", c.min_id_length, "sync");
  }
  if (const json* s = section(j, "stats")) {
    reject_unknown(*s, {"exact_cutoff", "bonferroni", "alpha"}, "stats");
    c.exact_cutoff = get_size(*s, "exact_cutoff", c.exact_cutoff, "stats");
    c.bonferroni = get_bool(*s, "bonferroni", c.bonferroni, "stats");
    if (const json* a = section(*s, "alpha")) {
      if (!a->is_number()) throw InputError("config: 'stats.alpha' must be a number");
      c.alpha = a->get<double>();
    }
  }
  if (const json* s = section(j, "bids")) {
    reject_unknown(*s, {"control", "treatments", "web_group"}, "bids");
    c.control = get_string(*s, "control", "", "bids");
    c.treatments = get_strings(*s, "treatments", "bids");
    c.web_group = get_strings(*s, "web_group", "bids");
  }
  if (const json* s = section(j, "policy")) {
    reject_unknown(*s, {"include_platform_policy", "unencrypted"}, "policy");
    c.include_platform_policy = get_bool(*s, "include_platform_policy", false, "policy");
    c.unencrypted = get_bool(*s, "unencrypted", true, "policy");
  }
  return c;
}

AuditConfig AuditConfig::load(const fs::path& path) {
  json j;
  try {
    j = json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
  fs::path base = path.parent_path();
  if (base.empty()) base = ".";
  return from_json(j, base);
}

json AuditConfig::knobs_json() const {
  return json{{"platform_org", platform_org},
              {"distribution_weight", to_string(distribution_weight)},
              {"slots_key", to_string(slot_key)},
              {"body_excerpt_max", body_excerpt_max},
              {"min_id_length", min_id_length},
              {"exact_cutoff", exact_cutoff},
              {"bonferroni", bonferroni},
              {"alpha", alpha},
              {"include_platform_policy", include_platform_policy},
              {"unencrypted", unencrypted}};
}

namespace {

std::vector<std::pair<std::string, fs::path>> configured_paths(const AuditPaths& p) {
  std::vector<std::pair<std::string, fs::path>> out;
  for (const auto& t : p.traces) out.emplace_back("paths.traces", t);
  for (const auto& f : p.filter_lists) out.emplace_back("paths.filter_lists", f);
  auto add = [&](const char* name, const std::optional<fs::path>& v) {
    if (v) out.emplace_back(name, *v);
  };
  add("paths.bids", p.bids);
  add("paths.policies", p.policies);
  add("paths.platform_policy", p.platform_policy);
  add("paths.org_ontology", p.org_ontology);
  add("paths.data_ontology", p.data_ontology);
  add("paths.lexicon", p.lexicon);
  add("paths.signatures", p.signatures);
  add("paths.overrides", p.overrides);
  add("paths.skill_vendors", p.skill_vendors);
  add("paths.gold_labels", p.gold_labels);
  add("paths.interests", p.interests);
  add("paths.public_suffix_list", p.public_suffix_list);
  return out;
}

}  // namespace

void AuditConfig::validate() const {
  if (platform_org.empty()) throw InputError("config: platform_org must not be empty");
  if (body_excerpt_max > kMaxBodyExcerpt) {
    throw InputError("config: ingest.body_excerpt_max must be <= " + std::to_string(kMaxBodyExcerpt));
  }
  if (min_id_length < kMinIdLengthFloor || min_id_length > kMinIdLengthCeiling) {
    throw InputError("config: sync.min_id_length must be in [" + std::to_string(kMinIdLengthFloor) +
                     ", " + std::to_string(kMinIdLengthCeiling) + "]");
  }
  if (exact_cutoff > kMaxExactCutoff) {
    throw InputError("config: stats.exact_cutoff must be <= " + std::to_string(kMaxExactCutoff));
  }
  if (!(alpha > 0 && alpha < 1)) throw InputError("config: stats.alpha must be in (0, 1)");
  std::error_code ec;
  for (const auto& [name, path] : configured_paths(paths)) {
    if (!fs::exists(path, ec)) {
      throw InputError("config: " + name + " '" + path.string() + "' does not exist");
    }
  }
  if (paths.policies && !fs::is_directory(*paths.policies, ec)) {
    throw InputError("config: paths.policies must be a directory");
  }
}

// ---------------------------------------------------------------------------
// Fingerprint

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read '" + path.string() + "'");
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx(EVP_MD_CTX_new(), EVP_MD_CTX_free);
  if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) {
    throw AuditError(ExitCode::kInternalError, "SHA-256 initialisation failed");
  }
  std::array<char, 1 << 16> buf;
  while (in) {
    in.read(buf.data(), buf.size());
    if (in.gcount() > 0) EVP_DigestUpdate(ctx.get(), buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  std::array<unsigned char, EVP_MAX_MD_SIZE> md;
  unsigned int len = 0;
  EVP_DigestFinal_ex(ctx.get(), md.data(), &len);
  static const char* hex = "0123456789abcdef";
  std::string out;
  for (unsigned int i = 0; i < len; ++i) {
    out += hex[md[i] >> 4];
    out += hex[md[i] & 0xF];
  }
  return out;
}

json dataset_fingerprint(const AuditConfig& config) {
  json out = json::object();
  auto key_of = [&](const fs::path& p) {
    return p.lexically_relative(config.base_dir).generic_string();
  };
  for (const auto& [name, path] : configured_paths(config.paths)) {
    std::error_code ec;
    if (fs::is_directory(path, ec)) {
      std::vector<fs::path> files;
      for (const auto& e : fs::recursive_directory_iterator(path)) {
        if (e.is_regular_file()) files.push_back(e.path());
      }
      std::sort(files.begin(), files.end());
      for (const fs::path& f : files) out[key_of(f)] = sha256_file(f);
    } else {
      out[key_of(path)] = sha256_file(path);
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Pipeline

namespace {

json opt_number(const std::optional<double>& v) { return v ? json(*v) : json(nullptr); }

json summary_json(const BidSummary& s) {
  return json{{"n", s.n}, {"median_cpm", opt_number(s.median_cpm)}, {"mean_cpm", opt_number(s.mean_cpm)}};
}

json stat_json(const StatResult& s) {
  return json{{"u_statistic", s.u_statistic},
              {"p_value", s.p_value},
              {"p_two_sided", s.p_two_sided},
              {"effect_size_r", s.effect_size_r},
              {"n_treatment", s.n_treatment},
              {"n_control", s.n_control},
              {"method", to_string(s.method)},
              {"size_label", to_string(s.size_label)}};
}

json disclosure_counts(const std::array<std::size_t, 4>& c) {
  return json{{"clear", c[0]}, {"vague", c[1]}, {"omitted", c[2]}, {"no_policy", c[3]}};
}

json weight_value(double w, DistributionWeight weight) {
  if (weight == DistributionWeight::kFlows) return json(static_cast<std::int64_t>(std::llround(w)));
  return json(w);
}

constexpr std::size_t kListedWarnings = 100;

class Pipeline {
 public:
  Pipeline(const AuditConfig& config, std::set<Stage> requested)
      : cfg_(config), requested_(std::move(requested)) {}

  json run() {
    std::set<Stage> needed = requested_;
    if (needed.contains(Stage::kBids) && !cfg_.paths.traces.empty()) needed.insert(Stage::kSyncs);
    if (needed.contains(Stage::kSyncs) || needed.contains(Stage::kPolicy)) needed.insert(Stage::kClassify);
    if (needed.contains(Stage::kClassify)) needed.insert(Stage::kResolve);
    if (needed.contains(Stage::kResolve)) needed.insert(Stage::kIngest);

    json stage_names = json::array();
    for (Stage s : requested_) stage_names.push_back(to_string(s));
    report_["stages"] = stage_names;
    report_["config"] = cfg_.knobs_json();
    guarded(Stage::kIngest, [&] { report_["fingerprint"] = dataset_fingerprint(cfg_); });

    for (Stage s : needed) {  // std::set iterates in pipeline order
      guarded(s, [&] { run_stage(s); });
    }
    report_["warnings"] = warnings_;
    return report_;
  }

 private:
  template <typename F>
  void guarded(Stage s, F&& body) {
    try {
      body();
    } catch (const StageError&) {
      throw;
    } catch (const AuditError& e) {
      throw StageError(to_string(s), e.code(), e.what());
    } catch (const std::exception& e) {
      throw StageError(to_string(s), ExitCode::kInternalError, e.what());
    }
  }

  void emit_section(Stage s, const char* key, json value) {
    if (requested_.contains(s)) report_[key] = std::move(value);
  }

  void warn(const std::string& stage, const std::string& msg) {
    if (warnings_.size() < kListedWarnings) warnings_.push_back(stage + ": " + msg);
  }

  template <typename T>
  const T& require_path(const std::optional<T>& p, const char* name) {
    if (!p) throw InputError(std::string("missing input 'paths.") + name + "'");
    return *p;
  }

  void run_stage(Stage s) {
    switch (s) {
      case Stage::kIngest: return ingest();
      case Stage::kResolve: return resolve();
      case Stage::kClassify: return classify();
      case Stage::kSyncs: return syncs();
      case Stage::kBids: return bids();
      case Stage::kPolicy: return policy();
      case Stage::kInterests: return interests();
    }
  }

  const PublicSuffixList& psl() {
    if (!cfg_.paths.public_suffix_list) return PublicSuffixList::builtin();
    if (!custom_psl_) custom_psl_ = PublicSuffixList::load(*cfg_.paths.public_suffix_list);
    return *custom_psl_;
  }

  void ingest() {
    if (cfg_.paths.traces.empty()) throw InputError("missing input 'paths.traces'");
    IngestOptions opts;
    opts.body_excerpt_max = cfg_.body_excerpt_max;
    std::vector<FlowRecord> flows;
    json files = json::array();
    std::size_t warning_count = 0;
    for (const fs::path& p : cfg_.paths.traces) {
      IngestResult r = ingest_trace(p, opts);
      const std::string rel = p.lexically_relative(cfg_.base_dir).generic_string();
      files.push_back({{"path", rel},
                       {"records", r.flows.size()},
                       {"malformed_lines", r.malformed_lines},
                       {"total_lines", r.total_lines}});
      for (const LineWarning& w : r.warnings) {
        ++warning_count;
        warn("ingest", rel + ":" + std::to_string(w.line) + ": " + w.message);
      }
      flows.insert(flows.end(), std::make_move_iterator(r.flows.begin()),
                   std::make_move_iterator(r.flows.end()));
    }
    std::map<std::string, PersonaKind> kinds;
    for (const FlowRecord& f : flows) {
      auto [it, fresh] = kinds.emplace(f.persona.name, f.persona.kind);
      if (!fresh && it->second != f.persona.kind) {
        throw InvariantViolation("persona '" + f.persona.name + "' used with two kinds across trace files");
      }
    }
    std::stable_sort(flows.begin(), flows.end(), [](const FlowRecord& a, const FlowRecord& b) {
      if (a.session_id != b.session_id) return a.session_id < b.session_id;
      return a.timestamp_ms < b.timestamp_ms;
    });
    sessions_ = segment_sessions(flows);

    std::map<std::string, std::pair<std::size_t, std::size_t>> per_persona;
    std::set<std::string> skills;
    for (const SkillSession& s : sessions_) {
      auto& [n_sessions, n_flows] = per_persona[s.persona.name];
      ++n_sessions;
      n_flows += s.flows.size();
      if (s.skill_id) skills.insert(*s.skill_id);
    }
    json personas = json::array();
    for (const auto& [name, counts] : per_persona) {
      personas.push_back({{"name", name},
                          {"kind", to_string(kinds.at(name))},
                          {"sessions", counts.first},
                          {"flows", counts.second}});
    }
    emit_section(Stage::kIngest, "ingest",
                 {{"files", files},
                  {"records", flows.size()},
                  {"sessions", sessions_.size()},
                  {"skills", skills.size()},
                  {"personas", personas},
                  {"warning_count", warning_count}});
  }

  void resolve() {
    resolution_ = resolve_domains(sessions_);
    std::size_t by_source[3] = {0, 0, 0};
    std::size_t dns_flows = 0;
    for (std::size_t si = 0; si < sessions_.size(); ++si) {
      for (std::size_t fi = 0; fi < sessions_[si].flows.size(); ++fi) {
        if (sessions_[si].flows[fi].protocol == Protocol::kDns) ++dns_flows;
        if (const auto& h = resolution_.host({si, fi})) ++by_source[static_cast<int>(h->source)];
      }
    }
    for (const std::string& w : resolution_.warnings) warn("resolve", w);
    json unresolved = json::array();
    for (std::size_t i = 0; i < resolution_.unresolved.size() && i < kListedWarnings; ++i) {
      const UnresolvedFlow& u = resolution_.unresolved[i];
      unresolved.push_back({{"session_id", u.session_id}, {"dst_ip", u.dst_ip}, {"timestamp_ms", u.timestamp_ms}});
    }
    std::set<std::string> hostnames;
    for (const auto& [key, host] : resolution_.endpoints) hostnames.insert(host);
    emit_section(Stage::kResolve, "resolution",
                 {{"resolved_flows", resolution_.resolved_flows},
                  {"unresolved_flows", resolution_.unresolved.size()},
                  {"dns_flows", dns_flows},
                  {"endpoints", resolution_.endpoints.size()},
                  {"hostnames", hostnames.size()},
                  {"by_source", {{"sni", by_source[0]}, {"dns", by_source[1]}, {"http_host", by_source[2]}}},
                  {"unresolved", unresolved},
                  {"conflict_warnings", resolution_.warnings.size()}});
  }

  void classify() {
    ontology_ = OrgOntology::load(require_path(cfg_.paths.org_ontology, "org_ontology"));
    if (cfg_.paths.filter_lists.empty()) warn("classify", "no filter lists configured; every endpoint is functional");
    json lists = json::array();
    for (const fs::path& p : cfg_.paths.filter_lists) {
      FilterRuleSet set = parse_filter_list(p);
      for (const LineWarning& w : set.rejected) {
        warn("classify", set.source + ":" + std::to_string(w.line) + ": " + w.message);
      }
      lists.push_back({{"source", set.source}, {"rules", set.rules.size()}, {"rejected", set.rejected.size()}});
      matcher_.add(set);
    }
    if (cfg_.paths.overrides) overrides_ = load_overrides(*cfg_.paths.overrides);
    std::map<std::string, std::vector<std::string>> vendors;
    if (cfg_.paths.skill_vendors) vendors = load_skill_vendors(*cfg_.paths.skill_vendors);
    if (!ontology_->find_by_name(cfg_.platform_org)) {
      warn("classify", "platform org '" + cfg_.platform_org + "' is not in the ontology");
    }
    classifier_.emplace(*ontology_, matcher_, overrides_, std::move(vendors), cfg_.platform_org, psl());
    verdicts_ = classify_flows(sessions_, resolution_, *classifier_);
    std::set<std::string> guessed;
    for (const EndpointVerdict& v : verdicts_.verdicts) {
      if (psl().registered_domain(v.hostname).flag == DomainFlag::kUnknownSuffix) guessed.insert(v.registered_domain);
    }
    for (const std::string& d : guessed) {
      warn("classify", "no public suffix rule for '" + d + "'; used its last two labels");
    }

    const TrafficDistribution dist = traffic_distribution(sessions_, verdicts_, cfg_.distribution_weight);
    const PartyPurposeMatrix& m = dist.matrix;
    const auto w = cfg_.distribution_weight;
    json rows = json::array();
    for (Party p : {Party::kPlatform, Party::kSkillVendor, Party::kThirdParty}) {
      const auto& cell = m.weight[static_cast<int>(p)];
      rows.push_back({{"party", to_string(p)},
                      {"functional", weight_value(cell[0], w)},
                      {"advertising_tracking", weight_value(cell[1], w)},
                      {"functional_pct", m.percent(p, Purpose::kFunctional)},
                      {"advertising_tracking_pct", m.percent(p, Purpose::kAdvertisingTracking)},
                      {"total_pct", m.party_percent(p)}});
    }
    json personas = json::array();
    for (const auto& p : dist.personas) {
      personas.push_back({{"persona", p.persona},
                          {"advertising_tracking", p.advertising_tracking},
                          {"functional", p.functional}});
    }
    json skills = json::array();
    for (const auto& s : dist.skills) {
      skills.push_back({{"skill_id", s.skill_id},
                        {"count", s.hostnames.size()},
                        {"hostnames", s.hostnames},
                        {"aggregated", s.aggregated}});
    }
    json domains = json::array();
    for (const auto& d : dist.domains) {
      domains.push_back({{"party", to_string(d.party)},
                         {"org_name", d.org_name},
                         {"label", d.label},
                         {"registered_domain", d.registered_domain},
                         {"purpose", to_string(d.purpose)},
                         {"hostnames", d.hostnames},
                         {"skills", d.skills},
                         {"flows", d.flows}});
    }
    emit_section(Stage::kClassify, "traffic",
                 {{"weight", to_string(w)},
                  {"attributed_total", weight_value(m.total, w)},
                  {"unresolved_flows", m.unresolved_flows},
                  {"unresolved_weight", weight_value(m.unresolved_weight, w)},
                  {"matrix", rows},
                  {"total", {{"functional_pct", m.purpose_percent(Purpose::kFunctional)},
                             {"advertising_tracking_pct", m.purpose_percent(Purpose::kAdvertisingTracking)}}},
                  {"personas", personas},
                  {"skills", skills},
                  {"domains", domains},
                  {"filter_lists", lists},
                  {"distinct_verdicts", verdicts_.verdicts.size()}});
  }

  void syncs() {
    const std::vector<HttpObservation> obs = collect_http_observations(sessions_, *classifier_);
    SyncOptions opts;
    opts.min_id_length = cfg_.min_id_length;
    const std::vector<IdentifierToken> tokens = extract_identifiers(obs, opts);
    const std::vector<SyncEvent> events = detect_syncs(tokens, obs);
    const PartnerGraph graph = build_partner_graph(events, cfg_.platform_org);
    partners_ = partner_sets(events, cfg_.platform_org);
    if (!graph.nodes.contains(cfg_.platform_org)) {
      warn("syncs", "focus org '" + cfg_.platform_org + "' takes part in no sync event; partner sets are empty");
    }

    json ev = json::array();
    for (const SyncEvent& e : events) {
      ev.push_back({{"token", e.token.value},
                    {"source", to_string(e.token.source)},
                    {"first_seen_ms", e.token.first_seen_ms},
                    {"sender_org", e.sender_org},
                    {"receiver_org", e.receiver_org},
                    {"evidence_url", e.evidence_url},
                    {"timestamp_ms", e.timestamp_ms}});
    }
    json edges = json::array();
    std::size_t outbound = 0;
    for (const PartnerEdge& e : graph.edges) {
      edges.push_back({{"sender", e.sender}, {"receiver", e.receiver}, {"count", e.count}});
      if (e.sender == cfg_.platform_org) ++outbound;
    }
    emit_section(Stage::kSyncs, "syncs",
                 {{"focus_org", cfg_.platform_org},
                  {"http_requests", obs.size()},
                  {"tokens", tokens.size()},
                  {"events", ev},
                  {"edges", edges},
                  {"nodes", graph.nodes.size()},
                  {"direct_partners", partners_->direct_partners},
                  {"second_hop", partners_->second_hop},
                  {"direct_partner_count", partners_->direct_partners.size()},
                  {"second_hop_count", partners_->second_hop.size()},
                  {"focus_outbound_edges", outbound}});
  }

  void bids() {
    const BidIngestResult r = ingest_bids(require_path(cfg_.paths.bids, "bids"));
    for (const LineWarning& w : r.warnings) warn("bids", "line " + std::to_string(w.line) + ": " + w.message);

    std::map<std::string, PersonaKind> kinds;
    for (const BidRecord& b : r.bids) kinds.emplace(b.persona.name, b.persona.kind);
    auto of_kind = [&](PersonaKind k) {
      std::vector<std::string> out;
      for (const auto& [name, kind] : kinds) {
        if (kind == k) out.push_back(name);
      }
      return out;
    };
    std::string control = cfg_.control;
    if (control.empty()) {
      const auto vanilla = of_kind(PersonaKind::kVanilla);
      if (vanilla.size() != 1) {
        throw InputError("bids.control not set and the bid export has " +
                         std::to_string(vanilla.size()) + " vanilla personas");
      }
      control = vanilla.front();
    }
    std::vector<std::string> treatments = cfg_.treatments.empty() ? of_kind(PersonaKind::kInterest) : cfg_.treatments;
    std::vector<std::string> web = cfg_.web_group.empty() ? of_kind(PersonaKind::kWebControl) : cfg_.web_group;
    for (const auto& name : treatments) {
      if (!kinds.contains(name)) throw InputError("treatment persona '" + name + "' has no bids");
    }
    if (!kinds.contains(control)) throw InputError("control persona '" + control + "' has no bids");

    ComparisonOptions opts;
    opts.mann_whitney.exact_cutoff = cfg_.exact_cutoff;
    opts.alpha = cfg_.alpha;
    opts.bonferroni = cfg_.bonferroni;

    std::set<std::string> group(treatments.begin(), treatments.end());
    group.insert(control);
    const CommonSlots cs = common_slots(r.bids, group, cfg_.slot_key);
    for (const std::string& w : cs.warnings) warn("bids", w);

    json aggregates = json::array();
    for (const PersonaAggregate& a : aggregate(cs.bids)) {
      json row = summary_json(a.summary);
      row["persona"] = a.persona.name;
      row["kind"] = to_string(a.persona.kind);
      aggregates.push_back(row);
    }
    json comparison = json::array();
    std::size_t significant = 0;
    if (!cs.bids.empty()) {
      for (const ComparisonRow& row : persona_comparison(cs.bids, treatments, control, opts)) {
        json j = stat_json(row.stat);
        j["treatment"] = row.treatment;
        j["control"] = row.control;
        j["alpha"] = row.alpha;
        j["significant"] = row.significant;
        if (row.significant) ++significant;
        comparison.push_back(j);
      }
    }

    json section{{"records", r.bids.size()},
                 {"malformed_lines", r.malformed_lines},
                 {"control", control},
                 {"treatments", treatments},
                 {"slot_key", to_string(cfg_.slot_key)},
                 {"common_slots", {{"slots_total", cs.slots_total},
                                   {"slots_kept", cs.slots_kept},
                                   {"bids_kept", cs.bids.size()}}},
                 {"aggregates", aggregates},
                 {"comparison", comparison},
                 {"significant_count", significant},
                 {"bonferroni", cfg_.bonferroni}};

    if (partners_) {
      const LabeledBids labeled = label_bidders(cs.bids, partners_->direct_partners, *ontology_);
      for (const std::string& w : labeled.warnings) warn("bids", w);
      json rows = json::array();
      for (const PartnerSplitRow& row : partner_split(labeled.bids)) {
        rows.push_back({{"persona", row.persona},
                        {"partner", summary_json(row.partner)},
                        {"non_partner", summary_json(row.non_partner)},
                        {"median_ratio", opt_number(row.median_ratio)}});
      }
      std::size_t partner_bids = 0;
      for (const LabeledBid& lb : labeled.bids) partner_bids += lb.label == BidderLabel::kPartner;
      section["partner_split"] = {{"partner_bids", partner_bids},
                                  {"non_partner_bids", labeled.bids.size() - partner_bids},
                                  {"rows", rows}};
    } else {
      section["partner_split"] = nullptr;
    }

    if (!web.empty() && !treatments.empty()) {
      for (const auto& name : web) {
        if (!kinds.contains(name)) throw InputError("web persona '" + name + "' has no bids");
      }
      std::set<std::string> both(treatments.begin(), treatments.end());
      both.insert(web.begin(), web.end());
      const CommonSlots cs2 = common_slots(r.bids, both, cfg_.slot_key);
      for (const std::string& w : cs2.warnings) warn("bids", "cross-group: " + w);
      json cells = json::array();
      std::size_t sig = 0;
      if (!cs2.bids.empty()) {
        for (const CrossGroupCell& c : cross_group_comparison(cs2.bids, treatments, web, opts)) {
          json j = stat_json(c.stat);
          j["a"] = c.a;
          j["b"] = c.b;
          j["significant_two_sided"] = c.significant_two_sided;
          j["significant_one_sided"] = c.significant_one_sided;
          sig += c.significant_two_sided;
          cells.push_back(j);
        }
      }
      section["cross_group"] = {
          {"group_a", treatments},
          {"group_b", web},
          {"null_hypothesis", "equal distributions; significance uses the two-sided p-value, "
                              "the one-sided (a > b) p-value is reported alongside"},
          {"common_slots", {{"slots_total", cs2.slots_total}, {"slots_kept", cs2.slots_kept}}},
          {"cells", cells},
          {"significant_two_sided_count", sig}};
    } else {
      section["cross_group"] = nullptr;
    }
    emit_section(Stage::kBids, "bids", section);
  }

  void policy() {
    const PolicyLexicon lexicon = PolicyLexicon::load(require_path(cfg_.paths.lexicon, "lexicon"));
    const DataOntology data = DataOntology::load(require_path(cfg_.paths.data_ontology, "data_ontology"));
    const PolicySet policies =
        load_policies(require_path(cfg_.paths.policies, "policies"), lexicon, cfg_.paths.platform_policy);
    std::vector<PayloadSignature> signatures;
    if (cfg_.unencrypted) signatures = load_signatures(require_path(cfg_.paths.signatures, "signatures"));
    const DisclosureClassifier classifier(lexicon, data, *ontology_);

    const std::vector<DataFlowTuple> tuples = extract_flows(sessions_, verdicts_, cfg_.unencrypted, signatures);
    std::set<std::string> skills;
    for (const DataFlowTuple& t : tuples) skills.insert(t.skill_id);

    const bool have_platform = policies.platform.has_value();
    std::array<std::size_t, 4> total{}, total_with_platform{};
    std::map<std::string, std::array<std::size_t, 4>> by_entity, by_type;
    std::vector<DisclosureVerdict> all;
    json skill_rows = json::array();
    for (const std::string& skill : skills) {
      const SkillAudit a = audit_skill(skill, tuples, policies, cfg_.include_platform_policy, classifier);
      json verdicts = json::array();
      for (const DisclosureVerdict& v : a.verdicts) {
        const int k = static_cast<int>(v.verdict);
        ++total[k];
        if (v.tuple.data_type) ++by_type[*v.tuple.data_type][k];
        else ++by_entity[v.tuple.entity][k];
        auto opt = [](const std::optional<std::string>& s) { return s ? json(*s) : json(nullptr); };
        verdicts.push_back({{"data_type", opt(v.tuple.data_type)},
                            {"entity", v.tuple.entity},
                            {"verdict", to_string(v.verdict)},
                            {"evidence_sentence", opt(v.evidence_sentence)},
                            {"matched_term", opt(v.matched_term)},
                            {"evidence_source", opt(v.evidence_source)}});
        all.push_back(v);
      }
      if (have_platform && !cfg_.include_platform_policy) {
        const SkillAudit b = audit_skill(skill, tuples, policies, true, classifier);
        for (int k = 0; k < 4; ++k) total_with_platform[k] += b.summary.counts[k];
      }
      skill_rows.push_back({{"skill_id", skill},
                            {"has_policy", policies.skills.contains(skill)},
                            {"summary", disclosure_counts(a.summary.counts)},
                            {"verdicts", verdicts}});
    }
    json entities = json::array();
    for (const auto& [e, c] : by_entity) {
      json row = disclosure_counts(c);
      row["entity"] = e;
      entities.push_back(row);
    }
    json types = json::array();
    for (const auto& [t, c] : by_type) {
      json row = disclosure_counts(c);
      row["data_type"] = t;
      types.push_back(row);
    }
    json section{{"include_platform_policy", cfg_.include_platform_policy},
                 {"unencrypted", cfg_.unencrypted},
                 {"skill_policies", policies.skills.size()},
                 {"platform_policy", have_platform},
                 {"tuples", tuples.size()},
                 {"skills", skill_rows},
                 {"summary", disclosure_counts(total)},
                 {"entities", entities},
                 {"data_types", types}};
    if (have_platform && !cfg_.include_platform_policy) {
      section["summary_with_platform"] = disclosure_counts(total_with_platform);
    }
    if (cfg_.paths.gold_labels) {
      const ValidationMetrics m = validation_metrics(all, load_gold(*cfg_.paths.gold_labels));
      json per_class = json::array();
      for (const ClassMetrics& c : m.per_class) {
        per_class.push_back({{"class", to_string(c.cls)},
                             {"support", c.support},
                             {"predicted", c.predicted},
                             {"precision", c.precision},
                             {"recall", c.recall},
                             {"f1", c.f1}});
      }
      json confusion = json::object();
      for (int g = 0; g < 4; ++g) {
        json row = json::object();
        for (int p = 0; p < 4; ++p) row[to_string(static_cast<Disclosure>(p))] = m.confusion[g][p];
        confusion[to_string(static_cast<Disclosure>(g))] = row;
      }
      section["validation"] = {{"n", m.n},
                               {"micro_precision", m.micro_precision},
                               {"micro_recall", m.micro_recall},
                               {"micro_f1", m.micro_f1},
                               {"macro_precision", m.macro_precision},
                               {"macro_recall", m.macro_recall},
                               {"macro_f1", m.macro_f1},
                               {"macro_f1_class_mean", m.macro_f1_class_mean},
                               {"macro_classes", m.macro_classes},
                               {"per_class", per_class},
                               {"confusion", confusion}};
    } else {
      section["validation"] = nullptr;
    }
    emit_section(Stage::kPolicy, "policy", section);
  }

  void interests() {
    const auto snaps = load_interest_snapshots(require_path(cfg_.paths.interests, "interests"));
    json out = json::array();
    for (const InterestTimeline& tl : diff_interests(snaps)) {
      json steps = json::array();
      for (const InterestStep& s : tl.steps) {
        steps.push_back({{"request_label", to_string(s.request_label)},
                         {"status", s.missing ? "missing" : "present"},
                         {"baseline", s.baseline},
                         {"interests", s.interests},
                         {"added", s.added},
                         {"removed", s.removed}});
      }
      out.push_back({{"persona", tl.persona}, {"steps", steps}});
    }
    emit_section(Stage::kInterests, "interests", out);
  }

  const AuditConfig& cfg_;
  std::set<Stage> requested_;
  json report_ = json::object();
  json warnings_ = json::array();

  std::optional<PublicSuffixList> custom_psl_;
  std::vector<SkillSession> sessions_;
  ResolutionReport resolution_;
  std::optional<OrgOntology> ontology_;
  FilterMatcher matcher_;
  PurposeOverrides overrides_;
  std::optional<EndpointClassifier> classifier_;
  FlowVerdicts verdicts_;
  std::optional<PartnerSets> partners_;
};

}  // namespace

json run_pipeline(const AuditConfig& config, const std::set<Stage>& stages) {
  config.validate();
  if (stages.empty()) throw InputError("no stages requested");
  return Pipeline(config, stages).run();
}

}  // namespace echoaudit
