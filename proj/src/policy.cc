#include "echoaudit/policy.h"

#include <algorithm>
#include <cctype>
#include <deque>

#include "echoaudit/error.h"
#include "echoaudit/jsonl.h"
#include "echoaudit/strings.h"
#include "echoaudit/url.h"
#include "json_fields.h"

namespace echoaudit {

using nlohmann::json;

namespace {

json parse_json_file(const std::filesystem::path& path) {
  try {
    return json::parse(read_file(path));
  } catch (const json::exception& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

std::vector<std::string> strings_at(const json& j, const char* key, bool required) {
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

bool is_upper(char c) { return std::isupper(static_cast<unsigned char>(c)) != 0; }

}  // namespace

// ---------------------------------------------------------------------------
// Text normalization

std::string normalize_whitespace(std::string_view text) {
  std::string out;
  out.reserve(text.size());
  bool pending_space = false;
  for (char c : text) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      pending_space = !out.empty();
      continue;
    }
    if (pending_space) out += ' ';
    pending_space = false;
    out += c;
  }
  return out;
}

std::vector<std::string> policy_tokens(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    while (!cur.empty() && cur.back() == '\'') cur.pop_back();
    while (!cur.empty() && cur.front() == '\'') cur.erase(cur.begin());
    if (cur.ends_with("'s")) cur.resize(cur.size() - 2);
    if (cur.size() > 3 && cur.back() == 's' && !cur.ends_with("ss")) cur.pop_back();
    if (!cur.empty()) out.push_back(cur);
    cur.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const auto c = static_cast<unsigned char>(text[i]);
    if (std::isalnum(c)) {
      cur += static_cast<char>(std::tolower(c));
    } else if (c == '\'') {
      cur += '\'';
    } else if (c == 0xE2 && i + 2 < text.size() && static_cast<unsigned char>(text[i + 1]) == 0x80 &&
               static_cast<unsigned char>(text[i + 2]) == 0x99) {
      cur += '\'';  // U+2019
      i += 2;
    } else if (c >= 0x80) {
      cur += static_cast<char>(c);
    } else {
      flush();
    }
  }
  flush();
  return out;
}

// ---------------------------------------------------------------------------
// DataOntology

DataOntology DataOntology::from_json(const json& j) {
  if (!j.is_object() || !j.contains("nodes") || !j["nodes"].is_array()) {
    throw InputError("data ontology must be an object with a 'nodes' array");
  }
  DataOntology onto;
  for (const json& n : j["nodes"]) {
    if (!n.is_object()) throw InputError("data ontology nodes must be objects");
    DataNode node;
    node.term = detail::require_string(n, "term");
    node.synonyms = strings_at(n, "synonyms", false);
    node.parents = strings_at(n, "parents", false);
    if (auto it = n.find("ignore"); it != n.end()) {
      if (!it->is_boolean()) throw InputError("'ignore' must be a boolean");
      node.ignore = it->get<bool>();
    }
    if (!onto.index_.emplace(node.term, onto.nodes_.size()).second) {
      throw InputError("data ontology term '" + node.term + "' listed twice");
    }
    onto.nodes_.push_back(std::move(node));
  }
  for (const DataNode& n : onto.nodes_) {
    for (const std::string& p : n.parents) {
      if (!onto.index_.contains(p)) {
        throw InputError("data ontology term '" + n.term + "' has unknown parent '" + p + "'");
      }
    }
  }
  // Cycle check: iterative DFS with colors.
  std::vector<int> color(onto.nodes_.size(), 0);
  for (std::size_t root = 0; root < onto.nodes_.size(); ++root) {
    if (color[root] != 0) continue;
    std::vector<std::pair<std::size_t, std::size_t>> stack{{root, 0}};
    color[root] = 1;
    while (!stack.empty()) {
      auto& [v, next] = stack.back();
      const auto& parents = onto.nodes_[v].parents;
      if (next == parents.size()) {
        color[v] = 2;
        stack.pop_back();
        continue;
      }
      const std::size_t w = onto.index_.find(parents[next++])->second;
      if (color[w] == 1) {
        throw InvariantViolation("data ontology has a cycle through '" + onto.nodes_[w].term + "'");
      }
      if (color[w] == 0) {
        color[w] = 1;
        stack.emplace_back(w, 0);
      }
    }
  }
  return onto;
}

DataOntology DataOntology::load(const std::filesystem::path& path) {
  try {
    return from_json(parse_json_file(path));
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

const DataNode* DataOntology::find(std::string_view term) const {
  auto it = index_.find(term);
  return it == index_.end() ? nullptr : &nodes_[it->second];
}

std::vector<std::string> DataOntology::ancestors(std::string_view term) const {
  std::vector<std::string> out;
  const DataNode* start = find(term);
  if (!start) return out;
  std::set<std::string> seen{start->term};
  std::deque<const DataNode*> queue{start};
  while (!queue.empty()) {
    const DataNode* n = queue.front();
    queue.pop_front();
    for (const std::string& p : n->parents) {
      if (seen.insert(p).second) {
        out.push_back(p);
        queue.push_back(find(p));
      }
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Lexicon

PolicyLexicon PolicyLexicon::from_json(const json& j) {
  if (!j.is_object()) throw InputError("policy lexicon must be a JSON object");
  PolicyLexicon lex;
  lex.verbs = strings_at(j, "verbs", true);
  lex.negations = strings_at(j, "negations", false);
  lex.third_party_terms = strings_at(j, "third_party_terms", false);
  for (std::string a : strings_at(j, "abbreviations", false)) lex.abbreviations.push_back(to_lower(a));
  if (auto it = j.find("category_terms"); it != j.end()) {
    if (!it->is_object()) throw InputError("'category_terms' must be an object");
    for (auto c = it->begin(); c != it->end(); ++c) {
      lex.category_terms[parse_org_category(c.key())] = strings_at(*it, c.key().c_str(), true);
    }
  }
  return lex;
}

PolicyLexicon PolicyLexicon::load(const std::filesystem::path& path) {
  try {
    return from_json(parse_json_file(path));
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

// ---------------------------------------------------------------------------
// Documents

std::vector<std::string> split_sentences(std::string_view raw,
                                         const std::vector<std::string>& abbreviations) {
  const std::string text = normalize_whitespace(raw);
  std::vector<std::string> out;
  std::size_t start = 0;
  const std::string_view closers = "\"')]";
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char c = text[i];
    if (c != '.' && c != '!' && c != '?') continue;
    std::size_t j = i + 1;
    while (j < text.size() && closers.find(text[j]) != std::string_view::npos) ++j;
    if (j + 1 >= text.size() || text[j] != ' ' || !is_upper(text[j + 1])) continue;
    if (c == '.') {
      const std::size_t word_start = text.rfind(' ', i);
      const std::size_t ws = word_start == std::string::npos ? start : word_start + 1;
      std::string word = to_lower(std::string_view(text).substr(ws, i + 1 - ws));
      while (!word.empty() && (word.front() == '(' || word.front() == '"' || word.front() == '\'')) {
        word.erase(word.begin());
      }
      if (std::find(abbreviations.begin(), abbreviations.end(), word) != abbreviations.end()) {
        continue;
      }
    }
    out.push_back(text.substr(start, j - start));
    start = j + 1;
    i = j;
  }
  if (start < text.size()) out.push_back(text.substr(start));
  return out;
}

PolicyDocument make_policy(std::string skill_id, std::string_view raw_text,
                           const PolicyLexicon& lexicon) {
  PolicyDocument doc;
  doc.skill_id = std::move(skill_id);
  doc.text = normalize_whitespace(raw_text);
  doc.sentences = split_sentences(doc.text, lexicon.abbreviations);
  for (const std::string& s : doc.sentences) doc.sentence_tokens.push_back(policy_tokens(s));
  return doc;
}

PolicySet load_policies(const std::filesystem::path& dir, const PolicyLexicon& lexicon,
                        const std::optional<std::filesystem::path>& platform_file) {
  namespace fs = std::filesystem;
  PolicySet set;
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw InputError("policy directory '" + dir.string() + "' not found");
  std::optional<fs::path> platform_canon;
  if (platform_file) {
    set.platform = make_policy("platform", read_file(*platform_file), lexicon);
    platform_canon = fs::weakly_canonical(*platform_file);
  }
  std::vector<fs::path> files;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (entry.is_regular_file() && entry.path().extension() == ".txt") files.push_back(entry.path());
  }
  std::sort(files.begin(), files.end());
  for (const fs::path& f : files) {
    if (platform_canon && fs::weakly_canonical(f) == *platform_canon) continue;
    PolicyDocument doc = make_policy(f.stem().string(), read_file(f), lexicon);
    doc.includes_platform_policy = set.platform.has_value();
    set.skills.emplace(doc.skill_id, std::move(doc));
  }
  return set;
}

// ---------------------------------------------------------------------------
// Data flows

std::vector<PayloadSignature> signatures_from_json(const json& j) {
  if (!j.is_object() || !j.contains("signatures") || !j["signatures"].is_array()) {
    throw InputError("signature file must be an object with a 'signatures' array");
  }
  std::vector<PayloadSignature> out;
  for (const json& s : j["signatures"]) {
    if (!s.is_object()) throw InputError("signatures must be objects");
    PayloadSignature sig;
    sig.data_type = detail::require_string(s, "data_type");
    sig.pattern = detail::require_string(s, "pattern");
    if (sig.pattern.empty()) throw InputError("signature pattern must not be empty");
    const std::string kind = detail::require_string(s, "kind");
    if (kind == "magic") sig.kind = PayloadSignature::Kind::kMagic;
    else if (kind == "contains") sig.kind = PayloadSignature::Kind::kContains;
    else if (kind == "key") sig.kind = PayloadSignature::Kind::kKey;
    else throw InputError("unknown signature kind '" + kind + "'");
    out.push_back(std::move(sig));
  }
  return out;
}

std::vector<PayloadSignature> load_signatures(const std::filesystem::path& path) {
  try {
    return signatures_from_json(parse_json_file(path));
  } catch (const InputError& e) {
    throw InputError(path.string() + ": " + e.what());
  }
}

namespace {

bool has_json_key(std::string_view lower_body, const std::string& key) {
  const std::string needle = "\"" + key + "\"";
  for (std::size_t pos = lower_body.find(needle); pos != std::string_view::npos;
       pos = lower_body.find(needle, pos + 1)) {
    std::size_t k = pos + needle.size();
    while (k < lower_body.size() && lower_body[k] == ' ') ++k;
    if (k < lower_body.size() && lower_body[k] == ':') return true;
  }
  return false;
}

bool has_field(std::string_view query, const std::string& key) {
  for (const auto& [name, value] : query_params(query)) {
    if (to_lower(name) == key) return true;
  }
  return false;
}

}  // namespace

std::set<std::string> detect_data_types(const HttpEvent& http,
                                        const std::vector<PayloadSignature>& signatures) {
  std::set<std::string> found;
  const std::string body = http.body_excerpt.value_or("");
  const std::string lower_body = to_lower(body);
  std::string url_query;
  if (auto u = parse_url(http.url)) url_query = u->query;
  for (const PayloadSignature& sig : signatures) {
    if (found.contains(sig.data_type)) continue;
    bool hit = false;
    switch (sig.kind) {
      case PayloadSignature::Kind::kMagic:
        hit = body.starts_with(sig.pattern);
        break;
      case PayloadSignature::Kind::kContains:
        hit = lower_body.find(to_lower(sig.pattern)) != std::string::npos;
        break;
      case PayloadSignature::Kind::kKey: {
        const std::string key = to_lower(sig.pattern);
        hit = has_json_key(lower_body, key) || has_field(url_query, key) ||
              (lower_body.find('{') == std::string::npos && has_field(body, key));
        for (const auto& [name, value] : http.request_headers) {
          if (to_lower(name) == key) hit = true;
        }
        break;
      }
    }
    if (hit) found.insert(sig.data_type);
  }
  return found;
}

std::vector<DataFlowTuple> extract_flows(const std::vector<SkillSession>& sessions,
                                         const FlowVerdicts& verdicts, bool unencrypted,
                                         const std::vector<PayloadSignature>& signatures) {
  std::set<DataFlowTuple> out;
  for (std::size_t si = 0; si < sessions.size(); ++si) {
    const SkillSession& s = sessions[si];
    if (!s.skill_id) continue;
    for (std::size_t fi = 0; fi < s.flows.size(); ++fi) {
      const FlowRecord& f = s.flows[fi];
      if (f.phase == Phase::kCrawl) continue;
      const EndpointVerdict* v = verdicts.at({si, fi});
      if (!v) continue;
      if (unencrypted && f.http) {
        for (const std::string& dt : detect_data_types(*f.http, signatures)) {
          out.insert({dt, v->org_name, *s.skill_id});
        }
      } else {
        out.insert({std::nullopt, v->org_name, *s.skill_id});
      }
    }
  }
  return {out.begin(), out.end()};
}

// ---------------------------------------------------------------------------
// Disclosure

const char* to_string(Disclosure d) {
  switch (d) {
    case Disclosure::kClear: return "clear";
    case Disclosure::kVague: return "vague";
    case Disclosure::kOmitted: return "omitted";
    case Disclosure::kNoPolicy: return "no_policy";
  }
  return "?";
}

Disclosure parse_disclosure(std::string_view s) {
  if (s == "clear") return Disclosure::kClear;
  if (s == "vague") return Disclosure::kVague;
  if (s == "omitted") return Disclosure::kOmitted;
  if (s == "no_policy") return Disclosure::kNoPolicy;
  throw InputError("unknown disclosure verdict '" + std::string(s) + "'");
}

int clarity(Disclosure d) {
  switch (d) {
    case Disclosure::kClear: return 3;
    case Disclosure::kVague: return 2;
    case Disclosure::kOmitted: return 1;
    case Disclosure::kNoPolicy: return 0;
  }
  return 0;
}

const char* to_string(MatchMode m) {
  switch (m) {
    case MatchMode::kEntity: return "entity";
    case MatchMode::kDataType: return "data_type";
    case MatchMode::kJoint: return "joint";
  }
  return "?";
}

MatchMode parse_match_mode(std::string_view s) {
  if (s == "entity") return MatchMode::kEntity;
  if (s == "data_type") return MatchMode::kDataType;
  if (s == "joint") return MatchMode::kJoint;
  throw InputError("unknown match mode '" + std::string(s) + "'");
}

DisclosureClassifier::DisclosureClassifier(const PolicyLexicon& lexicon,
                                           const DataOntology& data_ontology,
                                           const OrgOntology& org_ontology)
    : data_(&data_ontology), orgs_(&org_ontology) {
  for (const std::string& v : lexicon.verbs) {
    for (std::string& t : policy_tokens(v)) verbs_.insert(std::move(t));
  }
  for (const std::string& n : lexicon.negations) {
    for (std::string& t : policy_tokens(n)) negations_.insert(std::move(t));
  }
  for (const auto& [cat, terms] : lexicon.category_terms) category_terms_[cat] = terms_of(terms);
  third_party_terms_ = terms_of(lexicon.third_party_terms);
}

std::vector<DisclosureClassifier::Term> DisclosureClassifier::terms_of(
    const std::vector<std::string>& raw) const {
  std::vector<Term> out;
  for (const std::string& r : raw) {
    std::vector<std::string> toks = policy_tokens(r);
    if (!toks.empty()) out.push_back({r, std::move(toks)});
  }
  return out;
}

std::optional<std::string> DisclosureClassifier::find_term(const std::vector<std::string>& toks,
                                                           const std::vector<Term>& terms) {
  for (const Term& t : terms) {
    if (std::search(toks.begin(), toks.end(), t.tokens.begin(), t.tokens.end()) != toks.end()) {
      return t.text;
    }
  }
  return std::nullopt;
}

bool DisclosureClassifier::qualifies(const std::vector<std::string>& toks) const {
  bool verb = false;
  for (const std::string& t : toks) {
    if (negations_.contains(t)) return false;
    if (verbs_.contains(t)) verb = true;
  }
  return verb;
}

DisclosureClassifier::SentenceMatch DisclosureClassifier::match_entity(
    const std::vector<std::string>& toks, const std::string& entity) const {
  std::vector<std::string> names{entity};
  std::vector<Term> vague;
  if (const OrgEntry* org = orgs_->find_by_name(entity)) {
    names.insert(names.end(), org->aliases.begin(), org->aliases.end());
    for (OrgCategory c : org->categories) {
      if (auto it = category_terms_.find(c); it != category_terms_.end()) {
        vague.insert(vague.end(), it->second.begin(), it->second.end());
      }
    }
  }
  vague.insert(vague.end(), third_party_terms_.begin(), third_party_terms_.end());
  if (entity != kUnknownOrg) {
    if (auto hit = find_term(toks, terms_of(names))) return {Disclosure::kClear, *hit};
  }
  if (auto hit = find_term(toks, vague)) return {Disclosure::kVague, *hit};
  return {};
}

DisclosureClassifier::SentenceMatch DisclosureClassifier::match_data(
    const std::vector<std::string>& toks, const std::string& data_type) const {
  const DataNode* node = data_->find(data_type);
  if (!node || node->ignore) return {};
  auto node_terms = [&](const DataNode& n) {
    std::vector<std::string> raw = n.synonyms;
    std::string spaced = n.term;
    std::replace(spaced.begin(), spaced.end(), '_', ' ');
    raw.push_back(spaced);
    return terms_of(raw);
  };
  if (auto hit = find_term(toks, node_terms(*node))) return {Disclosure::kClear, *hit};
  for (const std::string& a : data_->ancestors(data_type)) {
    const DataNode* an = data_->find(a);
    if (an->ignore) continue;
    if (auto hit = find_term(toks, node_terms(*an))) return {Disclosure::kVague, *hit};
  }
  return {};
}

DisclosureVerdict DisclosureClassifier::classify(const DataFlowTuple& tuple,
                                                 const PolicyDocument* policy,
                                                 std::optional<MatchMode> mode) const {
  DisclosureVerdict out;
  out.tuple = tuple;
  if (!policy) {
    out.verdict = Disclosure::kNoPolicy;
    return out;
  }
  const MatchMode m = mode.value_or(tuple.data_type ? MatchMode::kDataType : MatchMode::kEntity);
  if (m != MatchMode::kEntity && !tuple.data_type) {
    throw InputError(std::string(to_string(m)) + " matching needs a data type");
  }

  std::optional<std::size_t> vague_at;
  std::string vague_term;
  for (std::size_t i = 0; i < policy->sentences.size(); ++i) {
    std::vector<std::string> scratch;
    const std::vector<std::string>* toks = &scratch;
    if (i < policy->sentence_tokens.size()) toks = &policy->sentence_tokens[i];
    else scratch = policy_tokens(policy->sentences[i]);
    if (!qualifies(*toks)) continue;

    SentenceMatch hit;
    if (m == MatchMode::kEntity) {
      hit = match_entity(*toks, tuple.entity);
    } else if (m == MatchMode::kDataType) {
      hit = match_data(*toks, *tuple.data_type);
    } else {
      const SentenceMatch e = match_entity(*toks, tuple.entity);
      const SentenceMatch d = match_data(*toks, *tuple.data_type);
      if (e.level != Disclosure::kOmitted && d.level != Disclosure::kOmitted) {
        hit.level = clarity(e.level) < clarity(d.level) ? e.level : d.level;
        hit.term = d.term + " + " + e.term;
      }
    }
    if (hit.level == Disclosure::kClear) {
      out.verdict = Disclosure::kClear;
      out.evidence_sentence = policy->sentences[i];
      out.matched_term = hit.term;
      out.evidence_source = policy->skill_id;
      return out;
    }
    if (hit.level == Disclosure::kVague && !vague_at) {
      vague_at = i;
      vague_term = hit.term;
    }
  }
  if (vague_at) {
    out.verdict = Disclosure::kVague;
    out.evidence_sentence = policy->sentences[*vague_at];
    out.matched_term = vague_term;
    out.evidence_source = policy->skill_id;
  } else {
    out.verdict = Disclosure::kOmitted;
  }
  return out;
}

SkillAudit audit_skill(const std::string& skill_id, const std::vector<DataFlowTuple>& tuples,
                       const PolicySet& policies, bool include_platform_policy,
                       const DisclosureClassifier& classifier) {
  SkillAudit audit;
  audit.skill_id = skill_id;
  const PolicyDocument* own = nullptr;
  if (auto it = policies.skills.find(skill_id); it != policies.skills.end()) own = &it->second;
  const PolicyDocument* platform =
      include_platform_policy && policies.platform ? &*policies.platform : nullptr;

  for (const DataFlowTuple& t : tuples) {
    if (t.skill_id != skill_id) continue;
    DisclosureVerdict v = classifier.classify(t, own);
    if (platform) {
      DisclosureVerdict pv = classifier.classify(t, platform);
      if (clarity(pv.verdict) > clarity(v.verdict)) v = std::move(pv);
    }
    ++audit.summary.counts[static_cast<int>(v.verdict)];
    audit.verdicts.push_back(std::move(v));
  }
  return audit;
}

}  // namespace echoaudit
