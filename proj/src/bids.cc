#include "echoaudit/bids.h"

#include <algorithm>
#include <cmath>
#include <tuple>
#include <unordered_map>

#include "echoaudit/error.h"
#include "echoaudit/jsonl.h"
#include "echoaudit/strings.h"
#include "json_fields.h"

namespace echoaudit {

using nlohmann::json;
using detail::reject_unknown_keys;
using detail::require;
using detail::require_string;

BidRecord bid_from_json(const json& j) {
  if (!j.is_object()) throw InputError("bid record must be a JSON object");
  reject_unknown_keys(j, {"persona", "iteration", "site", "slot_id", "bidder", "cpm", "currency",
                          "timestamp_ms"},
                      "bid record");
  BidRecord b;
  b.persona = persona_from_json(require(j, "persona"));

  const json& it = require(j, "iteration");
  if (!it.is_number_integer() || it.get<std::int64_t>() < 1) {
    throw InputError("iteration must be an integer >= 1");
  }
  b.iteration = static_cast<int>(it.get<std::int64_t>());

  b.site = to_lower(require_string(j, "site"));
  if (!is_valid_hostname(b.site)) throw InputError("site '" + b.site + "' is not a hostname");
  b.slot_id = require_string(j, "slot_id");
  if (b.slot_id.empty()) throw InputError("slot_id must not be empty");
  b.bidder = require_string(j, "bidder");
  if (b.bidder.empty()) throw InputError("bidder must not be empty");

  const json& cpm = require(j, "cpm");
  if (!cpm.is_number()) throw InputError("cpm must be a number");
  b.cpm = cpm.get<double>();
  if (!std::isfinite(b.cpm) || b.cpm < 0) throw InputError("cpm must be finite and >= 0");

  b.currency = require_string(j, "currency");
  const json& ts = require(j, "timestamp_ms");
  if (!ts.is_number_integer()) throw InputError("timestamp_ms must be an integer");
  b.timestamp_ms = ts.get<std::int64_t>();
  return b;
}

json bid_to_json(const BidRecord& b) {
  return json{{"persona", persona_to_json(b.persona)},
              {"iteration", b.iteration},
              {"site", b.site},
              {"slot_id", b.slot_id},
              {"bidder", b.bidder},
              {"cpm", b.cpm},
              {"currency", b.currency},
              {"timestamp_ms", b.timestamp_ms}};
}

BidIngestResult ingest_bids_text(std::string_view text, std::string_view source) {
  auto parsed = read_jsonl<BidRecord>(text, source, bid_from_json);
  BidIngestResult out;
  out.total_lines = parsed.total_lines;
  out.malformed_lines = parsed.malformed.size();
  for (auto& [line, reason] : parsed.malformed) out.warnings.push_back({line, std::move(reason)});

  using Key = std::tuple<std::string, int, std::string, std::string, std::string, std::int64_t>;
  std::map<Key, std::size_t> seen;
  std::unordered_map<std::string, PersonaKind> kinds;
  for (std::size_t i = 0; i < parsed.records.size(); ++i) {
    const BidRecord& b = parsed.records[i];
    const std::string where = std::string(source) + ":" + std::to_string(parsed.record_lines[i]);
    auto [kit, fresh] = kinds.emplace(b.persona.name, b.persona.kind);
    if (!fresh && kit->second != b.persona.kind) {
      throw InvariantViolation(where + ": persona '" + b.persona.name + "' used with two kinds");
    }
    Key key{b.persona.name, b.iteration, b.site, b.slot_id, b.bidder, b.timestamp_ms};
    auto [it, inserted] = seen.emplace(key, parsed.record_lines[i]);
    if (!inserted) {
      throw InvariantViolation(where + ": duplicate bid (first at line " +
                               std::to_string(it->second) + ")");
    }
  }
  out.bids = std::move(parsed.records);
  return out;
}

BidIngestResult ingest_bids(const std::filesystem::path& path) {
  return ingest_bids_text(read_file(path), path.string());
}

const char* to_string(SlotKey k) {
  return k == SlotKey::kSiteSlot ? "site+slot" : "site+slot+iteration";
}

SlotKey parse_slot_key(std::string_view s) {
  if (s == "site+slot") return SlotKey::kSiteSlot;
  if (s == "site+slot+iteration") return SlotKey::kSiteSlotIteration;
  throw InputError("slots.key must be 'site+slot' or 'site+slot+iteration', got '" +
                   std::string(s) + "'");
}

namespace {

std::string slot_key(const BidRecord& b, SlotKey key) {
  std::string k = b.site;
  k += '\0';
  k += b.slot_id;
  if (key == SlotKey::kSiteSlotIteration) {
    k += '\0';
    k += std::to_string(b.iteration);
  }
  return k;
}

}  // namespace

CommonSlots common_slots(const std::vector<BidRecord>& bids, const std::set<std::string>& personas,
                         SlotKey key) {
  CommonSlots out;
  std::map<std::string, std::set<std::string>> seen_by;
  for (const BidRecord& b : bids) {
    if (personas.contains(b.persona.name)) seen_by[slot_key(b, key)].insert(b.persona.name);
  }
  out.slots_total = seen_by.size();
  std::set<std::string> keep;
  for (const auto& [k, who] : seen_by) {
    if (who.size() == personas.size()) keep.insert(k);
  }
  out.slots_kept = keep.size();
  for (const BidRecord& b : bids) {
    if (personas.contains(b.persona.name) && keep.contains(slot_key(b, key))) out.bids.push_back(b);
  }
  if (keep.empty()) {
    out.warnings.push_back("no ad slot received bids under all " +
                           std::to_string(personas.size()) + " personas");
  }
  return out;
}

BidSummary summarize(const std::vector<double>& cpms) {
  BidSummary s;
  s.n = cpms.size();
  if (!cpms.empty()) {
    s.median_cpm = median(cpms);
    s.mean_cpm = mean(cpms);
  }
  return s;
}

std::vector<PersonaAggregate> aggregate(const std::vector<BidRecord>& bids) {
  std::map<std::string, std::pair<PersonaId, std::vector<double>>> by;
  for (const BidRecord& b : bids) {
    auto& slot = by[b.persona.name];
    slot.first = b.persona;
    slot.second.push_back(b.cpm);
  }
  std::vector<PersonaAggregate> out;
  for (const auto& [name, entry] : by) out.push_back({entry.first, summarize(entry.second)});
  return out;
}

std::vector<double> cpms_of(const std::vector<BidRecord>& bids, const std::string& persona) {
  std::vector<double> out;
  for (const BidRecord& b : bids) {
    if (b.persona.name == persona) out.push_back(b.cpm);
  }
  return out;
}

namespace {

std::vector<double> require_cpms(const std::vector<BidRecord>& bids, const std::string& persona) {
  std::vector<double> v = cpms_of(bids, persona);
  if (v.empty()) throw InputError("persona '" + persona + "' has no bids on common slots");
  return v;
}

}  // namespace

std::vector<ComparisonRow> persona_comparison(const std::vector<BidRecord>& bids,
                                              const std::vector<std::string>& treatments,
                                              const std::string& control,
                                              const ComparisonOptions& options) {
  const std::vector<double> ctrl = require_cpms(bids, control);
  const double alpha = options.bonferroni && !treatments.empty()
                           ? options.alpha / static_cast<double>(treatments.size())
                           : options.alpha;
  std::vector<ComparisonRow> out;
  for (const std::string& t : treatments) {
    ComparisonRow row;
    row.treatment = t;
    row.control = control;
    row.stat = mann_whitney_one_sided(require_cpms(bids, t), ctrl, options.mann_whitney);
    row.alpha = alpha;
    row.significant = row.stat.p_value < alpha;
    out.push_back(std::move(row));
  }
  return out;
}

const char* to_string(BidderLabel l) {
  return l == BidderLabel::kPartner ? "partner" : "non_partner";
}

std::vector<PartnerSplitRow> partner_split(const std::vector<LabeledBid>& bids) {
  std::map<std::string, std::array<std::vector<double>, 2>> by;
  for (const LabeledBid& lb : bids) {
    by[lb.bid.persona.name][lb.label == BidderLabel::kPartner ? 0 : 1].push_back(lb.bid.cpm);
  }
  std::vector<PartnerSplitRow> out;
  for (const auto& [persona, groups] : by) {
    PartnerSplitRow row;
    row.persona = persona;
    row.partner = summarize(groups[0]);
    row.non_partner = summarize(groups[1]);
    if (row.partner.median_cpm && row.non_partner.median_cpm && *row.non_partner.median_cpm > 0) {
      row.median_ratio = *row.partner.median_cpm / *row.non_partner.median_cpm;
    }
    out.push_back(std::move(row));
  }
  return out;
}

std::vector<CrossGroupCell> cross_group_comparison(const std::vector<BidRecord>& bids,
                                                   const std::vector<std::string>& group_a,
                                                   const std::vector<std::string>& group_b,
                                                   const ComparisonOptions& options) {
  const std::size_t tests = group_a.size() * group_b.size();
  const double alpha = options.bonferroni && tests > 0
                           ? options.alpha / static_cast<double>(tests)
                           : options.alpha;
  std::vector<CrossGroupCell> out;
  for (const std::string& a : group_a) {
    const std::vector<double> va = require_cpms(bids, a);
    for (const std::string& b : group_b) {
      CrossGroupCell cell;
      cell.a = a;
      cell.b = b;
      cell.stat = mann_whitney_one_sided(va, require_cpms(bids, b), options.mann_whitney);
      cell.significant_two_sided = cell.stat.p_two_sided < alpha;
      cell.significant_one_sided = cell.stat.p_value < alpha;
      out.push_back(std::move(cell));
    }
  }
  return out;
}

}  // namespace echoaudit
