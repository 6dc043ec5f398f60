#pragma once

// Header-bidding bid exports: ingestion, common-slot filtering, per-persona
// aggregates and treatment/control comparisons.

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "echoaudit/stats.h"
#include "echoaudit/trace.h"

namespace echoaudit {

struct BidRecord {
  PersonaId persona;
  int iteration = 1;
  std::string site;
  std::string slot_id;
  std::string bidder;
  double cpm = 0;
  std::string currency = "USD";
  std::int64_t timestamp_ms = 0;
};

BidRecord bid_from_json(const nlohmann::json& j);
nlohmann::json bid_to_json(const BidRecord& b);

struct BidIngestResult {
  std::vector<BidRecord> bids;
  std::vector<LineWarning> warnings;
  std::size_t malformed_lines = 0;
  std::size_t total_lines = 0;
};

// Same malformed-line policy as ingest_trace. Duplicate
// (persona, iteration, site, slot_id, bidder, timestamp_ms) keys and persona
// kind conflicts throw InvariantViolation.
BidIngestResult ingest_bids(const std::filesystem::path& path);
BidIngestResult ingest_bids_text(std::string_view text, std::string_view source = "<memory>");

enum class SlotKey { kSiteSlot, kSiteSlotIteration };
const char* to_string(SlotKey k);
SlotKey parse_slot_key(std::string_view s);

struct CommonSlots {
  std::vector<BidRecord> bids;
  std::size_t slots_total = 0;  // distinct keys among bids of the requested personas
  std::size_t slots_kept = 0;
  std::vector<std::string> warnings;
};

// Keeps bids of `personas` whose slot key received at least one bid under
// every persona in the set. Bids of other personas are dropped.
CommonSlots common_slots(const std::vector<BidRecord>& bids, const std::set<std::string>& personas,
                         SlotKey key = SlotKey::kSiteSlot);

struct BidSummary {
  std::size_t n = 0;
  std::optional<double> median_cpm;
  std::optional<double> mean_cpm;
};

BidSummary summarize(const std::vector<double>& cpms);

struct PersonaAggregate {
  PersonaId persona;
  BidSummary summary;
};

// One row per persona present in `bids`, ordered by persona name.
std::vector<PersonaAggregate> aggregate(const std::vector<BidRecord>& bids);

struct ComparisonOptions {
  MannWhitneyOptions mann_whitney;
  double alpha = 0.05;
  bool bonferroni = false;
};

struct ComparisonRow {
  std::string treatment;
  std::string control;
  StatResult stat;
  double alpha = 0.05;  // after any correction
  bool significant = false;
};

std::vector<double> cpms_of(const std::vector<BidRecord>& bids, const std::string& persona);

// One row per treatment, in the order given. A treatment with no bids throws
// InputError naming it.
std::vector<ComparisonRow> persona_comparison(const std::vector<BidRecord>& bids,
                                              const std::vector<std::string>& treatments,
                                              const std::string& control,
                                              const ComparisonOptions& options = {});

enum class BidderLabel { kPartner, kNonPartner };
const char* to_string(BidderLabel l);

struct LabeledBid {
  BidRecord bid;
  BidderLabel label = BidderLabel::kNonPartner;
  std::optional<std::string> org;  // resolved bidder organization
};

struct PartnerSplitRow {
  std::string persona;
  BidSummary partner;
  BidSummary non_partner;
  // partner median / non-partner median, when both exist and the divisor is
  // positive.
  std::optional<double> median_ratio;
};

std::vector<PartnerSplitRow> partner_split(const std::vector<LabeledBid>& bids);

struct CrossGroupCell {
  std::string a;
  std::string b;
  StatResult stat;  // a as treatment, b as control
  bool significant_two_sided = false;
  bool significant_one_sided = false;
};

// Every (a, b) in group_a x group_b, row-major.
std::vector<CrossGroupCell> cross_group_comparison(const std::vector<BidRecord>& bids,
                                                   const std::vector<std::string>& group_a,
                                                   const std::vector<std::string>& group_b,
                                                   const ComparisonOptions& options = {});

}  // namespace echoaudit
