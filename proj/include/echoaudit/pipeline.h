#pragma once

// End-to-end audit: configuration, stage sequencing and the report model.

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "echoaudit/bids.h"
#include "echoaudit/endpoint.h"
#include "json.hpp"

namespace echoaudit {

enum class Stage { kIngest, kResolve, kClassify, kSyncs, kBids, kPolicy, kInterests };
const char* to_string(Stage s);
Stage parse_stage(std::string_view s);
std::set<Stage> all_stages();
// Comma-separated stage names.
std::set<Stage> parse_stage_list(std::string_view csv);

struct AuditPaths {
  std::vector<std::filesystem::path> traces;
  std::optional<std::filesystem::path> bids;
  std::optional<std::filesystem::path> policies;         // directory of <skill_id>.txt
  std::optional<std::filesystem::path> platform_policy;  // text file
  std::optional<std::filesystem::path> org_ontology;
  std::optional<std::filesystem::path> data_ontology;
  std::optional<std::filesystem::path> lexicon;
  std::optional<std::filesystem::path> signatures;
  std::vector<std::filesystem::path> filter_lists;
  std::optional<std::filesystem::path> overrides;
  std::optional<std::filesystem::path> skill_vendors;
  std::optional<std::filesystem::path> gold_labels;
  std::optional<std::filesystem::path> interests;
  std::optional<std::filesystem::path> public_suffix_list;
};

struct AuditConfig {
  // Relative paths in the file are resolved against this directory.
  std::filesystem::path base_dir = ".";
  AuditPaths paths;

  std::string platform_org = "Amazon";
  DistributionWeight distribution_weight = DistributionWeight::kFlows;
  SlotKey slot_key = SlotKey::kSiteSlot;
  std::size_t body_excerpt_max = 4096;
  std::size_t min_id_length = 8;
  std::size_t exact_cutoff = 400;
  bool bonferroni = false;
  double alpha = 0.05;

  // Bid comparisons. Empty means: the single vanilla persona; all interest
  // personas; all web_control personas.
  std::string control;
  std::vector<std::string> treatments;
  std::vector<std::string> web_group;

  bool include_platform_policy = false;
  bool unencrypted = true;

  static AuditConfig from_json(const nlohmann::json& j, const std::filesystem::path& base_dir);
  static AuditConfig load(const std::filesystem::path& path);
  nlohmann::json knobs_json() const;

  // Numeric ranges and existence of every configured path. Throws InputError.
  void validate() const;
};

inline constexpr std::size_t kMaxBodyExcerpt = 1 << 20;

// Stages run in pipeline order; each requested stage pulls in what it
// depends on (resolve <- ingest, classify <- resolve, syncs/policy <-
// classify, bids <- syncs when traces are configured). Only requested stages
// get report sections. Failures surface as StageError.
nlohmann::json run_pipeline(const AuditConfig& config, const std::set<Stage>& stages = all_stages());

// SHA-256 hex digest of a file's bytes.
std::string sha256_file(const std::filesystem::path& path);

// Digest of every configured input, keyed by path relative to base_dir.
// Directories contribute each regular file inside them.
nlohmann::json dataset_fingerprint(const AuditConfig& config);

}  // namespace echoaudit
