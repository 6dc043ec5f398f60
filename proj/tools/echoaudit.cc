// echoaudit: command-line front end for the audit pipeline.

#include <iostream>
#include <optional>
#include <set>
#include <string>

#include "CLI11.hpp"
#include "echoaudit/error.h"
#include "echoaudit/jsonl.h"
#include "echoaudit/pipeline.h"
#include "echoaudit/report.h"

using namespace echoaudit;
using nlohmann::json;

namespace {

struct Common {
  std::string config;
  std::string stages;
  std::string out;
  std::string format = "text";

  std::optional<std::string> platform_org;
  std::optional<std::string> weight;
  std::optional<std::string> slot_key;
  std::optional<std::size_t> body_excerpt_max;
  std::optional<std::size_t> min_id_length;
  std::optional<std::size_t> exact_cutoff;
  std::optional<double> alpha;
  std::optional<std::string> control;
  std::vector<std::string> treatments;
  bool bonferroni = false;
  bool include_platform_policy = false;
  bool encrypted_only = false;
};

void add_common(CLI::App* app, Common& c, bool with_stages) {
  app->add_option("-c,--config", c.config, "audit config (JSON)")->required()->check(CLI::ExistingFile);
  if (with_stages) app->add_option("--stages", c.stages, "comma-separated stages to run");
  app->add_option("-o,--out", c.out, "output directory (default: stdout)");
  app->add_option("-f,--format", c.format, "json | csv_bundle | text")->capture_default_str();
  app->add_option("--platform-org", c.platform_org, "focus organization for party and sync analysis");
  app->add_option("--weight", c.weight, "traffic weighting: flows | bytes");
  app->add_option("--slot-key", c.slot_key, "site+slot | site+slot+iteration");
  app->add_option("--body-excerpt-max", c.body_excerpt_max, "bytes of HTTP body kept per record");
  app->add_option("--min-id-length", c.min_id_length, "shortest identifier considered for syncing");
  app->add_option("--exact-cutoff", c.exact_cutoff, "largest n1*n2 tested exactly");
  app->add_option("--alpha", c.alpha, "significance level");
  app->add_option("--control", c.control, "control persona for bid comparisons");
  app->add_option("--treatments", c.treatments, "treatment personas")->delimiter(',');
  app->add_flag("--bonferroni", c.bonferroni, "divide alpha by the number of treatments");
  app->add_flag("--include-platform-policy", c.include_platform_policy, "fall back to the platform policy");
  app->add_flag("--encrypted-only", c.encrypted_only, "ignore HTTP payloads when extracting data flows");
}

AuditConfig build_config(const Common& c) {
  AuditConfig cfg = AuditConfig::load(c.config);
  if (c.platform_org) cfg.platform_org = *c.platform_org;
  if (c.weight) cfg.distribution_weight = parse_distribution_weight(*c.weight);
  if (c.slot_key) cfg.slot_key = parse_slot_key(*c.slot_key);
  if (c.body_excerpt_max) cfg.body_excerpt_max = *c.body_excerpt_max;
  if (c.min_id_length) cfg.min_id_length = *c.min_id_length;
  if (c.exact_cutoff) cfg.exact_cutoff = *c.exact_cutoff;
  if (c.alpha) cfg.alpha = *c.alpha;
  if (c.control) cfg.control = *c.control;
  if (!c.treatments.empty()) cfg.treatments = c.treatments;
  if (c.bonferroni) cfg.bonferroni = true;
  if (c.include_platform_policy) cfg.include_platform_policy = true;
  if (c.encrypted_only) cfg.unencrypted = false;
  return cfg;
}

// Keeps only the named tables when rendering a subcommand's view.
json restrict_report(const json& report, const std::set<std::string>& sections) {
  json out = json::object();
  for (auto it = report.begin(); it != report.end(); ++it) {
    if (sections.contains(it.key()) || it.key() == "warnings") out[it.key()] = it.value();
  }
  return out;
}

void write_out(const json& report, const Common& c, const std::set<std::string>& tables = {}) {
  const ReportFormat fmt = parse_report_format(c.format);
  if (!c.out.empty()) {
    for (const auto& p : emit(report, fmt, c.out)) std::cerr << "wrote " << p.string() << "\n";
    return;
  }
  if (fmt == ReportFormat::kCsvBundle || tables.empty() || fmt == ReportFormat::kJson) {
    std::cout << render(report, fmt);
    return;
  }
  for (const Table& t : report_tables(report)) {
    if (tables.contains(t.name)) std::cout << render_text(t) << "\n";
  }
}

int run(int argc, char** argv) {
  CLI::App app{"Audit voice-assistant traffic, bids and privacy policies"};
  app.require_subcommand(1);
  Common c;

  auto* audit = app.add_subcommand("audit", "run the full pipeline (or --stages)");
  add_common(audit, c, true);
  audit->callback([&] {
    const std::set<Stage> stages = c.stages.empty() ? all_stages() : parse_stage_list(c.stages);
    write_out(run_pipeline(build_config(c), stages), c);
  });

  auto single = [&](const char* name, const char* help, Stage stage, const char* section) {
    auto* sub = app.add_subcommand(name, help);
    add_common(sub, c, false);
    sub->callback([&c, stage, section] {
      const json report = run_pipeline(build_config(c), {stage});
      write_out(restrict_report(report, {section, "stages", "config", "fingerprint"}), c);
    });
  };
  single("ingest", "parse and segment traces", Stage::kIngest, "ingest");
  single("resolve", "map flows to hostnames", Stage::kResolve, "resolution");
  single("classify", "party/purpose tables", Stage::kClassify, "traffic");
  single("syncs", "cookie-sync partners", Stage::kSyncs, "syncs");

  auto* bids = app.add_subcommand("bids", "header-bidding analysis");
  bids->require_subcommand(1);
  auto bid_view = [&](const char* name, const char* help, std::set<std::string> tables) {
    auto* sub = bids->add_subcommand(name, help);
    add_common(sub, c, false);
    sub->callback([&c, tables] {
      write_out(restrict_report(run_pipeline(build_config(c), {Stage::kBids}), {"bids"}), c, tables);
    });
  };
  bid_view("stats", "median and mean CPM per persona", {"bids_median_mean"});
  bid_view("compare", "treatment vs control tests", {"bids_significance", "bids_cross_group"});
  bid_view("split", "partner vs non-partner bids", {"bids_partner_split"});

  auto* policy = app.add_subcommand("policy", "privacy policy disclosures");
  policy->require_subcommand(1);
  auto* check = policy->add_subcommand("check", "classify data flows against policies");
  add_common(check, c, false);
  check->callback([&] {
    write_out(restrict_report(run_pipeline(build_config(c), {Stage::kPolicy}), {"policy"}), c,
              {"policy_disclosures", "policy_data_types"});
  });
  auto* validate = policy->add_subcommand("validate", "compare verdicts with gold labels");
  add_common(validate, c, false);
  validate->callback([&] {
    const AuditConfig cfg = build_config(c);
    if (!cfg.paths.gold_labels) throw InputError("policy validate needs paths.gold_labels");
    write_out(restrict_report(run_pipeline(cfg, {Stage::kPolicy}), {"policy"}), c, {"validation_metrics"});
  });

  auto* interests = app.add_subcommand("interests", "inferred-interest snapshots");
  interests->require_subcommand(1);
  auto* diff = interests->add_subcommand("diff", "changes between successive snapshots");
  add_common(diff, c, false);
  diff->callback([&] {
    write_out(restrict_report(run_pipeline(build_config(c), {Stage::kInterests}), {"interests"}), c);
  });

  auto* report = app.add_subcommand("report", "render a saved report");
  report->require_subcommand(1);
  auto* emit_cmd = report->add_subcommand("emit", "re-render report.json");
  std::string input;
  emit_cmd->add_option("-i,--input", input, "report.json")->required()->check(CLI::ExistingFile);
  emit_cmd->add_option("-o,--out", c.out, "output directory (default: stdout)");
  emit_cmd->add_option("-f,--format", c.format, "json | csv_bundle | text")->capture_default_str();
  emit_cmd->callback([&] {
    json j;
    try {
      j = json::parse(read_file(input));
    } catch (const json::exception& e) {
      throw InputError(input + ": " + e.what());
    }
    write_out(j, c);
  });

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : static_cast<int>(ExitCode::kInputError);
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return run(argc, argv);
  } catch (const StageError& e) {
    std::cerr << "echoaudit: " << e.what() << "\n";
    return static_cast<int>(e.code());
  } catch (const AuditError& e) {
    std::cerr << "echoaudit: " << e.what() << "\n";
    return static_cast<int>(e.code());
  } catch (const std::exception& e) {
    std::cerr << "echoaudit: internal error: " << e.what() << "\n";
    return static_cast<int>(ExitCode::kInternalError);
  }
}
