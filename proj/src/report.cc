#include "echoaudit/report.h"

#include <cmath>
#include <fstream>
#include <sstream>

#include "echoaudit/error.h"
#include "echoaudit/strings.h"

namespace echoaudit {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

int decimals_for(std::string_view key) {
  if (key.size() >= 4 && key.substr(key.size() - 4) == "_pct") return 2;
  if (key.starts_with("p_")) return 4;
  return 3;
}

std::string format_float(double v, std::string_view key) {
  if (!std::isfinite(v)) return "null";
  return format_fixed(v, decimals_for(key));
}

void dump(const json& j, std::string_view key, std::string& out) {
  switch (j.type()) {
    case json::value_t::object: {
      out += '{';
      bool first = true;
      for (auto it = j.begin(); it != j.end(); ++it) {  // nlohmann::json keeps keys sorted
        if (!first) out += ',';
        first = false;
        out += json(it.key()).dump();
        out += ':';
        dump(it.value(), it.key(), out);
      }
      out += '}';
      break;
    }
    case json::value_t::array: {
      out += '[';
      for (std::size_t i = 0; i < j.size(); ++i) {
        if (i) out += ',';
        dump(j[i], key, out);
      }
      out += ']';
      break;
    }
    case json::value_t::number_float:
      out += format_float(j.get<double>(), key);
      break;
    default:
      out += j.dump(-1, ' ', false, json::error_handler_t::replace);
  }
}

std::string cell(const json& j, std::string_view key = {}) {
  switch (j.type()) {
    case json::value_t::null: return "";
    case json::value_t::string: return j.get<std::string>();
    case json::value_t::boolean: return j.get<bool>() ? "yes" : "no";
    case json::value_t::number_float: return format_float(j.get<double>(), key);
    case json::value_t::array: {
      std::vector<std::string> parts;
      for (const json& e : j) parts.push_back(cell(e, key));
      return join(parts, "; ");
    }
    default: return j.dump();
  }
}

std::string field(const json& row, const char* key) {
  auto it = row.find(key);
  return it == row.end() ? "" : cell(*it, key);
}

const json* find_path(const json& j, std::initializer_list<const char*> path) {
  const json* cur = &j;
  for (const char* k : path) {
    if (!cur->is_object()) return nullptr;
    auto it = cur->find(k);
    if (it == cur->end() || it->is_null()) return nullptr;
    cur = &*it;
  }
  return cur;
}

Table simple(const char* name, const char* title, const json& rows,
             std::vector<std::pair<const char*, const char*>> cols) {
  Table t{name, title, {}, {}};
  for (const auto& [key, head] : cols) t.header.push_back(head);
  for (const json& r : rows) {
    std::vector<std::string> out;
    for (const auto& [key, head] : cols) out.push_back(field(r, key));
    t.rows.push_back(std::move(out));
  }
  return t;
}

void traffic_tables(const json& traffic, std::vector<Table>& out) {
  out.push_back(simple("contacted_domains", "Contacted domains", traffic["domains"],
                       {{"party", "party"},
                        {"org_name", "organization"},
                        {"label", "domain"},
                        {"purpose", "purpose"},
                        {"hostnames", "hostnames"},
                        {"skills", "skills"},
                        {"flows", "flows"}}));
  Table dist = simple("traffic_distribution", "Traffic by party and purpose (%)", traffic["matrix"],
                      {{"party", "party"},
                       {"functional_pct", "functional"},
                       {"advertising_tracking_pct", "advertising_tracking"},
                       {"total_pct", "total"}});
  const json& total = traffic["total"];
  dist.rows.push_back({"total", field(total, "functional_pct"), field(total, "advertising_tracking_pct"),
                       traffic["attributed_total"] == 0 ? "0.00" : "100.00"});
  out.push_back(std::move(dist));
  out.push_back(simple("persona_third_party", "Third-party hostnames per persona", traffic["personas"],
                       {{"persona", "persona"},
                        {"advertising_tracking", "advertising_tracking"},
                        {"functional", "functional"}}));
  out.push_back(simple("skill_ats_domains", "Advertising and tracking domains per skill", traffic["skills"],
                       {{"skill_id", "skill"}, {"count", "count"}, {"aggregated", "domains"}}));
}

void sync_tables(const json& syncs, std::vector<Table>& out) {
  Table t{"sync_partners", "Cookie-sync partners of " + cell(syncs["focus_org"]), {"relation", "organization"}, {}};
  for (const json& o : syncs["direct_partners"]) t.rows.push_back({"direct", cell(o)});
  for (const json& o : syncs["second_hop"]) t.rows.push_back({"second_hop", cell(o)});
  out.push_back(std::move(t));
}

void bid_tables(const json& bids, std::vector<Table>& out) {
  out.push_back(simple("bids_median_mean", "Bid values (CPM)", bids["aggregates"],
                       {{"persona", "persona"}, {"kind", "kind"}, {"n", "n"},
                        {"median_cpm", "median"}, {"mean_cpm", "mean"}}));
  out.push_back(simple("bids_significance", "Treatment vs control (Mann-Whitney U, one-sided)",
                       bids["comparison"],
                       {{"treatment", "treatment"},
                        {"control", "control"},
                        {"u_statistic", "U"},
                        {"p_value", "p"},
                        {"effect_size_r", "r"},
                        {"size_label", "effect"},
                        {"method", "method"},
                        {"significant", "significant"}}));
  if (const json* split = find_path(bids, {"partner_split", "rows"})) {
    Table t{"bids_partner_split", "Partner vs non-partner bids (CPM)",
            {"persona", "partner_n", "partner_median", "partner_mean", "non_partner_n",
             "non_partner_median", "non_partner_mean", "median_ratio"},
            {}};
    for (const json& r : *split) {
      t.rows.push_back({field(r, "persona"), field(r["partner"], "n"), field(r["partner"], "median_cpm"),
                        field(r["partner"], "mean_cpm"), field(r["non_partner"], "n"),
                        field(r["non_partner"], "median_cpm"), field(r["non_partner"], "mean_cpm"),
                        field(r, "median_ratio")});
    }
    out.push_back(std::move(t));
  }
  if (const json* cells = find_path(bids, {"cross_group", "cells"})) {
    out.push_back(simple("bids_cross_group", "Interest personas vs web personas", *cells,
                         {{"a", "a"},
                          {"b", "b"},
                          {"p_two_sided", "p_two_sided"},
                          {"p_value", "p_a_greater"},
                          {"effect_size_r", "r"},
                          {"significant_two_sided", "significant"}}));
  }
}

void policy_tables(const json& policy, std::vector<Table>& out) {
  Table t = simple("policy_disclosures", "Disclosure verdicts per skill", json::array(),
                   {{"skill_id", "skill"}, {"clear", "clear"}, {"vague", "vague"},
                    {"omitted", "omitted"}, {"no_policy", "no_policy"}});
  for (const json& s : policy["skills"]) {
    const json& c = s["summary"];
    t.rows.push_back({field(s, "skill_id"), field(c, "clear"), field(c, "vague"), field(c, "omitted"),
                      field(c, "no_policy")});
  }
  const json& c = policy["summary"];
  t.rows.push_back({"total", field(c, "clear"), field(c, "vague"), field(c, "omitted"), field(c, "no_policy")});
  if (const json* w = find_path(policy, {"summary_with_platform"})) {
    t.rows.push_back({"total_with_platform_policy", field(*w, "clear"), field(*w, "vague"),
                      field(*w, "omitted"), field(*w, "no_policy")});
  }
  out.push_back(std::move(t));
  if (!policy["data_types"].empty()) {
    out.push_back(simple("policy_data_types", "Disclosure verdicts per data type", policy["data_types"],
                         {{"data_type", "data_type"}, {"clear", "clear"}, {"vague", "vague"},
                          {"omitted", "omitted"}, {"no_policy", "no_policy"}}));
  }
  if (const json* v = find_path(policy, {"validation"})) {
    Table m{"validation_metrics", "Disclosure classifier validation", {"metric", "value"}, {}};
    for (const char* k : {"n", "micro_precision", "micro_recall", "micro_f1", "macro_precision",
                          "macro_recall", "macro_f1", "macro_f1_class_mean"}) {
      m.rows.push_back({k, field(*v, k)});
    }
    for (const json& pc : (*v)["per_class"]) {
      for (const char* k : {"precision", "recall", "f1"}) {
        m.rows.push_back({cell(pc["class"]) + "_" + k, field(pc, k)});
      }
    }
    out.push_back(std::move(m));
  }
}

void interest_tables(const json& interests, std::vector<Table>& out) {
  Table t{"interests", "Inferred interests over time", {"persona", "request", "status", "interests", "added", "removed"}, {}};
  for (const json& tl : interests) {
    for (const json& s : tl["steps"]) {
      t.rows.push_back({field(tl, "persona"), field(s, "request_label"),
                        s["baseline"].get<bool>() ? "baseline" : field(s, "status"),
                        field(s, "interests"), field(s, "added"), field(s, "removed")});
    }
  }
  out.push_back(std::move(t));
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream f(path, std::ios::binary | std::ios::trunc);
  if (!f) throw InputError("cannot write '" + path.string() + "'");
  f << content;
  if (!f) throw InputError("write to '" + path.string() + "' failed");
}

}  // namespace

std::string canonical_json(const json& report) {
  std::string out;
  dump(report, {}, out);
  out += '\n';
  return out;
}

std::vector<Table> report_tables(const json& report) {
  std::vector<Table> out;
  if (const json* t = find_path(report, {"traffic"})) traffic_tables(*t, out);
  if (const json* s = find_path(report, {"syncs"})) sync_tables(*s, out);
  if (const json* b = find_path(report, {"bids"})) bid_tables(*b, out);
  if (const json* p = find_path(report, {"policy"})) policy_tables(*p, out);
  if (const json* i = find_path(report, {"interests"})) interest_tables(*i, out);
  return out;
}

std::string render_csv(const Table& table) {
  auto quote = [](const std::string& s) {
    if (s.find_first_of(",\"\r\n") == std::string::npos) return s;
    std::string q = "\"";
    for (char c : s) {
      if (c == '"') q += '"';
      q += c;
    }
    return q + '"';
  };
  std::string out;
  auto line = [&](const std::vector<std::string>& cells) {
    for (std::size_t i = 0; i < cells.size(); ++i) {
      if (i) out += ',';
      out += quote(cells[i]);
    }
    out += "\r\n";
  };
  line(table.header);
  for (const auto& r : table.rows) line(r);
  return out;
}

std::string render_text(const Table& table) {
  std::vector<std::size_t> width(table.header.size(), 0);
  auto measure = [&](const std::vector<std::string>& r) {
    for (std::size_t i = 0; i < r.size() && i < width.size(); ++i) width[i] = std::max(width[i], r[i].size());
  };
  measure(table.header);
  for (const auto& r : table.rows) measure(r);
  std::string out = table.title + "\n";
  auto line = [&](const std::vector<std::string>& r) {
    std::string l;
    for (std::size_t i = 0; i < r.size(); ++i) {
      if (i) l += "  ";
      l += r[i];
      if (i + 1 < r.size()) l.append(width[i] - r[i].size(), ' ');
    }
    out += l + "\n";
  };
  line(table.header);
  std::size_t total = 0;
  for (std::size_t w : width) total += w;
  out += std::string(total + 2 * (width.empty() ? 0 : width.size() - 1), '-') + "\n";
  for (const auto& r : table.rows) line(r);
  return out;
}

ReportFormat parse_report_format(std::string_view s) {
  if (s == "json") return ReportFormat::kJson;
  if (s == "csv_bundle" || s == "csv") return ReportFormat::kCsvBundle;
  if (s == "text") return ReportFormat::kText;
  throw InputError("unknown report format '" + std::string(s) + "' (json, csv_bundle, text)");
}

std::string render(const json& report, ReportFormat format) {
  if (format == ReportFormat::kJson) return canonical_json(report);
  std::string out;
  const auto tables = report_tables(report);
  for (std::size_t i = 0; i < tables.size(); ++i) {
    if (i) out += "\n";
    out += format == ReportFormat::kText ? render_text(tables[i]) : "# " + tables[i].name + "\n" + render_csv(tables[i]);
  }
  if (const json* w = find_path(report, {"warnings"}); w && !w->empty() && format == ReportFormat::kText) {
    out += "\nWarnings\n";
    for (const json& m : *w) out += "  " + m.get<std::string>() + "\n";
  }
  return out;
}

std::vector<fs::path> emit(const json& report, ReportFormat format, const fs::path& out) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec || !fs::is_directory(out)) throw InputError("cannot create output directory '" + out.string() + "'");
  std::vector<fs::path> written;
  switch (format) {
    case ReportFormat::kJson:
      written.push_back(out / "report.json");
      write_file(written.back(), canonical_json(report));
      break;
    case ReportFormat::kText:
      written.push_back(out / "report.txt");
      write_file(written.back(), render(report, format));
      break;
    case ReportFormat::kCsvBundle:
      for (const Table& t : report_tables(report)) {
        written.push_back(out / (t.name + ".csv"));
        write_file(written.back(), render_csv(t));
      }
      break;
  }
  return written;
}

}  // namespace echoaudit
