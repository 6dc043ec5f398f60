#pragma once

// Canonical JSON and table rendering of an audit report.

#include <filesystem>
#include <string>
#include <vector>

#include "json.hpp"

namespace echoaudit {

// Sorted keys, no insignificant whitespace, one trailing newline. Floats use
// fixed decimals: 2 for keys ending in "_pct", 4 for keys starting with
// "p_", 3 otherwise. Negative zero is printed as zero.
std::string canonical_json(const nlohmann::json& report);

struct Table {
  std::string name;   // file stem in csv bundles
  std::string title;
  std::vector<std::string> header;
  std::vector<std::vector<std::string>> rows;
};

// Tables for the sections present in the report, in a fixed order. Cells
// are copied from the report, never recomputed.
std::vector<Table> report_tables(const nlohmann::json& report);

std::string render_csv(const Table& table);
std::string render_text(const Table& table);

enum class ReportFormat { kJson, kCsvBundle, kText };
ReportFormat parse_report_format(std::string_view s);

// json: <out>/report.json; csv_bundle: <out>/<table>.csv; text:
// <out>/report.txt. Returns the files written. Throws InputError if `out`
// cannot be created or written.
std::vector<std::filesystem::path> emit(const nlohmann::json& report, ReportFormat format,
                                        const std::filesystem::path& out);

// The text or json rendering as a string (for stdout).
std::string render(const nlohmann::json& report, ReportFormat format);

}  // namespace echoaudit
