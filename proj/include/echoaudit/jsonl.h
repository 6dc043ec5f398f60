#pragma once

// Line-oriented JSON reading shared by the trace and bid loaders.

#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "echoaudit/error.h"
#include "json.hpp"

namespace echoaudit {

std::string read_file(const std::filesystem::path& path);

// Fraction of malformed non-blank lines above which a JSONL file is rejected.
inline constexpr double kMaxMalformedFraction = 0.10;

template <typename T>
struct JsonlRecords {
  std::vector<T> records;
  std::vector<std::size_t> record_lines;  // 1-based source line per record
  std::vector<std::pair<std::size_t, std::string>> malformed;  // (line, reason)
  std::size_t total_lines = 0;
};

[[noreturn]] void throw_too_malformed(std::string_view source, std::size_t total,
                                      const std::vector<std::pair<std::size_t, std::string>>& bad);

// Decodes each non-blank line with `decode(const json&) -> T`; decode
// signals a bad record by throwing InputError.
template <typename T, typename Decode>
JsonlRecords<T> read_jsonl(std::string_view text, std::string_view source, Decode&& decode) {
  JsonlRecords<T> out;
  std::size_t line_no = 0;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    std::string_view line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
    if (line.find_first_not_of(" \t") == std::string_view::npos) {
      if (end == text.size()) break;
      continue;
    }
    ++out.total_lines;
    try {
      out.records.push_back(decode(nlohmann::json::parse(line)));
      out.record_lines.push_back(line_no);
    } catch (const nlohmann::json::exception& e) {
      out.malformed.emplace_back(line_no, e.what());
    } catch (const InputError& e) {
      out.malformed.emplace_back(line_no, e.what());
    }
    if (end == text.size()) break;
  }
  if (out.total_lines > 0 &&
      static_cast<double>(out.malformed.size()) >
          kMaxMalformedFraction * static_cast<double>(out.total_lines)) {
    throw_too_malformed(source, out.total_lines, out.malformed);
  }
  return out;
}

}  // namespace echoaudit
