#include "echoaudit/jsonl.h"

#include <fstream>
#include <sstream>

namespace echoaudit {

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  if (in.bad()) throw InputError("error while reading " + path.string());
  return ss.str();
}

void throw_too_malformed(std::string_view source, std::size_t total,
                         const std::vector<std::pair<std::size_t, std::string>>& bad) {
  std::string msg = std::string(source) + ": " + std::to_string(bad.size()) + " of " +
                    std::to_string(total) + " lines malformed; lines:";
  constexpr std::size_t kMaxListed = 50;
  for (std::size_t i = 0; i < bad.size() && i < kMaxListed; ++i) {
    msg += " " + std::to_string(bad[i].first);
  }
  if (bad.size() > kMaxListed) msg += " ...";
  msg += " (first: " + bad.front().second + ")";
  throw InputError(msg);
}

}  // namespace echoaudit
