#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace echoaudit {

// Absolute URL split into its components. Host is lowercased; everything
// else is kept verbatim (no percent-decoding).
struct Url {
  std::string scheme;
  std::string host;
  std::optional<int> port;
  std::string path;
  std::string query;
  std::string fragment;
};

// Returns nullopt unless `text` is scheme://host[:port][/path][?query][#frag]
// with a syntactically valid host.
std::optional<Url> parse_url(std::string_view text);

// name=value pairs of a query string, in order. Pairs without '=' get an
// empty value.
std::vector<std::pair<std::string, std::string>> query_params(std::string_view query);

// Non-empty '/'-separated path segments.
std::vector<std::string> path_segments(std::string_view path);

}  // namespace echoaudit
