#pragma once

#include <string>
#include <string_view>
#include <vector>

namespace echoaudit {

std::string to_lower(std::string_view s);
std::string_view trim(std::string_view s);
std::vector<std::string> split(std::string_view s, char sep);
bool ends_with_label(std::string_view host, std::string_view suffix);
bool is_valid_hostname(std::string_view host);
bool is_ip_address(std::string_view s);
std::string join(const std::vector<std::string>& parts, std::string_view sep);

// Fixed-point rendering; never emits "-0.000".
std::string format_fixed(double value, int decimals);

}  // namespace echoaudit
