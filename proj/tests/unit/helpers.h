#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "echoaudit/endpoint.h"
#include "echoaudit/trace.h"

namespace testutil {

inline std::filesystem::path fixture(const std::string& rel) {
  return std::filesystem::path(FIXTURES_DIR) / rel;
}

inline echoaudit::FlowRecord tls(std::string session, std::int64_t ts, std::string ip,
                                 std::optional<std::string> sni = std::nullopt,
                                 std::optional<std::string> skill = "s") {
  echoaudit::FlowRecord f;
  f.session_id = std::move(session);
  f.persona = {"P", echoaudit::PersonaKind::kInterest};
  f.skill_id = std::move(skill);
  f.timestamp_ms = ts;
  f.dst_ip = std::move(ip);
  f.dst_port = 443;
  f.protocol = echoaudit::Protocol::kTls;
  f.sni = std::move(sni);
  f.byte_count = 100;
  return f;
}

inline echoaudit::FlowRecord dns(std::string session, std::int64_t ts, std::string qname,
                                 std::vector<std::string> answers,
                                 std::optional<std::string> skill = "s") {
  echoaudit::FlowRecord f = tls(std::move(session), ts, "10.0.0.53", std::nullopt, std::move(skill));
  f.protocol = echoaudit::Protocol::kDns;
  f.dst_port = 53;
  f.dns_query = echoaudit::DnsQuery{std::move(qname), std::move(answers)};
  return f;
}

inline echoaudit::FlowRecord http(std::string session, std::int64_t ts, std::string url,
                                  std::vector<echoaudit::HeaderField> set_cookies = {}) {
  echoaudit::FlowRecord f = tls(std::move(session), ts, "10.1.0.1", std::nullopt, std::nullopt);
  f.phase = echoaudit::Phase::kCrawl;
  f.persona = {"Vanilla", echoaudit::PersonaKind::kVanilla};
  f.protocol = echoaudit::Protocol::kHttp;
  echoaudit::HttpEvent h;
  h.url = std::move(url);
  h.set_cookies = std::move(set_cookies);
  f.http = std::move(h);
  return f;
}

inline echoaudit::OrgOntology ontology(const std::string& json_text) {
  return echoaudit::OrgOntology::from_json(nlohmann::json::parse(json_text));
}

}  // namespace testutil
