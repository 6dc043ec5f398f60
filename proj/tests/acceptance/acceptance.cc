// Acceptance checks. Usage: acceptance <demo_dir> <echoaudit_binary>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "echoaudit/endpoint.h"
#include "echoaudit/jsonl.h"
#include "echoaudit/metrics.h"
#include "echoaudit/pipeline.h"
#include "echoaudit/stats.h"
#include "echoaudit/sync.h"

using namespace echoaudit;
namespace fs = std::filesystem;
using json = nlohmann::json;

namespace {

struct Check {
  std::vector<std::string> failures;
  void expect(bool ok, const std::string& what) {
    if (!ok) failures.push_back(what);
  }
};

fs::path g_demo;
std::string g_cli;

const json& demo_report() {
  static const json r = run_pipeline(AuditConfig::load(g_demo / "config.json"));
  return r;
}

const json* find_verdict(const json& report, const std::string& skill, const std::string& entity,
                         const json& data_type) {
  for (const json& s : report["policy"]["skills"]) {
    if (s["skill_id"] != skill) continue;
    for (const json& v : s["verdicts"]) {
      if (v["entity"] == entity && v["data_type"] == data_type) return &v;
    }
  }
  return nullptr;
}

// 1
void policy_examples(Check& c) {
  const json& r = demo_report();
  struct Case {
    std::string skill, entity;
    json data_type;
    std::string want;
  };
  const std::vector<Case> cases = {{"sonos", "Amazon", "voice_recording", "clear"},
                                   {"harmony", "Amazon", nullptr, "vague"},
                                   {"charles_stanley_radio", "Triton Digital", nullptr, "vague"},
                                   {"dating_tips", "Amazon", nullptr, "no_policy"}};
  for (const Case& k : cases) {
    const json* v = find_verdict(r, k.skill, k.entity, k.data_type);
    const std::string got = v ? (*v)["verdict"].get<std::string>() : "<absent>";
    c.expect(got == k.want, k.skill + "/" + k.entity + ": " + got + " != " + k.want);
  }
}

double u_of(const std::vector<double>& t, const std::vector<double>& c) {
  double u = 0;
  for (double x : t) {
    for (double y : c) u += x > y ? 1.0 : (x == y ? 0.5 : 0.0);
  }
  return u;
}

double enumerate_upper(std::size_t n1, std::size_t n2, double u_obs) {
  std::vector<int> pick(n1 + n2, 0);
  std::fill(pick.end() - static_cast<std::ptrdiff_t>(n1), pick.end(), 1);
  std::size_t total = 0, hits = 0;
  do {
    std::vector<double> t, o;
    for (std::size_t i = 0; i < pick.size(); ++i) (pick[i] ? t : o).push_back(static_cast<double>(i));
    ++total;
    hits += u_of(t, o) >= u_obs - 1e-9;
  } while (std::next_permutation(pick.begin(), pick.end()));
  return static_cast<double>(hits) / static_cast<double>(total);
}

std::vector<double> distinct(std::mt19937& rng, std::size_t n, std::set<double>& used) {
  std::uniform_real_distribution<double> d(0, 1);
  std::vector<double> out;
  while (out.size() < n) {
    const double v = d(rng);
    if (used.insert(v).second) out.push_back(v);
  }
  return out;
}

// 2
void statistics(Check& c) {
  const auto start = std::chrono::steady_clock::now();
  std::mt19937 rng(42);
  for (std::size_t n1 = 1; n1 <= 6; ++n1) {
    for (std::size_t n2 = 1; n2 <= 6; ++n2) {
      std::set<double> used;
      auto t = distinct(rng, n1, used);
      auto o = distinct(rng, n2, used);
      const StatResult r = mann_whitney_one_sided(t, o);
      const double want = enumerate_upper(n1, n2, u_of(t, o));
      c.expect(r.method == StatMethod::kExact && std::fabs(r.p_value - want) < 1e-12,
               "exact p mismatch at " + std::to_string(n1) + "x" + std::to_string(n2));
    }
  }
  double worst = 0;
  for (int rep = 0; rep < 1000; ++rep) {
    std::set<double> used;
    auto t = distinct(rng, 20, used);
    auto o = distinct(rng, 20, used);
    const double u = u_of(t, o);
    worst = std::max(worst, std::fabs(exact_upper_tail(20, 20, u) - normal_upper_tail(20, 20, u)));
  }
  c.expect(worst <= 0.01, "normal vs exact max |dp| = " + std::to_string(worst));
  std::uniform_int_distribution<int> v(0, 20), len(1, 30);
  for (int rep = 0; rep < 500; ++rep) {
    std::vector<double> a(static_cast<std::size_t>(len(rng))), b(static_cast<std::size_t>(len(rng)));
    for (double& x : a) x = v(rng);
    for (double& x : b) x = v(rng);
    const StatResult ab = mann_whitney_one_sided(a, b);
    const StatResult ba = mann_whitney_one_sided(b, a);
    c.expect(ab.effect_size_r >= -1 && ab.effect_size_r <= 1, "r out of range");
    c.expect(std::fabs(ab.effect_size_r + ba.effect_size_r) < 1e-12, "r does not flip sign");
  }
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  c.expect(secs < 10, "statistics took " + std::to_string(secs) + " s");
}

// 3
void effect_sizes(Check& c) {
  const std::vector<std::pair<double, SizeLabel>> cases = {
      {0.1099, SizeLabel::kNegligible}, {0.11, SizeLabel::kSmall},   {0.2799, SizeLabel::kSmall},
      {0.28, SizeLabel::kMedium},       {0.4299, SizeLabel::kMedium}, {0.43, SizeLabel::kLarge}};
  for (const auto& [r, want] : cases) {
    c.expect(effect_size_label(r) == want, std::to_string(r) + " -> " + to_string(effect_size_label(r)));
  }
}

// 4
void demo_dataset(Check& c) {
  const json& r = demo_report();
  double platform_functional = -1;
  for (const json& row : r["traffic"]["matrix"]) {
    if (row["party"] == "platform") platform_functional = row["functional_pct"].get<double>();
  }
  const double ats = r["traffic"]["total"]["advertising_tracking_pct"].get<double>();
  c.expect(std::fabs(platform_functional - 88.93) < 0.005, "platform functional " + std::to_string(platform_functional));
  c.expect(std::fabs(ats - 9.4) < 0.005, "total ATS " + std::to_string(ats));

  bool vanilla = false;
  for (const json& a : r["bids"]["aggregates"]) {
    if (a["persona"] != "Vanilla") continue;
    vanilla = std::fabs(a["median_cpm"].get<double>() - 0.030) < 0.0005 &&
              std::fabs(a["mean_cpm"].get<double>() - 0.153) < 0.0005;
  }
  c.expect(vanilla, "vanilla median/mean");

  std::size_t treatments = 0, hits = 0;
  for (const json& row : r["bids"]["comparison"]) {
    ++treatments;
    const double p = row["p_value"].get<double>();
    const double ar = std::fabs(row["effect_size_r"].get<double>());
    hits += p < 0.05 && ar >= 0.28 && ar < 0.43;
  }
  c.expect(treatments == 9 && hits == 6,
           std::to_string(hits) + " of " + std::to_string(treatments) + " treatments significant with medium r");
}

FlowRecord request(std::int64_t ts, const std::string& url, std::vector<HeaderField> cookies = {}) {
  FlowRecord f;
  f.session_id = "crawl";
  f.persona = {"Vanilla", PersonaKind::kVanilla};
  f.phase = Phase::kCrawl;
  f.timestamp_ms = ts;
  f.dst_ip = "10.9.0.1";
  f.dst_port = 443;
  f.protocol = Protocol::kHttp;
  f.byte_count = 100;
  HttpEvent h;
  h.url = url;
  h.set_cookies = std::move(cookies);
  f.http = std::move(h);
  return f;
}

std::string random_id(std::mt19937& rng) {
  static const std::string alnum = "abcdefghijklmnopqrstuvwxyzABCDEFGHIJKLMNOPQRSTUVWXYZ0123456789";
  std::string s = "Q7";
  for (int i = 0; i < 14; ++i) s += alnum[rng() % alnum.size()];
  return s;
}

// 5
void sync_detection(Check& c) {
  std::mt19937 rng(5);
  const OrgOntology orgs = OrgOntology::from_json(json::array());
  const FilterMatcher rules;
  const PurposeOverrides overrides;
  const EndpointClassifier classifier(orgs, rules, overrides, {}, "focus.com");

  std::vector<FlowRecord> flows;
  std::int64_t t = 0;
  std::set<std::tuple<std::string, std::string, std::string>> planted;
  for (int i = 0; i < 25; ++i) {
    const std::string id = random_id(rng);
    const std::string from = "org" + std::to_string(i) + "-src.com";
    const std::string to = "org" + std::to_string(i) + "-dst.com";
    flows.push_back(request(++t, "https://px." + from + "/set", {{"uid", id}}));
    flows.push_back(request(++t, "https://sync." + to + "/m?partner_uid=" + id));
    planted.insert({id, from, to});
  }
  for (int i = 0; i < 50; ++i) {
    const std::string id = random_id(rng);
    const std::string org = "decoy" + std::to_string(i) + ".com";
    flows.push_back(request(++t, "https://a." + org + "/set", {{"uid", id}}));
    flows.push_back(request(++t, "https://b." + org + "/m?uid=" + id));
  }
  const std::vector<std::string> noise = {"300x250", "en-US", "homepage", "1650000000", "1650000000123",
                                          "42", "0.5", "https://x.example/a", "www.site.com", "banner_top"};
  for (int i = 0; i < 200; ++i) {
    flows.push_back(request(++t, "https://n" + std::to_string(i % 7) + ".noise.com/p?k=" + noise[rng() % noise.size()]));
  }

  auto sessions = segment_sessions(flows);
  auto obs = collect_http_observations(sessions, classifier);
  auto events = detect_syncs(extract_identifiers(obs), obs);
  std::set<std::tuple<std::string, std::string, std::string>> found;
  for (const SyncEvent& e : events) found.insert({e.token.value, e.sender_org, e.receiver_org});
  std::size_t tp = 0;
  for (const auto& f : found) tp += planted.contains(f);
  c.expect(tp == found.size(), "precision " + std::to_string(tp) + "/" + std::to_string(found.size()));
  c.expect(tp == planted.size(), "recall " + std::to_string(tp) + "/" + std::to_string(planted.size()));

  std::vector<SyncEvent> graph;
  auto edge = [&](const std::string& a, const std::string& b) {
    SyncEvent e;
    e.sender_org = a;
    e.receiver_org = b;
    graph.push_back(e);
  };
  for (int d = 0; d < 7; ++d) edge(d % 2 ? "F" : "D" + std::to_string(d), d % 2 ? "D" + std::to_string(d) : "F");
  for (int h = 0; h < 19; ++h) edge("H" + std::to_string(h), "D" + std::to_string(h % 7));
  edge("H0", "X");  // X is three hops out
  const PartnerSets ps = partner_sets(graph, "F");
  c.expect(ps.direct_partners.size() == 7 && ps.second_hop.size() == 19,
           "partner sets " + std::to_string(ps.direct_partners.size()) + "/" + std::to_string(ps.second_hop.size()));
}

// 6
void filter_matching(Check& c) {
  std::mt19937 rng(6);
  const std::vector<std::string> labels = {"ad", "ads", "trac", "podtrac", "x", "cdn", "metrics", "a2z"};
  const std::vector<std::string> tlds = {"com", "net", "org"};
  auto name = [&](std::size_t n) {
    std::string s;
    for (std::size_t i = 0; i < n; ++i) s += (i ? "." : "") + labels[rng() % labels.size()];
    return s;
  };
  std::size_t violations = 0;
  for (int i = 0; i < 10000; ++i) {
    const std::string pattern = name(1 + rng() % 2) + "." + tlds[rng() % tlds.size()];
    std::string host;
    switch (rng() % 4) {
      case 0: host = pattern; break;
      case 1: host = name(1 + rng() % 3) + "." + pattern; break;
      case 2: host = labels[rng() % labels.size()] + pattern; break;  // shares a suffix, not a label
      default: host = name(1 + rng() % 3) + "." + tlds[rng() % tlds.size()];
    }
    const RuleScope scope = rng() % 2 ? RuleScope::kExactHost : RuleScope::kDomainAndSubdomains;
    const bool aligned = host == pattern || (scope == RuleScope::kDomainAndSubdomains &&
                                              host.size() > pattern.size() &&
                                              host.ends_with("." + pattern));
    FilterRuleSet set;
    set.rules.push_back({pattern, scope});
    const FilterMatcher m({set});
    violations += m.matches(host) != aligned;
  }
  c.expect(violations == 0, std::to_string(violations) + " label-alignment violations");
}

// 7
void metrics(Check& c) {
  std::mt19937 rng(7);
  for (int rep = 0; rep < 100; ++rep) {
    ConfusionMatrix m{};
    for (auto& row : m) {
      for (auto& cell : row) cell = rng() % 9;
    }
    const ValidationMetrics v = metrics_from_confusion(m);
    c.expect(v.micro_precision == v.micro_recall, "micro P != micro R");
  }
  ConfusionMatrix m{};
  m[0] = {5, 1, 0, 0};
  m[1] = {2, 6, 2, 0};
  m[2] = {0, 1, 3, 0};
  m[3] = {0, 0, 0, 4};
  const ValidationMetrics v = metrics_from_confusion(m);
  // P = (5/7 + 6/8 + 3/5 + 1) / 4; R = (5/6 + 6/10 + 3/4 + 1) / 4; F1 = 2PR / (P + R)
  auto at4 = [](double x) { return std::round(x * 1e4) / 1e4; };
  c.expect(at4(v.macro_precision) == 0.7661, "macro P " + std::to_string(v.macro_precision));
  c.expect(at4(v.macro_recall) == 0.7958, "macro R " + std::to_string(v.macro_recall));
  c.expect(at4(v.macro_f1) == 0.7807, "macro F1 " + std::to_string(v.macro_f1));
}

void write_synthetic_trace(const fs::path& path, std::size_t n) {
  std::mt19937 rng(8);
  const std::vector<std::string> hosts = {"api.amazonalexa.com", "avs-alexa-4-na.amazon.com",
                                          "device-metrics-us-2.amazon.com", "dts.podtrac.com",
                                          "static.garmincdn.com", "cdn.stylefeed.io", "chtbl.com",
                                          "traffic.omny.fm", "1432239411.rsc.cdn77.org"};
  const std::vector<std::string> skills = {"sonos", "garmin", "harmony", "youversion", "style_daily"};
  std::ofstream out(path, std::ios::binary);
  std::int64_t t = 1650000000000;
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t s = (i / 500) % skills.size();
    FlowRecord f;
    f.session_id = "syn-" + std::to_string(i / 500);
    f.persona = {"Persona " + std::to_string(s), PersonaKind::kInterest};
    f.skill_id = skills[s];
    f.phase = Phase::kInteract;
    f.timestamp_ms = t;
    t += 1 + static_cast<std::int64_t>(rng() % 40);
    const std::string& host = hosts[rng() % hosts.size()];
    f.dst_ip = "10." + std::to_string(1 + s) + "." + std::to_string(rng() % 200) + "." + std::to_string(1 + rng() % 250);
    f.dst_port = 443;
    f.byte_count = 100 + rng() % 9000;
    switch (rng() % 5) {
      case 0:
        f.protocol = Protocol::kDns;
        f.dst_port = 53;
        f.dns_query = DnsQuery{host, {f.dst_ip}};
        f.dst_ip = "10.0.0.53";
        break;
      case 1:
        f.protocol = Protocol::kTls;
        break;
      case 2: {
        f.protocol = Protocol::kHttp;
        HttpEvent h;
        h.url = "https://" + host + "/e?sid=" + std::to_string(rng() % 100000) + "u" + std::to_string(i % 97);
        f.http = h;
        break;
      }
      default:
        f.protocol = Protocol::kTls;
        f.sni = host;
    }
    out << flow_to_json(f).dump() << '\n';
  }
}

// 8
void audit_determinism(Check& c) {
  const fs::path dir = fs::temp_directory_path() / "echoaudit_acceptance_100k";
  fs::remove_all(dir);
  fs::copy(g_demo, dir, fs::copy_options::recursive);
  write_synthetic_trace(dir / "traces" / "synthetic.jsonl", 100000);
  json cfg = json::parse(read_file(dir / "config.json"));
  cfg["paths"]["traces"] = json::array({"traces/synthetic.jsonl", "traces/crawl.jsonl"});
  cfg["paths"].erase("gold_labels");
  std::ofstream(dir / "config.json") << cfg.dump(2);

  std::vector<std::string> outputs;
  for (int run = 0; run < 2; ++run) {
    const fs::path out = dir / ("out" + std::to_string(run));
    const std::string cmd = "\"" + g_cli + "\" audit -c \"" + (dir / "config.json").string() + "\" -f json -o \"" +
                            out.string() + "\" > /dev/null 2>&1";
    const auto start = std::chrono::steady_clock::now();
    const int rc = std::system(cmd.c_str());
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    std::cout << "  run " << run + 1 << ": " << secs << " s, exit " << rc << "\n";
    c.expect(rc == 0, "audit exit status " + std::to_string(rc));
    c.expect(secs < 10, "audit took " + std::to_string(secs) + " s");
    if (rc == 0) outputs.push_back(read_file(out / "report.json"));
  }
  c.expect(outputs.size() == 2 && outputs[0] == outputs[1], "reports differ");
  if (c.failures.empty()) fs::remove_all(dir);
}

}  // namespace

int main(int argc, char** argv) {
  if (argc != 3) {
    std::cerr << "usage: acceptance <demo_dir> <echoaudit_binary>\n";
    return 2;
  }
  g_demo = argv[1];
  g_cli = argv[2];

  const std::vector<std::pair<std::string, std::function<void(Check&)>>> criteria = {
      {"1 policy disclosure examples", policy_examples},
      {"2 Mann-Whitney exactness, approximation and effect size", statistics},
      {"3 effect-size boundaries", effect_sizes},
      {"4 demo dataset headline numbers", demo_dataset},
      {"5 planted cookie-sync chains", sync_detection},
      {"6 filter rule label alignment", filter_matching},
      {"7 validation metrics", metrics},
      {"8 audit on 100k flows: time and determinism", audit_determinism},
  };
  int failed = 0;
  for (const auto& [name, fn] : criteria) {
    Check c;
    try {
      fn(c);
    } catch (const std::exception& e) {
      c.failures.push_back(std::string("exception: ") + e.what());
    }
    std::cout << (c.failures.empty() ? "PASS" : "FAIL") << "  criterion " << name << "\n";
    for (const auto& f : c.failures) std::cout << "      " << f << "\n";
    failed += !c.failures.empty();
  }
  std::cout << (8 - failed) << "/8 criteria passed\n";
  return failed == 0 ? 0 : 1;
}
