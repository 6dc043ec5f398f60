// make_demo: writes the deterministic demo dataset used by the README and
// the acceptance suite.
//
//   make_demo [out_dir]      (default: data/demo under the source tree)

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "echoaudit/bids.h"
#include "echoaudit/trace.h"
#include "json.hpp"

using namespace echoaudit;
using nlohmann::json;
namespace fs = std::filesystem;

namespace {

constexpr std::int64_t kEpoch = 1'650'000'000'000;

void write_text(const fs::path& p, const std::string& s) {
  fs::create_directories(p.parent_path());
  std::ofstream f(p, std::ios::binary | std::ios::trunc);
  f << s;
  if (!f) throw std::runtime_error("cannot write " + p.string());
}

void write_json(const fs::path& p, const json& j) { write_text(p, j.dump(2) + "\n"); }

// ---------------------------------------------------------------------------
// Organizations

struct Org {
  const char* name;
  std::vector<const char*> domains;
  std::vector<const char*> categories;
  std::vector<const char*> aliases;
};

const std::vector<Org>& orgs() {
  static const std::vector<Org> list = {
      {"Amazon",
       {"amazon.com", "amazonalexa.com", "amazon-adsystem.com", "fireoscaptiveportal.com", "media-amazon.com"},
       {"platform_provider", "voice_assistant_service", "advertising_network", "analytic_provider"},
       {"Amazon.com", "Alexa", "Amazon Alexa"}},
      {"Sonos", {"sonos.com"}, {"content_provider"}, {"Sonos Inc"}},
      {"Logitech Harmony", {"myharmony.com"}, {"content_provider"}, {"Harmony"}},
      {"Garmin", {"garmin.com", "garmincdn.com"}, {"content_provider"}, {}},
      {"YouVersion", {"youversionapi.com", "youversion.com"}, {"content_provider"}, {"Life.Church"}},
      {"Chartable", {"chtbl.com"}, {"analytic_provider"}, {}},
      {"Podtrac", {"podtrac.com"}, {"analytic_provider"}, {}},
      {"Megaphone", {"megaphone.fm"}, {"advertising_network", "content_provider"}, {}},
      {"Libsyn", {"libsyn.com"}, {"content_provider", "analytic_provider"}, {"Liberated Syndication"}},
      {"Omny Studio", {"omny.fm"}, {"content_provider", "analytic_provider"}, {"Omny"}},
      {"Triton Digital", {"tritondigital.com", "streamtheworld.com"}, {"advertising_network", "analytic_provider"}, {"Triton"}},
      {"CDN77", {"cdn77.org"}, {"content_provider"}, {}},
      {"PetMedia", {"petmediacdn.com"}, {"content_provider"}, {}},
      {"Audioboom", {"audioboom.com"}, {"content_provider"}, {}},
      {"Spreaker", {"spreaker.com"}, {"content_provider"}, {}},
      {"Akamai", {"akamaized.net"}, {"content_provider"}, {}},
      {"In Touch Media", {"intouch-media.org"}, {"content_provider"}, {}},
      {"Cloudinary", {"cloudinary.com"}, {"content_provider"}, {}},
      {"Bible Audio Network", {"bibleaudio-cdn.com"}, {"content_provider"}, {}},
      {"Stylefeed", {"stylefeed.io"}, {"content_provider"}, {}},
      {"Runway CDN", {"runwaycdn.net"}, {"content_provider"}, {}},
      {"RunwayFM", {"runwayfm.net"}, {"content_provider"}, {}},
      {"Datewise Media", {"datewise-media.com"}, {"content_provider"}, {}},
      {"FitCoach Data", {"fitcoach-data.com"}, {"content_provider"}, {}},
      // Header-bidding exchanges.
      {"Index Exchange", {"casalemedia.com", "indexww.com"}, {"advertising_network"}, {"ix", "indexExchange"}},
      {"Rubicon Project", {"rubiconproject.com"}, {"advertising_network"}, {"rubicon", "Magnite"}},
      {"PubMatic", {"pubmatic.com"}, {"advertising_network"}, {"pubmatic"}},
      {"OpenX", {"openx.net"}, {"advertising_network"}, {"openx"}},
      {"AppNexus", {"adnxs.com"}, {"advertising_network"}, {"appnexus", "Xandr"}},
      {"Criteo", {"criteo.com"}, {"advertising_network"}, {"criteo"}},
      {"TripleLift", {"3lift.com"}, {"advertising_network"}, {"triplelift"}},
      {"Sovrn", {"lijit.com"}, {"advertising_network"}, {"sovrn"}},
  };
  return list;
}

std::string org_of_host(const std::string& host) {
  for (const Org& o : orgs()) {
    for (const char* d : o.domains) {
      const std::string dom = d;
      if (host == dom || (host.size() > dom.size() && host.ends_with("." + dom))) return o.name;
    }
  }
  throw std::runtime_error("no org for " + host);
}

json ontology_json() {
  json arr = json::array();
  for (const Org& o : orgs()) {
    arr.push_back({{"org_name", o.name}, {"domains", o.domains}, {"categories", o.categories},
                   {"aliases", o.aliases}});
  }
  return arr;
}

// ---------------------------------------------------------------------------
// Skill traffic

struct SkillPlan {
  std::string skill_id;
  std::string persona;
  std::vector<std::string> ats;         // third-party ATS hosts, one flow each
  std::vector<std::string> functional;  // third-party functional hosts, one flow each
  std::vector<std::string> vendor;      // vendor hosts, one flow each
};

const std::vector<std::string> kPlatformHosts = {
    "avs-alexa-4-na.amazon.com", "api.amazonalexa.com",      "unagi-na.amazon.com",
    "dcape-na.amazon.com",       "msh.amazon.com",           "arcus-uswest.amazon.com",
    "todo-ta-g7g.amazon.com",    "softwareupdates.amazon.com"};
const std::vector<std::string> kPlatformAtsHosts = {"device-metrics-us-2.amazon.com",
                                                    "fireoscaptiveportal.com"};

std::vector<SkillPlan> skill_plans() {
  return {
      {"style_daily", "Fashion & Style",
       {"chtbl.com", "dts.podtrac.com", "www.podtrac.com", "traffic.megaphone.fm", "dcs.megaphone.fm"},
       {"cdn.stylefeed.io", "images.runwaycdn.net"}, {}},
      {"runway_radio", "Fashion & Style",
       {"traffic.libsyn.com", "hwcdn.libsyn.com", "traffic.omny.fm", "playerservices.streamtheworld.com"},
       {"stream.runwayfm.net", "api.stylefeed.io"}, {}},
      {"drive_news", "Connected Car",
       {"playerservices.streamtheworld.com", "18303.live.streamtheworld.com", "sc.streamtheworld.com",
        "turnernetworksales.mc.tritondigital.com", "traffic.omny.fm", "chtbl.com", "dts.podtrac.com"},
       {}, {}},
      {"garmin", "Connected Car", {}, {}, {"static.garmincdn.com"}},
      {"pet_talk", "Pets & Animals", {"traffic.megaphone.fm", "traffic.libsyn.com", "chtbl.com"},
       {"1432239411.rsc.cdn77.org", "media1.petmediacdn.com", "media2.petmediacdn.com",
        "img.petmediacdn.com", "api.petmediacdn.com", "static.petmediacdn.com", "audio.audioboom.com",
        "images.audioboom.com", "api.audioboom.com", "dts.spreaker.com", "api.spreaker.com",
        "media1.petmediacdn.com", "audio.audioboom.com"},
       {}},
      {"charles_stanley_radio", "Religion & Spirituality",
       {"turnernetworksales.mc.tritondigital.com", "playerservices.streamtheworld.com",
        "18303.live.streamtheworld.com"},
       {"sermons.akamaized.net", "music.akamaized.net", "www.intouch-media.org", "api.intouch-media.org"},
       {}},
      {"youversion", "Religion & Spirituality", {},
       {"res.cloudinary.com", "a1.bibleaudio-cdn.com", "a2.bibleaudio-cdn.com", "meta.bibleaudio-cdn.com"},
       {"nodejs.youversionapi.com", "reading-plans.youversionapi.com"}},
      {"dating_tips", "Dating",
       {"dcs.megaphone.fm", "hwcdn.libsyn.com", "www.podtrac.com", "traffic.omny.fm", "chtbl.com"},
       {"assets.datewise-media.com"}, {}},
      {"fit_coach", "Health & Fitness", {}, {"api.fitcoach-data.com"}, {}},
      {"sonos", "Smart Home", {}, {}, {}},
      {"harmony", "Smart Home", {}, {}, {}},
      {"wine_pairing", "Wine & Beverages", {}, {}, {}},
      {"trip_planner", "Navigation & Trip Planners", {}, {}, {}},
  };
}

// Platform flows in the demo: 1598 functional and 142 advertising/tracking.
constexpr int kPlatformFunctional = 1598;
constexpr int kPlatformAts = 142;

class IpPool {
 public:
  const std::string& of(const std::string& host) {
    auto it = ips_.find(host);
    if (it != ips_.end()) return it->second;
    const int n = static_cast<int>(ips_.size()) + 10;
    std::string ip = "10." + std::to_string(n / 65536 % 256) + "." + std::to_string(n / 256 % 256) + "." +
                     std::to_string(n % 256 == 0 ? 1 : n % 256);
    return ips_.emplace(host, std::move(ip)).first->second;
  }

 private:
  std::map<std::string, std::string> ips_;
};

class SessionWriter {
 public:
  SessionWriter(std::vector<FlowRecord>& out, IpPool& ips, std::string session_id, PersonaId persona,
                std::optional<std::string> skill, std::int64_t start)
      : out_(out), ips_(ips), now_(start) {
    tmpl_.session_id = std::move(session_id);
    tmpl_.persona = std::move(persona);
    tmpl_.skill_id = std::move(skill);
  }

  void set_phase(Phase p) { tmpl_.phase = p; }

  void tls(const std::string& host, bool with_sni) {
    if (!with_sni && !resolved_.contains(host)) dns(host);
    FlowRecord f = next(Protocol::kTls, host, 443);
    if (with_sni) f.sni = host;
    out_.push_back(std::move(f));
  }

  void http(const std::string& host, const std::string& url, HttpMethod method,
            std::optional<std::string> body = {}, std::vector<HeaderField> cookies = {}) {
    FlowRecord f = next(Protocol::kHttp, host, 443);
    HttpEvent ev;
    ev.method = method;
    ev.url = url;
    ev.request_headers = {{"User-Agent", "Mozilla/5.0"}};
    ev.set_cookies = std::move(cookies);
    ev.body_excerpt = std::move(body);
    f.http = std::move(ev);
    out_.push_back(std::move(f));
  }

 private:
  void dns(const std::string& host) {
    FlowRecord f = next(Protocol::kDns, "", 53);
    f.dst_ip = "10.0.0.53";
    f.dns_query = DnsQuery{host, {ips_.of(host)}};
    f.byte_count = 90;
    out_.push_back(std::move(f));
    resolved_.insert(host);
  }

  FlowRecord next(Protocol p, const std::string& host, int port) {
    FlowRecord f = tmpl_;
    f.protocol = p;
    f.timestamp_ms = now_;
    now_ += 250;
    f.dst_ip = host.empty() ? "" : ips_.of(host);
    f.dst_port = port;
    f.byte_count = 400 + static_cast<std::uint64_t>((out_.size() * 7919) % 9000);
    return f;
  }

  std::vector<FlowRecord>& out_;
  IpPool& ips_;
  FlowRecord tmpl_;
  std::int64_t now_;
  std::set<std::string> resolved_;
};

std::vector<FlowRecord> skill_traffic(IpPool& ips) {
  std::vector<FlowRecord> flows;
  const auto plans = skill_plans();
  const int n = static_cast<int>(plans.size());
  for (int si = 0; si < n; ++si) {
    const SkillPlan& p = plans[si];
    const int functional = kPlatformFunctional / n + (si < kPlatformFunctional % n ? 1 : 0);
    const int ats = kPlatformAts / n + (si < kPlatformAts % n ? 1 : 0);
    SessionWriter w(flows, ips, "s" + std::to_string(si + 1) + "-" + p.skill_id,
                    {p.persona, PersonaKind::kInterest}, p.skill_id, kEpoch + si * 3'600'000LL);

    w.set_phase(Phase::kInstall);
    const int install = functional / 5;
    int k = 0;
    for (; k < install; ++k) w.tls(kPlatformHosts[k % kPlatformHosts.size()], k % 7 != 3);
    w.set_phase(Phase::kInteract);
    if (p.skill_id == "sonos") {
      w.http("avs-alexa-4-na.amazon.com", "https://avs-alexa-4-na.amazon.com/v20160207/events",
             HttpMethod::kPost, std::string("OggS") + "\x01" + "opus-frame-stream");
      ++k;
    }
    for (; k < functional; ++k) w.tls(kPlatformHosts[k % kPlatformHosts.size()], k % 7 != 3);
    for (int a = 0; a < ats; ++a) w.tls(kPlatformAtsHosts[a % 2], a % 5 != 4);
    for (const std::string& h : p.vendor) {
      if (p.skill_id == "garmin") {
        w.http(h, "https://" + h + "/traffic/v2/incidents", HttpMethod::kPost,
               R"({"lat": 47.6205, "lon": -122.3493, "radius_km": 25})");
      } else {
        w.tls(h, true);
      }
    }
    for (const std::string& h : p.ats) w.tls(h, true);
    for (std::size_t i = 0; i < p.functional.size(); ++i) w.tls(p.functional[i], i % 3 != 1);
  }
  return flows;
}

// ---------------------------------------------------------------------------
// Cookie-sync crawl

std::string token(std::mt19937_64& rng) {
  static const char* hex = "0123456789abcdef";
  std::string t;
  for (int i = 0; i < 24; ++i) t += hex[rng() % 16];
  t[0] = static_cast<char>('1' + rng() % 9);
  t[23] = static_cast<char>('a' + rng() % 6);
  return t;
}

std::vector<FlowRecord> crawl_traffic(IpPool& ips) {
  std::vector<FlowRecord> flows;
  std::mt19937_64 rng(20220517);
  std::vector<std::string> partners = {"casalemedia.com", "rubiconproject.com", "pubmatic.com", "openx.net"};
  const char* words[] = {"alpha", "bravo", "cedar", "delta", "ember", "fjord", "grove", "harbor"};
  for (int i = 1; partners.size() < 41; ++i) {
    partners.push_back(std::string("dsp-") + words[i % 8] + "-" + std::to_string(i) + ".com");
  }
  std::vector<std::string> second = {"adnxs.com", "criteo.com", "3lift.com", "lijit.com"};
  for (int i = 1; second.size() < 247; ++i) {
    second.push_back("ssp-node-" + std::to_string(100 + i) + ".net");
  }

  SessionWriter w(flows, ips, "crawl-vanilla-1", {"Vanilla", PersonaKind::kVanilla}, std::nullopt,
                  kEpoch + 90 * 3'600'000LL);
  w.set_phase(Phase::kCrawl);
  w.http("www.recipes-daily.com", "https://www.recipes-daily.com/", HttpMethod::kGet);
  for (const std::string& p : partners) {
    const std::string t = token(rng);
    w.http("sync." + p, "https://sync." + p + "/usersync?gdpr=0", HttpMethod::kGet, std::nullopt,
           {{"uid", t}});
    w.http("s.amazon-adsystem.com", "https://s.amazon-adsystem.com/ecm3?id=" + t + "&ex=" + p,
           HttpMethod::kGet);
  }
  for (std::size_t i = 0; i < second.size(); ++i) {
    const std::string& y = second[i];
    const std::string& x = partners[i % partners.size()];
    const std::string t = token(rng);
    w.http("cm." + y, "https://cm." + y + "/pixel", HttpMethod::kGet, std::nullopt, {{"_uid", t}});
    w.http("match." + x, "https://match." + x + "/cookie-match?partner_uid=" + t, HttpMethod::kGet);
  }
  return flows;
}

// ---------------------------------------------------------------------------
// Bids

struct Target {
  const char* persona;
  double median, mean, r;
};

const std::vector<Target> kTargets = {
    {"Connected Car", 0.099, 0.267, 0.354},
    {"Dating", 0.099, 0.198, 0.363},
    {"Fashion & Style", 0.090, 0.403, 0.319},
    {"Pets & Animals", 0.156, 0.223, 0.428},
    {"Religion & Spirituality", 0.120, 0.323, 0.356},
    {"Smart Home", 0.071, 0.218, 0.210},
    {"Wine & Beverages", 0.065, 0.313, 0.192},
    {"Health & Fitness", 0.057, 0.310, 0.139},
    {"Navigation & Trip Planners", 0.099, 0.255, 0.410},
};

constexpr int kVanillaBids = 40;
constexpr int kTreatmentBids = 25;

double round4(double v) { return std::round(v * 1e4) / 1e4; }

// 40 control bids: median 0.030, mean 0.153.
std::vector<double> vanilla_cpms() {
  std::vector<double> v;
  for (int i = 0; i < 20; ++i) v.push_back(round4(0.0095 + 0.001 * i));
  for (int k = 0; k < 16; ++k) v.push_back(round4(0.0315 * std::pow(1.1621, k)));
  for (double x : {0.45, 0.70, 1.00}) v.push_back(x);
  double sum = 0;
  for (double x : v) sum += x;
  v.push_back(round4(0.153 * kVanillaBids - sum));
  std::sort(v.begin(), v.end());
  return v;
}

// 25 treatment bids with the requested median and mean whose rank sum
// against `control` gives U = n1*n2*(1+r)/2.
std::vector<double> treatment_cpms(const std::vector<double>& control, const Target& t) {
  const int n = static_cast<int>(control.size());
  const long twice_u = std::lround(static_cast<double>(kTreatmentBids) * n * (1 + t.r));
  const bool half = twice_u % 2 != 0;
  int km = 0;
  for (double v : control) {
    if (v == t.median) throw std::runtime_error("median collides with a control value");
    km += v < t.median;
  }
  const int cap = n - 4;
  std::vector<int> low(12, 0), up(11, km);
  long rest = (twice_u - (half ? 1 : 0)) / 2 - n - km - 11L * km;
  for (int i = 0; rest > 0 && *std::min_element(low.begin(), low.end()) < km; ++i) {
    if (low[i % 12] < km) {
      ++low[i % 12];
      --rest;
    }
  }
  for (int i = 0; rest > 0; ++i) {
    if (*std::min_element(up.begin(), up.end()) >= cap) throw std::runtime_error("rank sum out of reach");
    if (up[i % 11] < cap) {
      ++up[i % 11];
      --rest;
    }
  }
  if (rest < 0) throw std::runtime_error("rank sum too small for median");
  auto between = [&](int c, double lo_floor, double hi_cap) {
    double lo = c > 0 ? control[c - 1] : 0.0;
    double hi = control[c];
    lo = std::max(lo, lo_floor);
    hi = std::min(hi, hi_cap);
    return (lo + hi) / 2;
  };
  std::vector<double> out;
  for (int c : low) out.push_back(between(c, 0.0, t.median));
  if (half) out[0] = control[low[0]];  // one tie contributes the extra half
  out.push_back(t.median);
  for (int c : up) out.push_back(between(c, t.median, 1e9));
  double sum = 0;
  for (double x : out) sum += x;
  const double top = t.mean * kTreatmentBids - sum;
  if (top <= control.back()) throw std::runtime_error("mean out of reach");
  out.push_back(top);
  return out;
}

std::vector<double> web_cpms(int seed) {
  std::mt19937_64 rng(seed);
  std::lognormal_distribution<double> d(std::log(0.09), 1.1);
  std::vector<double> v;
  for (int i = 0; i < 20; ++i) v.push_back(round4(d(rng)));
  return v;
}

const std::vector<std::string> kSites = {"news.daily-gazette.com", "www.recipes-daily.com",
                                         "weather.cloudcast.net", "www.sports-wire.com"};
const std::vector<std::string> kPartnerCodes = {"ix", "rubicon", "pubmatic", "openx"};
const std::vector<std::string> kOtherCodes = {"appnexus", "criteo", "triplelift", "sovrn"};

std::string bids_jsonl() {
  std::string out;
  auto emit = [&](const PersonaId& p, std::vector<double> cpms, int persona_index) {
    // Partner exchanges win the upper part of the range more often.
    std::vector<std::size_t> order(cpms.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return cpms[a] < cpms[b]; });
    std::vector<std::string> bidder(cpms.size());
    for (std::size_t rank = 0; rank < order.size(); ++rank) {
      const bool partner = rank * 3 >= order.size() ? rank % 4 != 1 : rank % 3 == 0;
      bidder[order[rank]] = (partner ? kPartnerCodes : kOtherCodes)[(rank + persona_index) % 4];
    }
    std::mt19937 rng(1000 + persona_index);
    std::vector<std::size_t> slot_of(cpms.size());
    for (std::size_t i = 0; i < slot_of.size(); ++i) slot_of[i] = i % 20;
    std::shuffle(slot_of.begin(), slot_of.end(), rng);
    for (std::size_t i = 0; i < cpms.size(); ++i) {
      BidRecord b;
      b.persona = p;
      b.iteration = static_cast<int>(i / 20) + 1;
      b.site = kSites[slot_of[i] / 5];
      b.slot_id = "div-gpt-ad-" + std::to_string(slot_of[i] % 5 + 1);
      b.bidder = bidder[i];
      b.cpm = cpms[i];
      b.currency = "USD";
      b.timestamp_ms = kEpoch + 100 * 3'600'000LL + persona_index * 600'000LL + static_cast<std::int64_t>(i) * 1000;
      out += bid_to_json(b).dump() + "\n";
    }
    // A slot only this persona saw; dropped by the common-slot filter.
    BidRecord extra;
    extra.persona = p;
    extra.iteration = 1;
    extra.site = "www.local-listings.com";
    extra.slot_id = "sidebar-" + std::to_string(persona_index);
    extra.bidder = kOtherCodes[persona_index % 4];
    extra.cpm = 0.5;
    extra.currency = "USD";
    extra.timestamp_ms = kEpoch + 101 * 3'600'000LL + persona_index;
    out += bid_to_json(extra).dump() + "\n";
  };
  const auto control = vanilla_cpms();
  emit({"Vanilla", PersonaKind::kVanilla}, control, 0);
  int idx = 1;
  for (const Target& t : kTargets) emit({t.persona, PersonaKind::kInterest}, treatment_cpms(control, t), idx++);
  int seed = 77;
  for (const char* w : {"Web Health", "Web Science", "Web Computers"}) {
    emit({w, PersonaKind::kWebControl}, web_cpms(seed++), idx++);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Policies and labels

const std::map<std::string, std::string>& policy_texts() {
  static const std::map<std::string, std::string> texts = {
      {"sonos",
       "Sonos speakers can be paired with voice services.\n\nWhen you talk to Alexa through a Sonos "
       "speaker, we send your voice recordings to Amazon so the request can be processed. Sonos "
       "keeps diagnostic logs for 30 days."},
      {"harmony",
       "Harmony remotes control your home theater and smart devices. We may share usage information "
       "with an analytics tool to improve the service. You can reset your remote at any time."},
      {"charles_stanley_radio",
       "This skill plays sermons and music around the clock. We may disclose information to external "
       "service providers that stream and measure our broadcasts. Listener letters are answered "
       "by volunteers."},
      {"garmin",
       "Garmin collects location data to provide traffic and navigation features. We share account "
       "details with Amazon when you link your Garmin account. See garmin.com for the full notice."},
      {"youversion",
       "YouVersion collects your reading history to personalize plans. We never share reading plans "
       "with anyone except Amazon, which hosts this skill. We do not sell personal information to "
       "advertisers."},
      {"style_daily",
       "Style Daily is produced by an independent team in Milan. We use third parties such as "
       "Chartable and Podtrac to measure the size of our audience. Ask us anything by e-mail."},
      {"drive_news",
       "Drive News streams a bulletin every hour. Our partners, including Triton Digital, receive "
       "listening statistics from each stream."},
      {"pet_talk",
       "Pet Talk is a weekly show about animals and the people who love them. Episodes are taped in "
       "our home studio, e.g. with guests from local shelters."},
      {"wine_pairing",
       "We collect your questions to suggest wines from partner vineyards. Enjoy responsibly."},
  };
  return texts;
}

const char* kPlatformPolicy =
    "Amazon processes your voice requests to provide Alexa. Skill developers may receive "
    "information from Amazon when you use their skills. We share data with service providers and "
    "advertising partners who help us deliver and measure ads.";

// What a careful reader would conclude for each (skill, org) pair.
std::string gold_verdict(const std::string& skill, const std::string& org,
                         const std::string& data_type) {
  if (!policy_texts().contains(skill)) return "no_policy";
  if (skill == "sonos") return "clear";
  if (skill == "harmony" || skill == "charles_stanley_radio") return "vague";
  if (skill == "garmin") return data_type.empty() ? "clear" : "vague";
  if (skill == "youversion") return org == "YouVersion" || org == "Amazon" ? "clear" : "omitted";
  if (skill == "style_daily") return org == "Chartable" || org == "Podtrac" ? "clear" : "vague";
  if (skill == "drive_news") return org == "Triton Digital" ? "clear" : "vague";
  return "omitted";
}

std::string gold_csv() {
  std::set<std::tuple<std::string, std::string, std::string>> tuples;
  for (const SkillPlan& p : skill_plans()) {
    tuples.insert({p.skill_id, "", "Amazon"});
    for (const auto* list : {&p.ats, &p.functional}) {
      for (const std::string& h : *list) tuples.insert({p.skill_id, "", org_of_host(h)});
    }
    for (const std::string& h : p.vendor) {
      if (p.skill_id == "garmin") tuples.insert({p.skill_id, "precise_location", org_of_host(h)});
      else tuples.insert({p.skill_id, "", org_of_host(h)});
    }
    if (p.skill_id == "sonos") tuples.insert({p.skill_id, "voice_recording", "Amazon"});
  }
  std::string out = "skill_id,data_type,entity,verdict\n";
  for (const auto& [skill, dt, org] : tuples) {
    const std::string quoted = org.find(',') == std::string::npos ? org : "\"" + org + "\"";
    out += skill + "," + dt + "," + quoted + "," + gold_verdict(skill, org, dt) + "\n";
  }
  return out;
}

json data_ontology() {
  auto node = [](const char* term, std::vector<const char*> syn, std::vector<const char*> parents,
                 bool ignore = false) {
    json n{{"term", term}, {"synonyms", syn}, {"parents", parents}};
    if (ignore) n["ignore"] = true;
    return n;
  };
  return {{"nodes", json::array({
      node("information", {"information", "data"}, {}, true),
      node("personal_information", {"personal information", "personal data"}, {"information"}),
      node("contact_information", {"contact information", "contact details"}, {"personal_information"}),
      node("email_address", {"email address", "e-mail address"}, {"contact_information"}),
      node("phone_number", {"phone number", "telephone number"}, {"contact_information"}),
      node("account_information", {"account information", "account details"}, {"personal_information"}),
      node("customer_id", {"customer id", "customer identifier"}, {"account_information"}),
      node("device_information", {"device information", "device data"}, {"information"}),
      node("device_id", {"device id", "device identifier", "serial number"}, {"device_information"}),
      node("ip_address", {"ip address"}, {"device_information"}),
      node("location", {"location", "location information", "whereabouts"}, {"personal_information"}),
      node("precise_location", {"precise location", "gps coordinates", "geolocation"}, {"location"}),
      node("coarse_location", {"approximate location", "city", "postal code"}, {"location"}),
      node("audio", {"audio", "audio data", "sound"}, {"personal_information"}),
      node("voice_recording", {"voice recording", "audio recording", "voice command"}, {"audio"}),
      node("usage_information", {"usage information", "usage data", "activity"}, {"information"}),
      node("listening_history", {"listening history", "listening statistics"}, {"usage_information"}),
      node("reading_history", {"reading history"}, {"usage_information"}),
  })}};
}

json lexicon() {
  return {{"verbs", {"collect", "share", "disclose", "send", "receive", "use", "transfer", "provide",
                     "sell", "process", "store", "access", "obtain", "transmit"}},
          {"negations", {"not", "never", "no", "don't", "neither", "nor"}},
          {"category_terms",
           {{"analytic_provider", {"analytics tool", "analytics provider", "analytics service",
                                   "measurement partner"}},
            {"advertising_network", {"advertising network", "advertiser", "ad network", "advertising partner"}},
            {"content_provider", {"content provider", "streaming provider", "content delivery network"}},
            {"platform_provider", {"platform provider", "hosting provider"}},
            {"voice_assistant_service", {"voice assistant", "voice service"}}}},
          {"third_party_terms", {"third party", "third parties", "external service provider", "service provider",
                                 "partner", "vendor", "affiliate"}},
          {"abbreviations", {"e.g.", "i.e.", "etc.", "inc.", "ltd.", "co.", "no.", "vs.", "mr.", "ms.", "dr."}}};
}

json signatures() {
  auto sig = [](const char* kind, const char* pattern, const char* dt) {
    return json{{"kind", kind}, {"pattern", pattern}, {"data_type", dt}};
  };
  return {{"signatures", json::array({
      sig("magic", "OggS", "voice_recording"),
      sig("magic", "RIFF", "voice_recording"),
      sig("key", "lat", "precise_location"),
      sig("key", "latitude", "precise_location"),
      sig("key", "zip", "coarse_location"),
      sig("key", "deviceSerialNumber", "device_id"),
      sig("key", "device_id", "device_id"),
      sig("key", "customerId", "customer_id"),
      sig("key", "email", "email_address"),
  })}};
}

json interests() {
  const std::map<std::string, std::vector<std::string>> seen = {
      {"Connected Car", {"Automotive", "Auto Parts & Accessories"}},
      {"Dating", {"Dating & Personals", "Romance Novels"}},
      {"Fashion & Style", {"Apparel", "Beauty & Fashion"}},
      {"Pets & Animals", {"Pet Supplies", "Pet Food"}},
      {"Religion & Spirituality", {"Religious Books", "Christian Music"}},
      {"Smart Home", {"Home Automation", "Smart Speakers"}},
      {"Wine & Beverages", {"Wine", "Grocery & Gourmet"}},
      {"Health & Fitness", {"Fitness Trackers", "Sports Nutrition"}},
      {"Navigation & Trip Planners", {"Travel", "GPS & Navigation"}},
  };
  json arr = json::array();
  for (const auto& [persona, list] : seen) {
    const json p{{"name", persona}, {"kind", "interest"}};
    arr.push_back({{"persona", p}, {"request_label", "post_install"}, {"file_present", true},
                   {"interests", json::array()}});
    if (persona == "Dating") {
      arr.push_back({{"persona", p}, {"request_label", "post_interact_1"}, {"file_present", false},
                     {"interests", json::array()}});
    } else {
      arr.push_back({{"persona", p}, {"request_label", "post_interact_1"}, {"file_present", true},
                     {"interests", {list[0]}}});
    }
    arr.push_back({{"persona", p}, {"request_label", "post_interact_2"}, {"file_present", true},
                   {"interests", list}});
  }
  const json v{{"name", "Vanilla"}, {"kind", "vanilla"}};
  for (const char* label : {"post_install", "post_interact_1", "post_interact_2"}) {
    arr.push_back({{"persona", v}, {"request_label", label}, {"file_present", true}, {"interests", json::array()}});
  }
  return arr;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    const fs::path out = argc > 1 ? fs::path(argv[1]) : fs::path(ECHOAUDIT_DATA_DIR) / "demo";
    IpPool ips;
    write_text(out / "traces" / "skills.jsonl", serialize_trace(skill_traffic(ips)));
    write_text(out / "traces" / "crawl.jsonl", serialize_trace(crawl_traffic(ips)));
    write_text(out / "bids.jsonl", bids_jsonl());
    write_json(out / "org_ontology.json", ontology_json());
    write_json(out / "data_ontology.json", data_ontology());
    write_json(out / "lexicon.json", lexicon());
    write_json(out / "signatures.json", signatures());
    write_json(out / "interests.json", interests());
    write_text(out / "filters" / "ats_domains.txt",
               "# advertising and tracking domains (domain and subdomains)\n"
               "chtbl.com\npodtrac.com\nmegaphone.fm\nlibsyn.com\ntritondigital.com\nstreamtheworld.com\n"
               "adnxs.com\ncriteo.com\ndoubleclick.net\n");
    write_text(out / "filters" / "ats_hosts.txt",
               "# hosts-format entries (exact host)\n"
               "0.0.0.0 traffic.omny.fm\n0.0.0.0 s.amazon-adsystem.com\n0.0.0.0 aax.amazon-adsystem.com\n");
    write_json(out / "overrides.json", {{"device-metrics-us-2.amazon.com", "advertising_tracking"},
                                        {"fireoscaptiveportal.com", "advertising_tracking"}});
    write_json(out / "skill_vendors.json", {{"garmin", {"garmin.com", "garmincdn.com"}},
                                            {"youversion", {"youversionapi.com", "youversion.com"}},
                                            {"sonos", {"sonos.com"}},
                                            {"harmony", {"myharmony.com"}}});
    for (const auto& [skill, text] : policy_texts()) write_text(out / "policies" / (skill + ".txt"), text + "\n");
    write_text(out / "platform_policy.txt", std::string(kPlatformPolicy) + "\n");
    write_text(out / "gold.csv", gold_csv());
    write_json(out / "config.json",
               {{"paths",
                 {{"traces", {"traces/skills.jsonl", "traces/crawl.jsonl"}},
                  {"bids", "bids.jsonl"},
                  {"policies", "policies"},
                  {"platform_policy", "platform_policy.txt"},
                  {"org_ontology", "org_ontology.json"},
                  {"data_ontology", "data_ontology.json"},
                  {"lexicon", "lexicon.json"},
                  {"signatures", "signatures.json"},
                  {"filter_lists", {"filters/ats_domains.txt", "filters/ats_hosts.txt"}},
                  {"overrides", "overrides.json"},
                  {"skill_vendors", "skill_vendors.json"},
                  {"gold_labels", "gold.csv"},
                  {"interests", "interests.json"}}},
                {"platform_org", "Amazon"},
                {"distribution", {{"weight", "flows"}}},
                {"slots", {{"key", "site+slot"}}},
                {"stats", {{"exact_cutoff", 400}, {"alpha", 0.05}, {"bonferroni", false}}},
                {"bids", {{"control", "Vanilla"}}},
                {"policy", {{"include_platform_policy", false}, {"unencrypted", true}}}});
    std::cout << "demo dataset written to " << out.string() << "\n";
    return 0;
  } catch (const std::exception& e) {
    std::cerr << "make_demo: " << e.what() << "\n";
    return 1;
  }
}
