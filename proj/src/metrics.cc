#include "echoaudit/metrics.h"

#include <boost/tokenizer.hpp>
#include <map>
#include <sstream>

#include "echoaudit/error.h"
#include "echoaudit/jsonl.h"
#include "echoaudit/strings.h"

namespace echoaudit {

std::vector<GoldLabel> parse_gold(std::string_view text, std::string_view source) {
  using Tokenizer = boost::tokenizer<boost::escaped_list_separator<char>>;
  std::vector<GoldLabel> out;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  bool header = true;
  while (std::getline(in, line)) {
    ++line_no;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    std::vector<std::string> fields;
    try {
      Tokenizer tok(line);
      for (const std::string& f : tok) fields.emplace_back(trim(f));
    } catch (const boost::escaped_list_error& e) {
      throw InputError(std::string(source) + ":" + std::to_string(line_no) + ": " + e.what());
    }
    if (header) {
      header = false;
      if (fields != std::vector<std::string>{"skill_id", "data_type", "entity", "verdict"}) {
        throw InputError(std::string(source) +
                         ": header must be skill_id,data_type,entity,verdict");
      }
      continue;
    }
    if (fields.size() != 4) {
      throw InputError(std::string(source) + ":" + std::to_string(line_no) + ": expected 4 fields");
    }
    GoldLabel g;
    g.tuple.skill_id = fields[0];
    if (!fields[1].empty()) g.tuple.data_type = fields[1];
    g.tuple.entity = fields[2];
    try {
      g.verdict = parse_disclosure(fields[3]);
    } catch (const InputError& e) {
      throw InputError(std::string(source) + ":" + std::to_string(line_no) + ": " + e.what());
    }
    out.push_back(std::move(g));
  }
  return out;
}

std::vector<GoldLabel> load_gold(const std::filesystem::path& path) {
  return parse_gold(read_file(path), path.string());
}

ValidationMetrics metrics_from_confusion(const ConfusionMatrix& c) {
  ValidationMetrics m;
  m.confusion = c;
  std::size_t correct = 0;
  std::size_t predicted_total = 0;
  std::size_t gold_total = 0;
  double p_sum = 0, r_sum = 0, f_sum = 0;
  for (int k = 0; k < 4; ++k) {
    ClassMetrics cm;
    cm.cls = static_cast<Disclosure>(k);
    cm.true_positive = c[k][k];
    for (int j = 0; j < 4; ++j) {
      cm.support += c[k][j];
      cm.predicted += c[j][k];
    }
    cm.precision = cm.predicted ? static_cast<double>(cm.true_positive) / cm.predicted : 0.0;
    cm.recall = cm.support ? static_cast<double>(cm.true_positive) / cm.support : 0.0;
    cm.f1 = cm.precision + cm.recall > 0
                ? 2 * cm.precision * cm.recall / (cm.precision + cm.recall)
                : 0.0;
    correct += cm.true_positive;
    predicted_total += cm.predicted;
    gold_total += cm.support;
    if (cm.support > 0) {
      ++m.macro_classes;
      p_sum += cm.precision;
      r_sum += cm.recall;
      f_sum += cm.f1;
    }
    m.per_class.push_back(cm);
  }
  m.n = gold_total;
  m.micro_precision = predicted_total ? static_cast<double>(correct) / predicted_total : 0.0;
  m.micro_recall = gold_total ? static_cast<double>(correct) / gold_total : 0.0;
  m.micro_f1 = m.micro_precision + m.micro_recall > 0
                   ? 2 * m.micro_precision * m.micro_recall / (m.micro_precision + m.micro_recall)
                   : 0.0;
  if (m.macro_classes > 0) {
    const double k = static_cast<double>(m.macro_classes);
    m.macro_precision = p_sum / k;
    m.macro_recall = r_sum / k;
    m.macro_f1_class_mean = f_sum / k;
    const double pr = m.macro_precision + m.macro_recall;
    m.macro_f1 = pr > 0 ? 2 * m.macro_precision * m.macro_recall / pr : 0.0;
  }
  return m;
}

namespace {

std::string describe(const DataFlowTuple& t) {
  return "<" + t.data_type.value_or("*") + ", " + t.entity + "> in " + t.skill_id;
}

}  // namespace

ValidationMetrics validation_metrics(const std::vector<DisclosureVerdict>& predicted,
                                     const std::vector<GoldLabel>& gold) {
  std::map<DataFlowTuple, Disclosure> pred_by, gold_by;
  for (const DisclosureVerdict& v : predicted) {
    if (!pred_by.emplace(v.tuple, v.verdict).second) {
      throw InputError("predicted verdicts list " + describe(v.tuple) + " twice");
    }
  }
  for (const GoldLabel& g : gold) {
    if (!gold_by.emplace(g.tuple, g.verdict).second) {
      throw InputError("gold labels list " + describe(g.tuple) + " twice");
    }
  }
  std::vector<std::string> problems;
  for (const auto& [t, v] : pred_by) {
    if (!gold_by.contains(t)) problems.push_back("no gold label for " + describe(t));
  }
  for (const auto& [t, v] : gold_by) {
    if (!pred_by.contains(t)) problems.push_back("no prediction for " + describe(t));
  }
  if (!problems.empty()) {
    const std::size_t shown = std::min<std::size_t>(problems.size(), 10);
    std::string msg = "predicted and gold tuple sets differ (" + std::to_string(problems.size()) +
                      " mismatches): ";
    msg += join({problems.begin(), problems.begin() + static_cast<std::ptrdiff_t>(shown)}, "; ");
    throw InputError(msg);
  }
  ConfusionMatrix c{};
  for (const auto& [t, g] : gold_by) {
    ++c[static_cast<int>(g)][static_cast<int>(pred_by.at(t))];
  }
  return metrics_from_confusion(c);
}

}  // namespace echoaudit
