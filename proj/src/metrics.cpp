#include "kabem/metrics.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace kabem {

double SpanCounts::precision() const {
  return predicted == 0 ? 0.0 : static_cast<double>(true_positive) / static_cast<double>(predicted);
}

double SpanCounts::recall() const {
  return gold == 0 ? 0.0 : static_cast<double>(true_positive) / static_cast<double>(gold);
}

double SpanCounts::f1() const {
  const double p = precision(), r = recall();
  return p + r > 0.0 ? 2.0 * p * r / (p + r) : 0.0;
}

double act_accuracy(const std::vector<std::set<std::string>>& preds,
                    const std::vector<std::set<std::string>>& golds) {
  if (preds.size() != golds.size()) {
    throw std::invalid_argument("act_accuracy: " + std::to_string(preds.size()) +
                                " predictions for " + std::to_string(golds.size()) + " gold sets");
  }
  if (preds.empty()) return 0.0;
  std::size_t hit = 0;
  for (std::size_t i = 0; i < preds.size(); ++i) hit += preds[i] == golds[i];
  return static_cast<double>(hit) / static_cast<double>(preds.size());
}

SlotScores slot_f1(const std::vector<TagSequence>& preds, const std::vector<TagSequence>& golds) {
  if (preds.size() != golds.size()) {
    throw std::invalid_argument("slot_f1: " + std::to_string(preds.size()) +
                                " predicted sequences for " + std::to_string(golds.size()) + " gold");
  }
  SlotScores s;
  for (std::size_t i = 0; i < preds.size(); ++i) {
    if (preds[i].size() != golds[i].size()) {
      throw std::invalid_argument("slot_f1: utterance " + std::to_string(i) + " has " +
                                  std::to_string(preds[i].size()) + " predicted tags for " +
                                  std::to_string(golds[i].size()) + " tokens");
    }
    const auto gold = decode_bio(golds[i]);
    const auto pred = decode_bio(repair_bio(preds[i]));
    const std::set<SlotSpan> gold_set(gold.begin(), gold.end());
    for (const auto& g : gold) {
      ++s.totals.gold;
      ++s.per_slot[g.name].gold;
    }
    for (const auto& p : pred) {
      ++s.totals.predicted;
      auto& per = s.per_slot[p.name];
      ++per.predicted;
      if (gold_set.count(p)) {
        ++s.totals.true_positive;
        ++per.true_positive;
      }
    }
  }
  s.precision = s.totals.precision();
  s.recall = s.totals.recall();
  s.f1 = s.totals.f1();
  return s;
}

EvalReport make_report(const std::vector<std::set<std::string>>& pred_acts,
                       const std::vector<std::set<std::string>>& gold_acts,
                       const std::vector<TagSequence>& pred_tags,
                       const std::vector<TagSequence>& gold_tags) {
  EvalReport r;
  r.act_accuracy = act_accuracy(pred_acts, gold_acts);
  const auto s = slot_f1(pred_tags, gold_tags);
  r.slot_precision = s.precision;
  r.slot_recall = s.recall;
  r.slot_f1 = s.f1;
  r.per_slot = s.per_slot;
  r.utterances = gold_acts.size();
  return r;
}

nlohmann::json EvalReport::to_json() const {
  nlohmann::json per = nlohmann::json::object();
  for (const auto& [name, c] : per_slot) {
    per[name] = {{"precision", c.precision()}, {"recall", c.recall()}, {"f1", c.f1()},
                 {"true_positive", c.true_positive}, {"predicted", c.predicted}, {"gold", c.gold}};
  }
  return {{"act_accuracy", act_accuracy},
          {"slot_precision", slot_precision},
          {"slot_recall", slot_recall},
          {"slot_f1", slot_f1},
          {"utterances", utterances},
          {"per_slot", per}};
}

std::string EvalReport::to_text() const {
  std::ostringstream out;
  out << std::fixed << std::setprecision(4);
  out << "utterances      " << utterances << '\n'
      << "act accuracy    " << act_accuracy << '\n'
      << "slot precision  " << slot_precision << '\n'
      << "slot recall     " << slot_recall << '\n'
      << "slot F1         " << slot_f1 << '\n';
  if (!per_slot.empty()) {
    out << "\n" << std::left << std::setw(20) << "slot" << std::right << std::setw(8) << "P"
        << std::setw(8) << "R" << std::setw(8) << "F1" << std::setw(8) << "gold" << '\n';
    for (const auto& [name, c] : per_slot) {
      out << std::left << std::setw(20) << name << std::right << std::setw(8) << c.precision()
          << std::setw(8) << c.recall() << std::setw(8) << c.f1() << std::setw(8) << c.gold << '\n';
    }
  }
  return out.str();
}

}  // namespace kabem
