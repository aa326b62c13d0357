#pragma once

#include <cstddef>
#include <map>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "kabem/corpus.hpp"

namespace kabem {

struct SpanCounts {
  std::size_t true_positive = 0;
  std::size_t predicted = 0;
  std::size_t gold = 0;

  double precision() const;
  double recall() const;
  double f1() const;
};

struct SlotScores {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  SpanCounts totals;
  std::map<std::string, SpanCounts> per_slot;
};

struct EvalReport {
  double act_accuracy = 0.0;
  double slot_precision = 0.0;
  double slot_recall = 0.0;
  double slot_f1 = 0.0;
  std::map<std::string, SpanCounts> per_slot;
  std::size_t utterances = 0;

  nlohmann::json to_json() const;
  std::string to_text() const;
};

// Fraction of utterances whose predicted act set equals the gold set exactly.
// Throws std::invalid_argument on a length mismatch; 0 for empty input.
double act_accuracy(const std::vector<std::set<std::string>>& preds,
                    const std::vector<std::set<std::string>>& golds);

// Strict span-level micro P/R/F1: a predicted span counts only if a gold span
// with the same (name, start, end) exists; O tokens never form spans. Gold
// sequences must be valid BIO.
SlotScores slot_f1(const std::vector<TagSequence>& preds, const std::vector<TagSequence>& golds);

EvalReport make_report(const std::vector<std::set<std::string>>& pred_acts,
                       const std::vector<std::set<std::string>>& gold_acts,
                       const std::vector<TagSequence>& pred_tags,
                       const std::vector<TagSequence>& gold_tags);

}  // namespace kabem
