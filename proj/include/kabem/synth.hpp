#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "kabem/corpus.hpp"
#include "kabem/knowledge.hpp"
#include "kabem/model.hpp"

namespace kabem {

struct GenConfig {
  std::size_t train_dialogues = 600;
  std::size_t test_dialogues = 200;
  // Probability that an eligible test slot (city / cuisine / genre) takes an
  // entity that never occurs in training and is only typed through the KB.
  double knowledge_rate = 0.3;
  // Probability that a reply to an offer or confirmation question uses a bare
  // form ("sure", "no thanks") whose act is decided by the earlier system turn.
  double context_rate = 0.3;
  std::size_t min_turns = 2;
  std::size_t max_turns = 8;
  // Entities per knowledge-bearing slot type usable in training text, and the
  // disjoint pool reserved for test-only use.
  std::size_t train_entities = 120;
  std::size_t test_entities = 60;

  bool apply(const std::string& key, const std::string& value);
  std::vector<std::pair<std::string, std::string>> items() const;
  void validate() const;
};

struct SyntheticData {
  Corpus train;
  Corpus test;
  std::vector<KnowledgeTriple> kb;
  std::vector<std::string> acts;
  std::vector<std::string> slots;
};

// Pure function of (config, seed).
SyntheticData generate_synthetic(const GenConfig& config, std::uint64_t seed);

// Slot names whose values are knowledge-bearing entities.
const std::vector<std::string>& knowledge_slot_names();

// Writes train.jsonl, test.jsonl, kb.tsv, acts.txt, slots.txt under `dir`.
void save_synthetic(const SyntheticData& data, const std::filesystem::path& dir);

}  // namespace kabem
