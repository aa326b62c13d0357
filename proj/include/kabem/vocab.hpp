#pragma once

#include <cstddef>
#include <filesystem>
#include <string>
#include <unordered_map>
#include <vector>

#include "kabem/corpus.hpp"

namespace kabem {

class Vocab {
 public:
  static constexpr std::size_t kPad = 0;
  static constexpr std::size_t kUnk = 1;
  static constexpr std::size_t kSentinel = 2;  // utterance summary slot, prepended
  static constexpr std::size_t kReserved = 3;

  Vocab();

  // Sorted content tokens of every training utterance.
  static Vocab build(const Corpus& corpus);

  std::size_t size() const { return tokens_.size(); }
  std::size_t id(const std::string& token) const;
  const std::string& token(std::size_t id) const { return tokens_.at(id); }
  bool contains(const std::string& token) const { return index_.count(token) != 0; }
  std::vector<std::size_t> ids(const std::vector<std::string>& tokens) const;

  const std::vector<std::string>& tokens() const { return tokens_; }
  bool operator==(const Vocab& o) const { return tokens_ == o.tokens_; }

  void save(const std::filesystem::path& path) const;
  static Vocab load(const std::filesystem::path& path);
  static Vocab from_tokens(std::vector<std::string> tokens);

 private:
  std::vector<std::string> tokens_;
  std::unordered_map<std::string, std::size_t> index_;
};

}  // namespace kabem
