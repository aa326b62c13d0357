#include "kabem/vocab.hpp"

#include <set>

namespace kabem {

namespace {
const char* const kReservedTokens[] = {"<pad>", "<unk>", "<cls>"};
}

Vocab::Vocab() {
  for (const char* t : kReservedTokens) {
    index_.emplace(t, tokens_.size());
    tokens_.emplace_back(t);
  }
}

Vocab Vocab::build(const Corpus& corpus) {
  std::set<std::string> seen;
  for (const auto& d : corpus)
    for (const auto& u : d.turns) seen.insert(u.tokens.begin(), u.tokens.end());
  Vocab v;
  for (const auto& t : seen) {
    if (v.index_.count(t)) continue;
    v.index_.emplace(t, v.tokens_.size());
    v.tokens_.push_back(t);
  }
  return v;
}

std::size_t Vocab::id(const std::string& token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnk : it->second;
}

std::vector<std::size_t> Vocab::ids(const std::vector<std::string>& tokens) const {
  std::vector<std::size_t> out;
  out.reserve(tokens.size());
  for (const auto& t : tokens) out.push_back(id(t));
  return out;
}

void Vocab::save(const std::filesystem::path& path) const { save_labels(tokens_, path); }

Vocab Vocab::from_tokens(std::vector<std::string> tokens) {
  for (std::size_t i = 0; i < kReserved; ++i) {
    if (i >= tokens.size() || tokens[i] != kReservedTokens[i]) {
      throw CorpusError("vocab does not start with the reserved tokens");
    }
  }
  Vocab v;
  for (std::size_t i = kReserved; i < tokens.size(); ++i) {
    if (!v.index_.emplace(tokens[i], v.tokens_.size()).second) {
      throw CorpusError("duplicate vocab token '" + tokens[i] + "'");
    }
    v.tokens_.push_back(tokens[i]);
  }
  return v;
}

Vocab Vocab::load(const std::filesystem::path& path) { return from_tokens(load_labels(path)); }

}  // namespace kabem
