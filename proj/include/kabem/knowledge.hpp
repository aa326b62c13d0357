#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <unordered_map>
#include <vector>

#include "kabem/tensor.hpp"

namespace kabem {

struct KnowledgeTriple {
  std::string head;
  std::string relation;
  std::string tail;
  double weight = 0.0;

  bool operator==(const KnowledgeTriple&) const = default;
};

std::string case_fold(std::string s);

// The external knowledge base. Heads are indexed case-folded; each bucket is
// ordered by descending weight, ties by insertion order.
class TripleStore {
 public:
  TripleStore() = default;
  explicit TripleStore(const std::vector<KnowledgeTriple>& triples);

  // Returns false (and stores nothing) if (head, relation, tail) is already
  // present. Throws std::invalid_argument for empty strings or negative weight.
  bool insert(KnowledgeTriple t);

  const std::vector<KnowledgeTriple>& triples() const { return triples_; }
  std::size_t size() const { return triples_.size(); }
  bool empty() const { return triples_.empty(); }
  // Indices of triples with this (already case-folded) head, best first.
  const std::vector<std::size_t>& by_head(const std::string& folded_head) const;

 private:
  std::vector<KnowledgeTriple> triples_;
  std::unordered_map<std::string, std::vector<std::size_t>> head_index_;
  std::unordered_map<std::string, std::size_t> seen_;
};

struct TripleLoadReport {
  std::vector<std::string> warnings;  // "line N: reason"
};

// Tab-separated head, relation, tail, weight. Malformed lines are skipped and
// reported; an empty file gives an empty store plus a warning.
TripleStore load_triples(const std::filesystem::path& path, TripleLoadReport* report = nullptr);
void save_triples(const std::vector<KnowledgeTriple>& triples, const std::filesystem::path& path);

// The per-word subgraph: triples whose head equals the case-folded word, top m
// by weight.
std::vector<KnowledgeTriple> retrieve(const TripleStore& store, const std::string& word,
                                      std::size_t m = 5);

class KgEmbeddings {
 public:
  KgEmbeddings() = default;
  explicit KgEmbeddings(std::size_t dim) : dim_(dim) {}

  std::size_t dim() const { return dim_; }
  std::map<std::string, std::vector<double>>& entities() { return entities_; }
  std::map<std::string, std::vector<double>>& relations() { return relations_; }
  const std::map<std::string, std::vector<double>>& entities() const { return entities_; }
  const std::map<std::string, std::vector<double>>& relations() const { return relations_; }

  const std::vector<double>* entity(const std::string& name) const;
  const std::vector<double>* relation(const std::string& name) const;

  // ||h + r - t||_2; throws std::out_of_range for unknown names.
  double score(const std::string& head, const std::string& relation, const std::string& tail) const;

  bool operator==(const KgEmbeddings&) const = default;

  void save(std::ostream& out) const;
  void save(const std::filesystem::path& path) const;
  static KgEmbeddings load(std::istream& in);
  static KgEmbeddings load(const std::filesystem::path& path);

 private:
  std::size_t dim_ = 0;
  std::map<std::string, std::vector<double>> entities_;
  std::map<std::string, std::vector<double>> relations_;
};

struct TransEOptions {
  std::size_t dim = 16;
  std::size_t epochs = 200;
  double margin = 1.0;
  double lr = 0.01;
  std::uint64_t seed = 0;
};

// Margin ranking with uniform head-or-tail corruption and L2 distance; entity
// vectors are projected onto the unit ball after every epoch. When
// `epoch_loss` is given it receives the summed hinge loss of each epoch.
KgEmbeddings train_transe(const TripleStore& store, const TransEOptions& opts,
                          std::vector<double>* epoch_loss = nullptr);

struct TripleVectors {
  Matrix relations;  // m x d_k, row j = r_j
  Matrix tails;      // m x d_k, row j = t_j
  std::vector<bool> mask;  // false for padding / unknown rows, which are zero
  std::size_t unknown = 0;  // triples dropped because an embedding was missing
};

TripleVectors triples_to_vectors(const std::vector<KnowledgeTriple>& triples,
                                 const KgEmbeddings& embeddings, std::size_t m);

}  // namespace kabem
