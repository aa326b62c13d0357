#include "kabem/knowledge.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "kabem/param_store.hpp"

namespace kabem {

std::string case_fold(std::string s) {
  for (auto& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

namespace {
std::string triple_key(const KnowledgeTriple& t) {
  return t.head + '\t' + t.relation + '\t' + t.tail;
}
const std::vector<std::size_t> kNoTriples;
}  // namespace

TripleStore::TripleStore(const std::vector<KnowledgeTriple>& triples) {
  for (const auto& t : triples) insert(t);
}

bool TripleStore::insert(KnowledgeTriple t) {
  if (t.head.empty() || t.relation.empty() || t.tail.empty()) {
    throw std::invalid_argument("triple with an empty field");
  }
  if (!(t.weight >= 0.0)) throw std::invalid_argument("triple weight must be non-negative");
  if (!seen_.emplace(triple_key(t), triples_.size()).second) return false;

  auto& bucket = head_index_[case_fold(t.head)];
  const std::size_t idx = triples_.size();
  // Insert after every entry with weight >= this one to keep ties in order.
  auto pos = std::upper_bound(bucket.begin(), bucket.end(), t.weight,
                              [this](double w, std::size_t j) { return w > triples_[j].weight; });
  triples_.push_back(std::move(t));
  bucket.insert(pos, idx);
  return true;
}

const std::vector<std::size_t>& TripleStore::by_head(const std::string& folded_head) const {
  auto it = head_index_.find(folded_head);
  return it == head_index_.end() ? kNoTriples : it->second;
}

TripleStore load_triples(const std::filesystem::path& path, TripleLoadReport* report) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  TripleStore store;
  std::string line;
  std::size_t lineno = 0;
  auto warn = [&](const std::string& msg) {
    if (report) report->warnings.push_back("line " + std::to_string(lineno) + ": " + msg);
  };
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    while (true) {
      auto tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (fields.size() != 4) {
      warn("expected 4 tab-separated fields, got " + std::to_string(fields.size()));
      continue;
    }
    double w = 0.0;
    try {
      w = parse_double(fields[3]);
    } catch (const std::invalid_argument&) {
      warn("weight '" + fields[3] + "' is not a number");
      continue;
    }
    try {
      store.insert({fields[0], fields[1], fields[2], w});
    } catch (const std::invalid_argument& e) {
      warn(e.what());
    }
  }
  if (store.empty() && report) report->warnings.push_back(path.string() + ": no triples loaded");
  return store;
}

void save_triples(const std::vector<KnowledgeTriple>& triples, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  for (const auto& t : triples)
    out << t.head << '\t' << t.relation << '\t' << t.tail << '\t' << format_double(t.weight) << '\n';
}

std::vector<KnowledgeTriple> retrieve(const TripleStore& store, const std::string& word,
                                      std::size_t m) {
  std::vector<KnowledgeTriple> out;
  const auto& idx = store.by_head(case_fold(word));
  for (std::size_t k = 0; k < idx.size() && k < m; ++k) out.push_back(store.triples()[idx[k]]);
  return out;
}

// --- embeddings ----------------------------------------------------------

const std::vector<double>* KgEmbeddings::entity(const std::string& name) const {
  auto it = entities_.find(name);
  return it == entities_.end() ? nullptr : &it->second;
}

const std::vector<double>* KgEmbeddings::relation(const std::string& name) const {
  auto it = relations_.find(name);
  return it == relations_.end() ? nullptr : &it->second;
}

double KgEmbeddings::score(const std::string& head, const std::string& relation,
                           const std::string& tail) const {
  const auto* h = entity(head);
  const auto* r = this->relation(relation);
  const auto* t = entity(tail);
  if (!h || !r || !t) throw std::out_of_range("no embedding for triple (" + head + ", " + relation + ", " + tail + ")");
  double sq = 0.0;
  for (std::size_t i = 0; i < dim_; ++i) {
    const double d = (*h)[i] + (*r)[i] - (*t)[i];
    sq += d * d;
  }
  return std::sqrt(sq);
}

void KgEmbeddings::save(std::ostream& out) const {
  out << "d_k=" << dim_ << '\n';
  auto dump = [&](char kind, const std::map<std::string, std::vector<double>>& m) {
    for (const auto& [name, v] : m) {
      out << kind << ' ' << name;
      for (double x : v) out << ' ' << format_double(x);
      out << '\n';
    }
  };
  dump('E', entities_);
  dump('R', relations_);
}

void KgEmbeddings::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  save(out);
}

KgEmbeddings KgEmbeddings::load(std::istream& in) {
  std::string header;
  if (!std::getline(in, header) || header.rfind("d_k=", 0) != 0) {
    throw std::runtime_error("embedding file: missing 'd_k=<n>' header");
  }
  KgEmbeddings emb(static_cast<std::size_t>(std::stoul(header.substr(4))));
  std::string line;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    if (line == "end-embeddings") break;
    std::istringstream ss(line);
    std::vector<std::string> toks;
    for (std::string t; ss >> t;) toks.push_back(t);
    if (toks.size() < emb.dim_ + 2 || (toks[0] != "E" && toks[0] != "R")) {
      throw std::runtime_error("embedding file line " + std::to_string(lineno) + ": malformed");
    }
    const std::size_t name_end = toks.size() - emb.dim_;
    std::string name = toks[1];
    for (std::size_t i = 2; i < name_end; ++i) name += ' ' + toks[i];
    std::vector<double> v;
    for (std::size_t i = name_end; i < toks.size(); ++i) v.push_back(parse_double(toks[i]));
    (toks[0] == "E" ? emb.entities_ : emb.relations_)[name] = std::move(v);
  }
  return emb;
}

KgEmbeddings KgEmbeddings::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return load(in);
}

TripleVectors triples_to_vectors(const std::vector<KnowledgeTriple>& triples,
                                 const KgEmbeddings& embeddings, std::size_t m) {
  if (m == 0) throw std::invalid_argument("triples_to_vectors: m must be at least 1");
  const std::size_t d = embeddings.dim();
  TripleVectors out{Matrix(m, d), Matrix(m, d), std::vector<bool>(m, false), 0};
  for (std::size_t j = 0; j < triples.size() && j < m; ++j) {
    const auto* r = embeddings.relation(triples[j].relation);
    const auto* t = embeddings.entity(triples[j].tail);
    if (!r || !t) {
      ++out.unknown;
      continue;
    }
    for (std::size_t i = 0; i < d; ++i) {
      out.relations(j, i) = (*r)[i];
      out.tails(j, i) = (*t)[i];
    }
    out.mask[j] = true;
  }
  return out;
}

}  // namespace kabem
