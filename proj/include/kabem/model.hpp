#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "kabem/corpus.hpp"
#include "kabem/decoder.hpp"
#include "kabem/encoder.hpp"
#include "kabem/fusion.hpp"
#include "kabem/knowledge.hpp"
#include "kabem/param_store.hpp"
#include "kabem/vocab.hpp"

namespace kabem {

enum class Ablation {
  full,
  no_kg,    // knowledge attention and gate bypassed: H_K = token reps
  no_ca,    // context transformer replaced by a unidirectional LSTM over turns
  no_lstm,  // both decoder LSTMs replaced by affine heads; no context fusion
};
Ablation ablation_from_string(const std::string& s);
std::string to_string(Ablation a);
inline constexpr Ablation kAllAblations[] = {Ablation::full, Ablation::no_kg, Ablation::no_ca,
                                             Ablation::no_lstm};

// Flat key=value settings. Unknown keys are rejected.
using KeyValues = std::map<std::string, std::string>;
KeyValues parse_key_values(std::istream& in, const std::string& source);
KeyValues load_key_values(const std::filesystem::path& path);

struct ModelConfig {
  std::size_t d_model = 64;
  std::size_t token_layers = 2;
  std::size_t token_heads = 4;
  std::size_t context_layers = 2;
  std::size_t context_heads = 4;
  std::size_t attn_dim = 64;
  std::size_t ffn_dim = 128;
  std::size_t d_k = 16;
  std::size_t d_a = 32;
  std::size_t lstm_hidden = 64;
  std::size_t knowledge_m = 5;
  std::size_t max_seq_len = kMaxSeqLen;
  double embed_init = 0.5;
  ScaleMode scale_mode = ScaleMode::per_head;
  Ablation ablation = Ablation::full;

  // Returns false if `key` is not a model key; throws on a bad value.
  bool apply(const std::string& key, const std::string& value);
  std::vector<std::pair<std::string, std::string>> items() const;
  void validate() const;
};

// Everything the forward pass needs for one dialogue, resolved once.
struct PreparedDialogue {
  std::string id;
  std::vector<std::vector<std::string>> tokens;
  std::vector<std::vector<std::size_t>> ids;
  // Per turn, per token: the retrieved triples and their padded vectors.
  std::vector<std::vector<std::vector<KnowledgeTriple>>> triples;
  std::vector<std::vector<TripleVectors>> knowledge;
  Matrix gold_acts;                                // N x |acts|, empty if unlabeled
  std::vector<std::vector<std::size_t>> gold_tags;  // empty if unlabeled
};

struct ForwardResult {
  Tensor act_logits;                 // N x |acts|
  std::vector<Tensor> slot_logits;   // per turn, T x |tags|
  Tensor contexts;                   // N x d_model (the per-turn rows fed to the heads)
  std::vector<FusionDiagnostics> fusion;  // empty for no_kg
};

class Model {
 public:
  Model(ModelConfig config, Vocab vocab, std::vector<std::string> act_labels,
        std::vector<std::string> slot_names, KgEmbeddings embeddings, std::uint64_t seed);
  // Parameter handles would alias between copies.
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;
  Model(Model&&) = default;
  Model& operator=(Model&&) = default;

  const ModelConfig& config() const { return config_; }
  const Vocab& vocab() const { return vocab_; }
  const std::vector<std::string>& act_labels() const { return act_labels_; }
  const std::vector<std::string>& slot_names() const { return slot_names_; }
  const std::vector<std::string>& tag_labels() const { return tag_labels_; }
  const KgEmbeddings& embeddings() const { return embeddings_; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  // Rejects act labels or slot names outside the model's inventories. The KB
  // is consulted only when the variant uses knowledge.
  PreparedDialogue prepare(const Dialogue& d, const TripleStore& kb) const;

  ForwardResult forward(const PreparedDialogue& d) const;
  Tensor loss(const PreparedDialogue& d) const;
  std::vector<Prediction> predict(const PreparedDialogue& d, double threshold = 0.5) const;

  void save(const std::filesystem::path& path) const;
  void write(std::ostream& out) const;
  static Model load(const std::filesystem::path& path);

 private:
  void register_params(std::uint64_t seed);
  void bind();

  ModelConfig config_;
  Vocab vocab_;
  std::vector<std::string> act_labels_;
  std::vector<std::string> slot_names_;
  std::vector<std::string> tag_labels_;
  KgEmbeddings embeddings_;
  ParamStore params_;

  EncoderParams encoder_;
  ContextParams context_;
  LstmParams context_lstm_;
  FusionParams fusion_;
  SlotDecoderParams slot_decoder_;
  ActDecoderParams act_decoder_;
  Tensor slot_affine_w_, slot_affine_b_, act_affine_w_, act_affine_b_;
};

}  // namespace kabem
