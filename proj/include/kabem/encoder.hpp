#pragma once

// Utterance encoder (a small trainable stand-in for a pretrained BERT) and the
// turn-level causal context transformer.

#include <cstddef>
#include <random>
#include <string>
#include <vector>

#include "kabem/param_store.hpp"
#include "kabem/tensor.hpp"
#include "kabem/vocab.hpp"

namespace kabem {

enum class ScaleMode {
  per_head,  // 1 / sqrt(attn_dim / heads)
  model_dim,  // 1 / sqrt(d_model), the encoder hidden size
};
ScaleMode scale_mode_from_string(const std::string& s);
std::string to_string(ScaleMode m);

struct AttentionParams {
  Tensor wq, wk, wv;  // d_model x attn_dim
  Tensor wo;          // attn_dim x d_model; undefined when attn_dim == d_model
};

struct FfnParams {
  Tensor w1, b1, w2, b2;
};

struct BlockParams {
  AttentionParams attn;
  Tensor ln1_gain, ln1_bias;
  FfnParams ffn;
  Tensor ln2_gain, ln2_bias;
};

struct BlockShape {
  std::size_t d_model = 64;
  std::size_t attn_dim = 64;
  std::size_t ffn_dim = 128;
  std::size_t heads = 4;
  ScaleMode scale_mode = ScaleMode::per_head;

  double scale() const;
};

// Registers "<prefix>.W^Q" etc. and returns handles onto them.
BlockParams register_block(ParamStore& store, const std::string& prefix, const BlockShape& shape,
                           std::mt19937_64& rng);
BlockParams lookup_block(ParamStore& store, const std::string& prefix, const BlockShape& shape);

// N x N matrix with 1 at (i, j) for j <= i.
Matrix causal_mask(std::size_t n);

// Multi-head scaled dot-product attention. q_in, k_in, v_in are N x d_model;
// returns N x d_model (N x attn_dim before the optional output map).
Tensor mha(const Tensor& q_in, const Tensor& k_in, const Tensor& v_in, bool causal,
           const AttentionParams& p, std::size_t heads, double attn_scale);

// max(0, x W1 + b1) W2 + b2
Tensor ffn(const Tensor& x, const FfnParams& p);

// Post-norm block: a = LN(x + MHA(x, x, x)); LN(a + FFN(a)).
Tensor transformer_block(const Tensor& x, const BlockParams& p, const BlockShape& shape, bool causal);

// Fixed sinusoidal position table, rows 0..n-1.
Matrix sinusoidal_positions(std::size_t n, std::size_t d_model);

struct EncoderParams {
  Tensor embedding;  // vocab x d_model
  std::vector<BlockParams> layers;
  BlockShape shape;
};

struct TokenReps {
  Tensor tokens;     // T x d_model, h^n_i
  Tensor utterance;  // 1 x d_model, sentinel output h_n
};

// Prepends the sentinel, adds positions, runs the unmasked layers.
TokenReps encode_utterance(const std::vector<std::size_t>& ids, const EncoderParams& p,
                           std::size_t max_seq_len = 60);
TokenReps encode_utterance(const std::vector<std::string>& tokens, const Vocab& vocab,
                           const EncoderParams& p, std::size_t max_seq_len = 60);

struct ContextParams {
  std::vector<BlockParams> layers;
  BlockShape shape;
};

// Causal stack over the N x d_model utterance vectors (turn positions added
// first); row n of the result only sees rows 0..n. `layers` must be >= 1 and
// at most p.layers.size().
Tensor context_attend(const Tensor& utterances, const ContextParams& p, std::size_t layers);

}  // namespace kabem
