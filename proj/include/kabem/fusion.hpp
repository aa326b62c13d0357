#pragma once

// Per-token attention over retrieved knowledge triples and the scalar gate
// that mixes the attended knowledge vector into the token representation.

#include <cstddef>
#include <random>
#include <vector>

#include "kabem/knowledge.hpp"
#include "kabem/param_store.hpp"
#include "kabem/tensor.hpp"

namespace kabem {

struct FusionShape {
  std::size_t d_model = 64;
  std::size_t d_k = 16;
  std::size_t d_a = 32;
};

struct FusionParams {
  Tensor w_h;     // d_model x d_a   (W^H)
  Tensor w_r;     // d_k x d_a       (W^R)
  Tensor w_t;     // d_k x d_a       (W^T)
  Tensor v_proj;  // 2 d_k x d_model
  Tensor w_g;     // 2 d_model x 1
  Tensor b_g;     // 1 x 1
};

FusionParams register_fusion(ParamStore& store, const FusionShape& shape, std::mt19937_64& rng);
FusionParams lookup_fusion(ParamStore& store);

struct KnowledgeAttention {
  Tensor alpha;  // 1 x m, softmax over triples
  Tensor v;      // 1 x d_model
};

// beta_j = (h W^H) . tanh(r_j W^R + t_j W^T); alpha = softmax(beta);
// v = (sum_j alpha_j [r_j; t_j]) V_proj. Zero rows take part like any other.
KnowledgeAttention knowledge_attention(const Tensor& h, const Tensor& relations,
                                       const Tensor& tails, const FusionParams& p);

struct FusedToken {
  Tensor h_prime;  // 1 x d_model
  Tensor gate;     // 1 x 1
};

// g = sigmoid([h; v] w_g + b_g); h' = g h + (1 - g) v.
FusedToken gate_fuse(const Tensor& h, const Tensor& v, const FusionParams& p);

struct FusionDiagnostics {
  std::vector<std::vector<double>> alpha;  // per token, m weights
  std::vector<double> gate;                // per token
};

struct FusedUtterance {
  Tensor h_k;  // T x d_model
  FusionDiagnostics diagnostics;
};

// Token-wise knowledge attention and gating over a T x d_model block.
// `knowledge[i]` holds the padded triple vectors retrieved for token i.
FusedUtterance fuse_utterance(const Tensor& token_reps, const std::vector<TripleVectors>& knowledge,
                              const FusionParams& p);

}  // namespace kabem
