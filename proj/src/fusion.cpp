#include "kabem/fusion.hpp"

namespace kabem {

FusionParams register_fusion(ParamStore& store, const FusionShape& s, std::mt19937_64& rng) {
  store.add("kg.W^H", xavier_uniform(s.d_model, s.d_a, rng));
  store.add("kg.W^R", xavier_uniform(s.d_k, s.d_a, rng));
  store.add("kg.W^T", xavier_uniform(s.d_k, s.d_a, rng));
  store.add("kg.V_proj", xavier_uniform(2 * s.d_k, s.d_model, rng));
  store.add("kg.w_g", xavier_uniform(2 * s.d_model, 1, rng));
  store.add("kg.b_g", Matrix(1, 1));
  return lookup_fusion(store);
}

FusionParams lookup_fusion(ParamStore& store) {
  return {store.get("kg.W^H"), store.get("kg.W^R"),   store.get("kg.W^T"),
          store.get("kg.V_proj"), store.get("kg.w_g"), store.get("kg.b_g")};
}

KnowledgeAttention knowledge_attention(const Tensor& h, const Tensor& relations,
                                       const Tensor& tails, const FusionParams& p) {
  if (h.rows() != 1) throw ShapeError("knowledge_attention: h must be a row, got " + to_string(h.shape()));
  if (relations.shape() != tails.shape()) {
    throw ShapeError("knowledge_attention: relation block " + to_string(relations.shape()) +
                     " vs tail block " + to_string(tails.shape()));
  }
  const Tensor query = matmul(h, p.w_h);                                     // 1 x d_a
  const Tensor keys = tanh(add(matmul(relations, p.w_r), matmul(tails, p.w_t)));  // m x d_a
  const Tensor beta = matmul(query, transpose(keys));                        // 1 x m
  const Tensor alpha = softmax_rows(beta);
  const Tensor raw = matmul(alpha, concat_cols(relations, tails));           // 1 x 2 d_k
  return {alpha, matmul(raw, p.v_proj)};
}

FusedToken gate_fuse(const Tensor& h, const Tensor& v, const FusionParams& p) {
  if (h.shape() != v.shape() || h.rows() != 1) {
    throw ShapeError("gate_fuse: h " + to_string(h.shape()) + " vs v " + to_string(v.shape()));
  }
  const Tensor g = sigmoid(add(matmul(concat_cols(h, v), p.w_g), p.b_g));
  return {add(scale_by(g, h), scale_by(one_minus(g), v)), g};
}

FusedUtterance fuse_utterance(const Tensor& token_reps, const std::vector<TripleVectors>& knowledge,
                              const FusionParams& p) {
  const std::size_t n = token_reps.rows();
  if (knowledge.size() != n) {
    throw ShapeError("fuse_utterance: " + std::to_string(knowledge.size()) +
                     " knowledge blocks for " + std::to_string(n) + " tokens");
  }
  FusedUtterance out;
  std::vector<Tensor> vs;
  vs.reserve(n);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& kv = knowledge[i];
    const std::size_t m = kv.relations.rows();
    bool any = false;
    for (bool b : kv.mask) any = any || b;
    if (!any) {
      // All rows zero: the weights are exactly uniform and v is exactly zero,
      // with zero gradient to every fusion weight.
      out.diagnostics.alpha.emplace_back(m, 1.0 / static_cast<double>(m));
      vs.push_back(Tensor::constant(Matrix(1, token_reps.cols())));
      continue;
    }
    auto att = knowledge_attention(slice_rows(token_reps, i, i + 1), Tensor::constant(kv.relations),
                                   Tensor::constant(kv.tails), p);
    const auto a = att.alpha.value().data();
    out.diagnostics.alpha.emplace_back(a.begin(), a.end());
    vs.push_back(att.v);
  }
  const Tensor v = concat_rows(vs);
  const Tensor g = sigmoid(add_row(matmul(concat_cols(token_reps, v), p.w_g), p.b_g));  // T x 1
  out.h_k = add(mul_col(token_reps, g), mul_col(v, one_minus(g)));
  for (std::size_t i = 0; i < n; ++i) out.diagnostics.gate.push_back(g.value()[i]);
  return out;
}

}  // namespace kabem
