#include "kabem/encoder.hpp"

#include <cmath>
#include <stdexcept>

namespace kabem {

ScaleMode scale_mode_from_string(const std::string& s) {
  if (s == "per_head") return ScaleMode::per_head;
  if (s == "model_dim") return ScaleMode::model_dim;
  throw std::invalid_argument("unknown scale_mode '" + s + "' (per_head | model_dim)");
}

std::string to_string(ScaleMode m) { return m == ScaleMode::per_head ? "per_head" : "model_dim"; }

double BlockShape::scale() const {
  const double denom = scale_mode == ScaleMode::per_head
                           ? static_cast<double>(attn_dim) / static_cast<double>(heads)
                           : static_cast<double>(d_model);
  return 1.0 / std::sqrt(denom);
}

namespace {

void check_shape(const BlockShape& s) {
  if (s.heads == 0 || s.attn_dim % s.heads != 0) {
    throw std::invalid_argument("attention dim " + std::to_string(s.attn_dim) +
                                " is not divisible by " + std::to_string(s.heads) + " heads");
  }
}

}  // namespace

BlockParams register_block(ParamStore& store, const std::string& prefix, const BlockShape& s,
                           std::mt19937_64& rng) {
  check_shape(s);
  store.add(prefix + ".W^Q", xavier_uniform(s.d_model, s.attn_dim, rng));
  store.add(prefix + ".W^K", xavier_uniform(s.d_model, s.attn_dim, rng));
  store.add(prefix + ".W^V", xavier_uniform(s.d_model, s.attn_dim, rng));
  if (s.attn_dim != s.d_model) store.add(prefix + ".W^O", xavier_uniform(s.attn_dim, s.d_model, rng));
  store.add(prefix + ".ln1.gain", Matrix(1, s.d_model, 1.0));
  store.add(prefix + ".ln1.bias", Matrix(1, s.d_model));
  store.add(prefix + ".W1", xavier_uniform(s.d_model, s.ffn_dim, rng));
  store.add(prefix + ".b1", Matrix(1, s.ffn_dim));
  store.add(prefix + ".W2", xavier_uniform(s.ffn_dim, s.d_model, rng));
  store.add(prefix + ".b2", Matrix(1, s.d_model));
  store.add(prefix + ".ln2.gain", Matrix(1, s.d_model, 1.0));
  store.add(prefix + ".ln2.bias", Matrix(1, s.d_model));
  return lookup_block(store, prefix, s);
}

BlockParams lookup_block(ParamStore& store, const std::string& prefix, const BlockShape& s) {
  BlockParams p;
  p.attn.wq = store.get(prefix + ".W^Q");
  p.attn.wk = store.get(prefix + ".W^K");
  p.attn.wv = store.get(prefix + ".W^V");
  if (s.attn_dim != s.d_model) p.attn.wo = store.get(prefix + ".W^O");
  p.ln1_gain = store.get(prefix + ".ln1.gain");
  p.ln1_bias = store.get(prefix + ".ln1.bias");
  p.ffn.w1 = store.get(prefix + ".W1");
  p.ffn.b1 = store.get(prefix + ".b1");
  p.ffn.w2 = store.get(prefix + ".W2");
  p.ffn.b2 = store.get(prefix + ".b2");
  p.ln2_gain = store.get(prefix + ".ln2.gain");
  p.ln2_bias = store.get(prefix + ".ln2.bias");
  return p;
}

Matrix causal_mask(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j <= i; ++j) m(i, j) = 1.0;
  return m;
}

Tensor mha(const Tensor& q_in, const Tensor& k_in, const Tensor& v_in, bool causal,
           const AttentionParams& p, std::size_t heads, double attn_scale) {
  if (q_in.rows() != k_in.rows() || k_in.rows() != v_in.rows()) {
    throw ShapeError("mha: query/key/value lengths " + to_string(q_in.shape()) + ", " +
                     to_string(k_in.shape()) + ", " + to_string(v_in.shape()) + " differ");
  }
  const Tensor q = matmul(q_in, p.wq);
  const Tensor k = matmul(k_in, p.wk);
  const Tensor v = matmul(v_in, p.wv);
  const std::size_t attn_dim = q.cols();
  if (heads == 0 || attn_dim % heads != 0) {
    throw ShapeError("mha: attention dim " + std::to_string(attn_dim) + " not divisible by " +
                     std::to_string(heads) + " heads");
  }
  const std::size_t n = q.rows();
  const std::size_t dh = attn_dim / heads;
  const Matrix mask = causal ? causal_mask(n) : Matrix(n, n, 1.0);

  std::vector<Tensor> outs;
  outs.reserve(heads);
  for (std::size_t h = 0; h < heads; ++h) {
    const Tensor qh = slice_cols(q, h * dh, (h + 1) * dh);
    const Tensor kh = slice_cols(k, h * dh, (h + 1) * dh);
    const Tensor vh = slice_cols(v, h * dh, (h + 1) * dh);
    const Tensor scores = scale(matmul(qh, transpose(kh)), attn_scale);
    const Tensor weights = causal ? masked_softmax_rows(scores, mask) : softmax_rows(scores);
    outs.push_back(matmul(weights, vh));
  }
  Tensor out = heads == 1 ? outs[0] : concat_cols(outs);
  if (p.wo.defined()) out = matmul(out, p.wo);
  return out;
}

Tensor ffn(const Tensor& x, const FfnParams& p) {
  return add_row(matmul(relu_affine(x, p.w1, p.b1), p.w2), p.b2);
}

Tensor transformer_block(const Tensor& x, const BlockParams& p, const BlockShape& shape,
                         bool causal) {
  const Tensor a = layer_norm_rows(add(x, mha(x, x, x, causal, p.attn, shape.heads, shape.scale())),
                                   p.ln1_gain, p.ln1_bias);
  return layer_norm_rows(add(a, ffn(a, p.ffn)), p.ln2_gain, p.ln2_bias);
}

Matrix sinusoidal_positions(std::size_t n, std::size_t d_model) {
  Matrix pe(n, d_model);
  for (std::size_t pos = 0; pos < n; ++pos) {
    for (std::size_t i = 0; i < d_model; ++i) {
      const double expo = static_cast<double>(i - i % 2) / static_cast<double>(d_model);
      const double angle = static_cast<double>(pos) / std::pow(10000.0, expo);
      pe(pos, i) = i % 2 == 0 ? std::sin(angle) : std::cos(angle);
    }
  }
  return pe;
}

TokenReps encode_utterance(const std::vector<std::size_t>& ids, const EncoderParams& p,
                           std::size_t max_seq_len) {
  if (ids.empty()) throw std::invalid_argument("encode_utterance: empty token list");
  if (ids.size() > max_seq_len) {
    throw std::invalid_argument("encode_utterance: " + std::to_string(ids.size()) +
                                " tokens exceed max length " + std::to_string(max_seq_len));
  }
  std::vector<std::size_t> with_sentinel;
  with_sentinel.reserve(ids.size() + 1);
  with_sentinel.push_back(Vocab::kSentinel);
  with_sentinel.insert(with_sentinel.end(), ids.begin(), ids.end());

  Tensor x = gather_rows(p.embedding, with_sentinel);
  x = add(x, Tensor::constant(sinusoidal_positions(with_sentinel.size(), p.shape.d_model)));
  for (const auto& layer : p.layers) x = transformer_block(x, layer, p.shape, false);
  return {slice_rows(x, 1, x.rows()), slice_rows(x, 0, 1)};
}

TokenReps encode_utterance(const std::vector<std::string>& tokens, const Vocab& vocab,
                           const EncoderParams& p, std::size_t max_seq_len) {
  return encode_utterance(vocab.ids(tokens), p, max_seq_len);
}

Tensor context_attend(const Tensor& utterances, const ContextParams& p, std::size_t layers) {
  if (layers < 1) throw std::invalid_argument("context_attend: need at least one layer");
  if (layers > p.layers.size()) {
    throw std::invalid_argument("context_attend: " + std::to_string(layers) +
                                " layers requested, " + std::to_string(p.layers.size()) +
                                " available");
  }
  if (utterances.rows() < 1) throw std::invalid_argument("context_attend: no turns");
  Tensor c = add(utterances,
                 Tensor::constant(sinusoidal_positions(utterances.rows(), p.shape.d_model)));
  for (std::size_t l = 0; l < layers; ++l) c = transformer_block(c, p.layers[l], p.shape, true);
  return c;
}

}  // namespace kabem
