#include "kabem/decoder.hpp"

#include <cmath>
#include <stdexcept>

namespace kabem {

LstmParams register_lstm(ParamStore& store, const std::string& prefix, std::size_t input,
                         std::size_t hidden, std::mt19937_64& rng) {
  store.add(prefix + ".W_x", xavier_uniform(input, 4 * hidden, rng));
  store.add(prefix + ".W_h", xavier_uniform(hidden, 4 * hidden, rng));
  Matrix b(1, 4 * hidden);
  for (std::size_t j = hidden; j < 2 * hidden; ++j) b[j] = 1.0;
  store.add(prefix + ".b", std::move(b));
  return lookup_lstm(store, prefix);
}

LstmParams lookup_lstm(ParamStore& store, const std::string& prefix) {
  LstmParams p{store.get(prefix + ".W_x"), store.get(prefix + ".W_h"), store.get(prefix + ".b"), 0};
  p.hidden = p.w_h.rows();
  return p;
}

LstmState zero_state(std::size_t hidden) {
  return {Tensor::constant(Matrix(1, hidden)), Tensor::constant(Matrix(1, hidden))};
}

LstmState lstm_cell(const Tensor& x_proj, const LstmState& prev, const LstmParams& p) {
  const std::size_t h = p.hidden;
  const Tensor gates = add_row(add(x_proj, matmul(prev.h, p.w_h)), p.b);
  const Tensor i = sigmoid(slice_cols(gates, 0, h));
  const Tensor f = sigmoid(slice_cols(gates, h, 2 * h));
  const Tensor g = tanh(slice_cols(gates, 2 * h, 3 * h));
  const Tensor o = sigmoid(slice_cols(gates, 3 * h, 4 * h));
  const Tensor c = add(mul(f, prev.c), mul(i, g));
  return {mul(o, tanh(c)), c};
}

Tensor lstm_sequence(const Tensor& inputs, const LstmState& initial, const LstmParams& p,
                     bool reverse) {
  const std::size_t n = inputs.rows();
  if (n == 0) throw ShapeError("lstm_sequence: empty input");
  const Tensor proj = matmul(inputs, p.w_x);
  std::vector<Tensor> outs(n);
  LstmState s = initial;
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t t = reverse ? n - 1 - k : k;
    s = lstm_cell(slice_rows(proj, t, t + 1), s, p);
    outs[t] = s.h;
  }
  return concat_rows(outs);
}

Tensor decode_slots(const Tensor& h_k, const Tensor& context_row, const SlotDecoderParams& p) {
  if (context_row.rows() != 1) {
    throw ShapeError("decode_slots: context must be one row, got " + to_string(context_row.shape()));
  }
  const LstmState init_f{tanh(matmul(context_row, p.w_c_fwd)), zero_state(p.fwd.hidden).c};
  const LstmState init_b{tanh(matmul(context_row, p.w_c_bwd)), zero_state(p.bwd.hidden).c};
  const Tensor fwd = lstm_sequence(h_k, init_f, p.fwd, false);
  const Tensor bwd = lstm_sequence(h_k, init_b, p.bwd, true);
  return matmul(concat_cols(fwd, bwd), p.w_slot);
}

Tensor decode_acts(const Tensor& contexts, const ActDecoderParams& p) {
  return matmul(lstm_sequence(contexts, zero_state(p.lstm.hidden), p.lstm), p.w_act);
}

Tensor joint_loss(const Tensor& act_logits, const std::vector<Tensor>& slot_logits,
                  const Matrix& gold_acts, const std::vector<std::vector<std::size_t>>& gold_tags) {
  const std::size_t n = act_logits.rows();
  if (slot_logits.size() != n || gold_tags.size() != n) {
    throw ShapeError("joint_loss: " + std::to_string(n) + " turns of act logits, " +
                     std::to_string(slot_logits.size()) + " slot blocks, " +
                     std::to_string(gold_tags.size()) + " gold tag rows");
  }
  for (double v : gold_acts.data()) {
    if (v != 0.0 && v != 1.0) throw std::invalid_argument("joint_loss: act targets must be 0/1");
  }
  // bce_with_logits averages over N * |acts|; scaling by N gives the per-turn
  // act means summed over turns.
  Tensor total = scale(bce_with_logits(act_logits, gold_acts), static_cast<double>(n));
  for (std::size_t t = 0; t < n; ++t) {
    for (auto id : gold_tags[t]) {
      if (id >= slot_logits[t].cols()) {
        throw std::invalid_argument("joint_loss: gold tag id " + std::to_string(id) +
                                    " outside inventory of " + std::to_string(slot_logits[t].cols()));
      }
    }
    total = add(total, cross_entropy_rows(slot_logits[t], gold_tags[t]));
  }
  return total;
}

Prediction predict(const Matrix& act_logits, const Matrix& slot_logits, double threshold,
                   const std::vector<std::string>& act_labels,
                   const std::vector<std::string>& tag_labels) {
  if (!(threshold > 0.0 && threshold < 1.0)) {
    throw std::invalid_argument("predict: threshold must lie in (0, 1)");
  }
  if (act_logits.rows() != 1 || act_logits.cols() != act_labels.size()) {
    throw ShapeError("predict: act logits " + to_string(act_logits.shape()) + " for " +
                     std::to_string(act_labels.size()) + " acts");
  }
  if (slot_logits.cols() != tag_labels.size()) {
    throw ShapeError("predict: slot logits " + to_string(slot_logits.shape()) + " for " +
                     std::to_string(tag_labels.size()) + " tags");
  }
  Prediction out;
  std::size_t best = 0;
  for (std::size_t a = 0; a < act_labels.size(); ++a) {
    const double prob = 1.0 / (1.0 + std::exp(-act_logits[a]));
    out.act_probs.push_back(prob);
    if (prob > threshold) out.acts.insert(act_labels[a]);
    if (act_logits[a] > act_logits[best]) best = a;
  }
  if (out.acts.empty()) out.acts.insert(act_labels[best]);

  for (std::size_t t = 0; t < slot_logits.rows(); ++t) {
    std::size_t arg = 0;
    for (std::size_t k = 1; k < slot_logits.cols(); ++k)
      if (slot_logits(t, k) > slot_logits(t, arg)) arg = k;
    out.tags.push_back(tag_labels[arg]);
  }
  out.tags = repair_bio(std::move(out.tags));
  return out;
}

}  // namespace kabem
