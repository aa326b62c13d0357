#pragma once

// Mutual decoders: a BiLSTM slot tagger over knowledge-enriched tokens whose
// initial states come from the turn context, and an act LSTM over the turns.

#include <cstddef>
#include <random>
#include <set>
#include <string>
#include <vector>

#include "kabem/corpus.hpp"
#include "kabem/param_store.hpp"
#include "kabem/tensor.hpp"

namespace kabem {

// Gate layout along the 4H axis: input, forget, cell candidate, output.
struct LstmParams {
  Tensor w_x;  // in x 4H
  Tensor w_h;  // H x 4H
  Tensor b;    // 1 x 4H, forget slice initialised to 1
  std::size_t hidden = 0;
};

LstmParams register_lstm(ParamStore& store, const std::string& prefix, std::size_t input,
                         std::size_t hidden, std::mt19937_64& rng);
LstmParams lookup_lstm(ParamStore& store, const std::string& prefix);

struct LstmState {
  Tensor h;  // 1 x H
  Tensor c;  // 1 x H
};

// One step given the precomputed input projection x W_x (1 x 4H).
LstmState lstm_cell(const Tensor& x_proj, const LstmState& prev, const LstmParams& p);

// Runs the cell over the rows of `inputs`; returns the T x H stacked hidden
// states. With `reverse` the rows are consumed last to first but the output
// stays aligned with the input rows.
Tensor lstm_sequence(const Tensor& inputs, const LstmState& initial, const LstmParams& p,
                     bool reverse = false);

LstmState zero_state(std::size_t hidden);

struct SlotDecoderParams {
  LstmParams fwd, bwd;
  Tensor w_c_fwd, w_c_bwd;  // d_model x H
  Tensor w_slot;            // 2H x |tags|
};

struct ActDecoderParams {
  LstmParams lstm;
  Tensor w_act;  // H x |acts|
};

// T x |tags| logits. Each direction starts from h0 = tanh(c_n W_c), c0 = 0.
Tensor decode_slots(const Tensor& h_k, const Tensor& context_row, const SlotDecoderParams& p);
// N x |acts| logits from an LSTM over the turn axis.
Tensor decode_acts(const Tensor& contexts, const ActDecoderParams& p);

// Sum over turns of mean-over-acts BCE plus mean-over-tokens CE.
// gold_acts is N x |acts| multi-hot; gold_tags[n] holds tag ids for turn n.
Tensor joint_loss(const Tensor& act_logits, const std::vector<Tensor>& slot_logits,
                  const Matrix& gold_acts, const std::vector<std::vector<std::size_t>>& gold_tags);

struct Prediction {
  std::set<std::string> acts;
  std::vector<double> act_probs;  // sigmoid per act, inventory order
  TagSequence tags;
};

// Acts with sigmoid(logit) > threshold (argmax act if none qualifies); slot tags
// by per-token argmax followed by BIO repair. act_logits is 1 x |acts|.
Prediction predict(const Matrix& act_logits, const Matrix& slot_logits, double threshold,
                   const std::vector<std::string>& act_labels,
                   const std::vector<std::string>& tag_labels);

}  // namespace kabem
