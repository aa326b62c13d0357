#pragma once

#include "kabem/synth.hpp"
#include "kabem/trainer.hpp"

namespace fixture {

// A model small enough for many gradient checks and quick training runs.
inline kabem::ModelConfig tiny_model(kabem::Ablation a = kabem::Ablation::full) {
  kabem::ModelConfig c;
  c.d_model = 8;
  c.token_layers = 1;
  c.token_heads = 2;
  c.context_layers = 1;
  c.context_heads = 2;
  c.attn_dim = 8;
  c.ffn_dim = 12;
  c.d_k = 4;
  c.d_a = 6;
  c.lstm_hidden = 6;
  c.knowledge_m = 3;
  c.ablation = a;
  return c;
}

inline kabem::SyntheticData small_data(std::size_t train, std::size_t test, std::uint64_t seed = 0) {
  kabem::GenConfig g;
  g.train_dialogues = train;
  g.test_dialogues = test;
  g.train_entities = 12;
  g.test_entities = 6;
  return kabem::generate_synthetic(g, seed);
}

// Two turns, at most five tokens each, with KB hits for some tokens.
inline kabem::Dialogue toy_dialogue() {
  kabem::Dialogue d;
  d.id = "toy";
  kabem::Utterance a;
  a.speaker = kabem::Speaker::user;
  a.tokens = {"a", "cheap", "comedy", "tomorrow"};
  a.acts = {"request"};
  a.slots = {{"pricing", 1, 2}, {"genre", 2, 3}, {"date", 3, 4}};
  kabem::Utterance b;
  b.speaker = kabem::Speaker::system;
  b.tokens = {"sure", "at", "7", "pm"};
  b.acts = {"inform", "offer"};
  b.slots = {{"starttime", 2, 4}};
  d.turns = {a, b};
  return d;
}

inline std::vector<kabem::KnowledgeTriple> toy_triples() {
  return {{"cheap", "related to", "affordable", 0.99},
          {"cheap", "related to", "chintzy", 0.3},
          {"comedy", "is a", "drama", 0.6},
          {"comedy", "related to", "comic", 1.0},
          {"tomorrow", "antonym", "yesterday", 0.9}};
}

}  // namespace fixture
