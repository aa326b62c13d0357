#include "kabem/model.hpp"

#include <algorithm>
#include <fstream>
#include <sstream>
#include <stdexcept>

namespace kabem {

Ablation ablation_from_string(const std::string& s) {
  if (s == "full") return Ablation::full;
  if (s == "no_kg") return Ablation::no_kg;
  if (s == "no_ca") return Ablation::no_ca;
  if (s == "no_lstm") return Ablation::no_lstm;
  throw std::invalid_argument("unknown ablation variant '" + s +
                              "' (full | no_kg | no_ca | no_lstm)");
}

std::string to_string(Ablation a) {
  switch (a) {
    case Ablation::full: return "full";
    case Ablation::no_kg: return "no_kg";
    case Ablation::no_ca: return "no_ca";
    case Ablation::no_lstm: return "no_lstm";
  }
  return "?";
}

KeyValues parse_key_values(std::istream& in, const std::string& source) {
  KeyValues kv;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    const auto first = line.find_first_not_of(" \t");
    if (first == std::string::npos || line[first] == '#') continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos) {
      throw std::invalid_argument(source + ":" + std::to_string(lineno) + ": expected key=value");
    }
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t");
      const auto e = s.find_last_not_of(" \t");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
  }
  return kv;
}

KeyValues load_key_values(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  return parse_key_values(in, path.string());
}

namespace {

std::size_t to_size(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  unsigned long long n = 0;
  try {
    n = std::stoull(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos != v.size() || v.empty() || v[0] == '-') {
    throw std::invalid_argument(key + ": expected a non-negative integer, got '" + v + "'");
  }
  return static_cast<std::size_t>(n);
}

double to_real(const std::string& key, const std::string& v) {
  try {
    return parse_double(v);
  } catch (const std::invalid_argument&) {
    throw std::invalid_argument(key + ": expected a number, got '" + v + "'");
  }
}

}  // namespace

bool ModelConfig::apply(const std::string& key, const std::string& value) {
  std::map<std::string, std::size_t*> sizes = {
      {"d_model", &d_model},         {"token_layers", &token_layers},
      {"token_heads", &token_heads}, {"context_layers", &context_layers},
      {"context_heads", &context_heads}, {"attn_dim", &attn_dim},
      {"ffn_dim", &ffn_dim},         {"d_k", &d_k},
      {"d_a", &d_a},                 {"lstm_hidden", &lstm_hidden},
      {"knowledge_m", &knowledge_m}, {"max_seq_len", &max_seq_len},
  };
  if (auto it = sizes.find(key); it != sizes.end()) {
    *it->second = to_size(key, value);
    return true;
  }
  if (key == "embed_init") {
    embed_init = to_real(key, value);
    return true;
  }
  if (key == "scale_mode") {
    scale_mode = scale_mode_from_string(value);
    return true;
  }
  if (key == "ablation") {
    ablation = ablation_from_string(value);
    return true;
  }
  return false;
}

std::vector<std::pair<std::string, std::string>> ModelConfig::items() const {
  return {
      {"d_model", std::to_string(d_model)},
      {"token_layers", std::to_string(token_layers)},
      {"token_heads", std::to_string(token_heads)},
      {"context_layers", std::to_string(context_layers)},
      {"context_heads", std::to_string(context_heads)},
      {"attn_dim", std::to_string(attn_dim)},
      {"ffn_dim", std::to_string(ffn_dim)},
      {"d_k", std::to_string(d_k)},
      {"d_a", std::to_string(d_a)},
      {"lstm_hidden", std::to_string(lstm_hidden)},
      {"knowledge_m", std::to_string(knowledge_m)},
      {"max_seq_len", std::to_string(max_seq_len)},
      {"embed_init", format_double(embed_init)},
      {"scale_mode", to_string(scale_mode)},
      {"ablation", to_string(ablation)},
  };
}

void ModelConfig::validate() const {
  auto positive = [](std::size_t v, const char* name) {
    if (v == 0) throw std::invalid_argument(std::string(name) + " must be at least 1");
  };
  positive(d_model, "d_model");
  positive(context_layers, "context_layers");
  positive(attn_dim, "attn_dim");
  positive(ffn_dim, "ffn_dim");
  positive(d_k, "d_k");
  positive(d_a, "d_a");
  positive(lstm_hidden, "lstm_hidden");
  positive(knowledge_m, "knowledge_m");
  positive(max_seq_len, "max_seq_len");
  if (token_heads == 0 || attn_dim % token_heads != 0)
    throw std::invalid_argument("attn_dim must be divisible by token_heads");
  if (context_heads == 0 || attn_dim % context_heads != 0)
    throw std::invalid_argument("attn_dim must be divisible by context_heads");
}

// --- model ---------------------------------------------------------------

Model::Model(ModelConfig config, Vocab vocab, std::vector<std::string> act_labels,
             std::vector<std::string> slot_names, KgEmbeddings embeddings, std::uint64_t seed)
    : config_(config),
      vocab_(std::move(vocab)),
      act_labels_(std::move(act_labels)),
      slot_names_(std::move(slot_names)),
      tag_labels_(slot_tag_inventory(slot_names_)),
      embeddings_(std::move(embeddings)) {
  config_.validate();
  if (act_labels_.empty()) throw std::invalid_argument("model needs at least one act label");
  if (config_.ablation != Ablation::no_kg && embeddings_.dim() != config_.d_k) {
    throw std::invalid_argument("knowledge embeddings have dimension " +
                                std::to_string(embeddings_.dim()) + ", config d_k is " +
                                std::to_string(config_.d_k));
  }
  register_params(seed);
  bind();
}

namespace {

BlockShape block_shape(const ModelConfig& c, std::size_t heads) {
  return {c.d_model, c.attn_dim, c.ffn_dim, heads, c.scale_mode};
}

}  // namespace

void Model::register_params(std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  const auto& c = config_;
  params_.add("tok.embedding", random_normal(vocab_.size(), c.d_model, c.embed_init, rng));
  const auto tok_shape = block_shape(c, c.token_heads);
  for (std::size_t l = 0; l < c.token_layers; ++l)
    register_block(params_, "tok.l" + std::to_string(l), tok_shape, rng);

  if (c.ablation == Ablation::full || c.ablation == Ablation::no_kg) {
    const auto ctx_shape = block_shape(c, c.context_heads);
    for (std::size_t l = 0; l < c.context_layers; ++l)
      register_block(params_, "ctx.l" + std::to_string(l), ctx_shape, rng);
  } else if (c.ablation == Ablation::no_ca) {
    register_lstm(params_, "ctx.lstm", c.d_model, c.d_model, rng);
  }

  if (c.ablation != Ablation::no_kg) register_fusion(params_, {c.d_model, c.d_k, c.d_a}, rng);

  const std::size_t n_tags = tag_labels_.size();
  const std::size_t n_acts = act_labels_.size();
  if (c.ablation == Ablation::no_lstm) {
    params_.add("head.W_slot", xavier_uniform(c.d_model, n_tags, rng));
    params_.add("head.b_slot", Matrix(1, n_tags));
    params_.add("head.W_act", xavier_uniform(c.d_model, n_acts, rng));
    params_.add("head.b_act", Matrix(1, n_acts));
  } else {
    register_lstm(params_, "slot.fwd", c.d_model, c.lstm_hidden, rng);
    register_lstm(params_, "slot.bwd", c.d_model, c.lstm_hidden, rng);
    params_.add("slot.W_c.fwd", xavier_uniform(c.d_model, c.lstm_hidden, rng));
    params_.add("slot.W_c.bwd", xavier_uniform(c.d_model, c.lstm_hidden, rng));
    params_.add("W_slot", xavier_uniform(2 * c.lstm_hidden, n_tags, rng));
    register_lstm(params_, "act.lstm", c.d_model, c.lstm_hidden, rng);
    params_.add("W_act", xavier_uniform(c.lstm_hidden, n_acts, rng));
  }
}

void Model::bind() {
  const auto& c = config_;
  encoder_.embedding = params_.get("tok.embedding");
  encoder_.shape = block_shape(c, c.token_heads);
  encoder_.layers.clear();
  for (std::size_t l = 0; l < c.token_layers; ++l)
    encoder_.layers.push_back(lookup_block(params_, "tok.l" + std::to_string(l), encoder_.shape));

  context_.shape = block_shape(c, c.context_heads);
  context_.layers.clear();
  if (c.ablation == Ablation::full || c.ablation == Ablation::no_kg) {
    for (std::size_t l = 0; l < c.context_layers; ++l)
      context_.layers.push_back(lookup_block(params_, "ctx.l" + std::to_string(l), context_.shape));
  } else if (c.ablation == Ablation::no_ca) {
    context_lstm_ = lookup_lstm(params_, "ctx.lstm");
  }

  if (c.ablation != Ablation::no_kg) fusion_ = lookup_fusion(params_);

  if (c.ablation == Ablation::no_lstm) {
    slot_affine_w_ = params_.get("head.W_slot");
    slot_affine_b_ = params_.get("head.b_slot");
    act_affine_w_ = params_.get("head.W_act");
    act_affine_b_ = params_.get("head.b_act");
  } else {
    slot_decoder_ = {lookup_lstm(params_, "slot.fwd"), lookup_lstm(params_, "slot.bwd"),
                     params_.get("slot.W_c.fwd"), params_.get("slot.W_c.bwd"),
                     params_.get("W_slot")};
    act_decoder_ = {lookup_lstm(params_, "act.lstm"), params_.get("W_act")};
  }
}

PreparedDialogue Model::prepare(const Dialogue& d, const TripleStore& kb) const {
  PreparedDialogue p;
  p.id = d.id;
  const bool use_kg = config_.ablation != Ablation::no_kg;
  const std::size_t n = d.turns.size();
  p.gold_acts = Matrix(n, act_labels_.size());
  for (std::size_t t = 0; t < n; ++t) {
    const auto& u = d.turns[t];
    if (u.tokens.empty() || u.tokens.size() > config_.max_seq_len) {
      throw std::invalid_argument("dialogue " + d.id + " turn " + std::to_string(t) +
                                  ": token count outside [1, " +
                                  std::to_string(config_.max_seq_len) + "]");
    }
    p.tokens.push_back(u.tokens);
    p.ids.push_back(vocab_.ids(u.tokens));
    std::vector<std::vector<KnowledgeTriple>> turn_triples;
    std::vector<TripleVectors> turn_vectors;
    if (use_kg) {
      for (const auto& tok : u.tokens) {
        turn_triples.push_back(retrieve(kb, tok, config_.knowledge_m));
        turn_vectors.push_back(triples_to_vectors(turn_triples.back(), embeddings_, config_.knowledge_m));
      }
    }
    p.triples.push_back(std::move(turn_triples));
    p.knowledge.push_back(std::move(turn_vectors));

    for (const auto& a : u.acts) {
      auto it = std::find(act_labels_.begin(), act_labels_.end(), a);
      if (it == act_labels_.end()) {
        throw std::invalid_argument("dialogue " + d.id + ": act '" + a + "' not in the model's inventory");
      }
      p.gold_acts(t, static_cast<std::size_t>(it - act_labels_.begin())) = 1.0;
    }
    std::vector<std::size_t> tag_ids;
    for (const auto& tag : encode_bio(u.slots, u.tokens.size())) {
      auto it = std::find(tag_labels_.begin(), tag_labels_.end(), tag);
      if (it == tag_labels_.end()) {
        throw std::invalid_argument("dialogue " + d.id + ": tag '" + tag + "' not in the model's inventory");
      }
      tag_ids.push_back(static_cast<std::size_t>(it - tag_labels_.begin()));
    }
    p.gold_tags.push_back(std::move(tag_ids));
  }
  return p;
}

ForwardResult Model::forward(const PreparedDialogue& d) const {
  const std::size_t n = d.ids.size();
  if (n == 0) throw std::invalid_argument("forward: dialogue has no turns");
  ForwardResult out;
  std::vector<TokenReps> reps;
  reps.reserve(n);
  std::vector<Tensor> utterance_rows;
  for (const auto& ids : d.ids) {
    reps.push_back(encode_utterance(ids, encoder_, config_.max_seq_len));
    utterance_rows.push_back(reps.back().utterance);
  }
  const Tensor h = concat_rows(utterance_rows);

  switch (config_.ablation) {
    case Ablation::full:
    case Ablation::no_kg: out.contexts = context_attend(h, context_, config_.context_layers); break;
    case Ablation::no_ca: out.contexts = lstm_sequence(h, zero_state(config_.d_model), context_lstm_); break;
    case Ablation::no_lstm: out.contexts = h; break;
  }

  for (std::size_t t = 0; t < n; ++t) {
    Tensor h_k = reps[t].tokens;
    if (config_.ablation != Ablation::no_kg) {
      auto fused = fuse_utterance(h_k, d.knowledge[t], fusion_);
      h_k = fused.h_k;
      out.fusion.push_back(std::move(fused.diagnostics));
    }
    if (config_.ablation == Ablation::no_lstm) {
      out.slot_logits.push_back(add_row(matmul(h_k, slot_affine_w_), slot_affine_b_));
    } else {
      out.slot_logits.push_back(decode_slots(h_k, slice_rows(out.contexts, t, t + 1), slot_decoder_));
    }
  }
  out.act_logits = config_.ablation == Ablation::no_lstm
                       ? add_row(matmul(out.contexts, act_affine_w_), act_affine_b_)
                       : decode_acts(out.contexts, act_decoder_);
  return out;
}

Tensor Model::loss(const PreparedDialogue& d) const {
  const auto f = forward(d);
  return joint_loss(f.act_logits, f.slot_logits, d.gold_acts, d.gold_tags);
}

std::vector<Prediction> Model::predict(const PreparedDialogue& d, double threshold) const {
  NoGradGuard guard;
  const auto f = forward(d);
  std::vector<Prediction> out;
  for (std::size_t t = 0; t < d.ids.size(); ++t) {
    const auto row = f.act_logits.value().row_span(t);
    Matrix act_row(1, row.size(), std::vector<double>(row.begin(), row.end()));
    out.push_back(kabem::predict(act_row, f.slot_logits[t].value(), threshold, act_labels_, tag_labels_));
  }
  return out;
}

// --- checkpoint ----------------------------------------------------------

namespace {

void write_list(std::ostream& out, const char* tag, const std::vector<std::string>& items) {
  out << tag << ' ' << items.size() << '\n';
  for (const auto& s : items) out << s << '\n';
}

std::vector<std::string> read_list(std::istream& in, const std::string& tag) {
  std::string line;
  if (!std::getline(in, line)) throw std::runtime_error("checkpoint: missing " + tag + " section");
  std::istringstream ss(line);
  std::string got;
  std::size_t count = 0;
  if (!(ss >> got >> count) || got != tag) {
    throw std::runtime_error("checkpoint: expected '" + tag + " <count>', got '" + line + "'");
  }
  std::vector<std::string> items(count);
  for (auto& s : items)
    if (!std::getline(in, s)) throw std::runtime_error("checkpoint: truncated " + tag + " section");
  return items;
}

constexpr const char* kMagic = "kabem-checkpoint v1";

}  // namespace

void Model::write(std::ostream& out) const {
  out << kMagic << '\n';
  const auto items = config_.items();
  out << "config " << items.size() << '\n';
  for (const auto& [k, v] : items) out << k << '=' << v << '\n';
  write_list(out, "vocab", vocab_.tokens());
  write_list(out, "acts", act_labels_);
  write_list(out, "slots", slot_names_);
  out << "embeddings\n";
  embeddings_.save(out);
  out << "end-embeddings\n";
  params_.write(out);
}

void Model::save(const std::filesystem::path& path) const {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  write(out);
  if (!out) throw std::runtime_error("error writing " + path.string());
}

Model Model::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open checkpoint " + path.string());
  std::string line;
  if (!std::getline(in, line) || line != kMagic) {
    throw std::runtime_error(path.string() + ": not a checkpoint (bad header)");
  }
  ModelConfig config;
  for (const auto& kv : read_list(in, "config")) {
    const auto eq = kv.find('=');
    if (eq == std::string::npos || !config.apply(kv.substr(0, eq), kv.substr(eq + 1))) {
      throw std::runtime_error("checkpoint: bad config entry '" + kv + "'");
    }
  }
  Vocab vocab = Vocab::from_tokens(read_list(in, "vocab"));
  auto acts = read_list(in, "acts");
  auto slots = read_list(in, "slots");
  if (!std::getline(in, line) || line != "embeddings") {
    throw std::runtime_error("checkpoint: missing embeddings section");
  }
  KgEmbeddings emb = KgEmbeddings::load(in);
  Model model(config, std::move(vocab), std::move(acts), std::move(slots), std::move(emb), 0);
  model.params_.read_into(in);
  return model;
}

}  // namespace kabem
