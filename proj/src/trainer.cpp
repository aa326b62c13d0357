#include "kabem/trainer.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <ostream>
#include <random>

#include "kabem/adam.hpp"

namespace kabem {

namespace {

std::size_t parse_count(const std::string& key, const std::string& v) {
  std::size_t pos = 0;
  unsigned long long n = 0;
  try {
    n = std::stoull(v, &pos);
  } catch (const std::exception&) {
    pos = 0;
  }
  if (pos == 0 || pos != v.size() || v.front() == '-') {
    throw std::invalid_argument(key + ": expected a non-negative integer, got '" + v + "'");
  }
  return static_cast<std::size_t>(n);
}

double parse_real(const std::string& key, const std::string& v) {
  try {
    return parse_double(v);
  } catch (const std::invalid_argument&) {
    throw std::invalid_argument(key + ": expected a number, got '" + v + "'");
  }
}

}  // namespace

bool TrainConfig::apply(const std::string& key, const std::string& value) {
  if (key == "epochs") epochs = parse_count(key, value);
  else if (key == "lr") lr = parse_real(key, value);
  else if (key == "batch_dialogues") batch_dialogues = parse_count(key, value);
  else if (key == "seed") seed = parse_count(key, value);
  else if (key == "patience") patience = parse_count(key, value);
  else if (key == "val_fraction") val_fraction = parse_real(key, value);
  else if (key == "clip_norm") clip_norm = parse_real(key, value);
  else if (key == "unk_dropout") unk_dropout = parse_real(key, value);
  else if (key == "threshold") threshold = parse_real(key, value);
  else if (key == "kb_epochs") kb_epochs = parse_count(key, value);
  else if (key == "embeddings") embeddings = value;
  else if (key == "checkpoint") checkpoint = value;
  else return model.apply(key, value);
  return true;
}

void TrainConfig::apply_all(const KeyValues& kv) {
  for (const auto& [k, v] : kv) {
    if (!apply(k, v)) throw std::invalid_argument("unknown config key '" + k + "'");
  }
}

std::vector<std::pair<std::string, std::string>> TrainConfig::items() const {
  std::vector<std::pair<std::string, std::string>> out = {
      {"epochs", std::to_string(epochs)},
      {"lr", format_double(lr)},
      {"batch_dialogues", std::to_string(batch_dialogues)},
      {"seed", std::to_string(seed)},
      {"patience", std::to_string(patience)},
      {"val_fraction", format_double(val_fraction)},
      {"clip_norm", format_double(clip_norm)},
      {"unk_dropout", format_double(unk_dropout)},
      {"threshold", format_double(threshold)},
      {"kb_epochs", std::to_string(kb_epochs)},
      {"embeddings", embeddings},
      {"checkpoint", checkpoint},
  };
  for (auto& kv : model.items()) out.push_back(std::move(kv));
  return out;
}

void TrainConfig::validate() const {
  if (epochs < 1) throw std::invalid_argument("epochs must be >= 1");
  if (!(lr > 0.0) || !std::isfinite(lr)) throw std::invalid_argument("lr must be > 0");
  if (batch_dialogues < 1) throw std::invalid_argument("batch_dialogues must be >= 1");
  if (!(val_fraction >= 0.0 && val_fraction < 1.0)) {
    throw std::invalid_argument("val_fraction must lie in [0, 1)");
  }
  if (!(clip_norm >= 0.0)) throw std::invalid_argument("clip_norm must be >= 0");
  if (!(unk_dropout >= 0.0 && unk_dropout < 1.0)) {
    throw std::invalid_argument("unk_dropout must lie in [0, 1)");
  }
  if (!(threshold > 0.0 && threshold < 1.0)) throw std::invalid_argument("threshold must lie in (0, 1)");
  model.validate();
}

std::string RunLog::to_jsonl(bool with_time) const {
  std::string out;
  nlohmann::ordered_json cfg = nlohmann::ordered_json::object();
  for (const auto& [k, v] : config) cfg[k] = v;
  out += nlohmann::ordered_json{{"config", cfg}, {"best_epoch", best_epoch}}.dump() + '\n';
  for (const auto& e : epochs) {
    nlohmann::ordered_json j = {{"epoch", e.epoch},
                                {"train_loss", e.train_loss},
                                {"val_act_accuracy", e.val_act_accuracy},
                                {"val_slot_f1", e.val_slot_f1}};
    if (with_time) j["seconds"] = e.seconds;
    out += j.dump() + '\n';
  }
  return out;
}

std::pair<Corpus, Corpus> split_validation(const Corpus& corpus, double fraction, std::uint64_t seed) {
  if (corpus.empty()) throw std::invalid_argument("training corpus is empty");
  std::vector<std::size_t> order(corpus.size());
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed ^ 0x5eedULL);
  std::shuffle(order.begin(), order.end(), rng);
  std::size_t n_val = static_cast<std::size_t>(std::ceil(fraction * static_cast<double>(corpus.size())));
  if (corpus.size() < 2 || fraction <= 0.0) n_val = 0;
  n_val = std::min(n_val, corpus.size() - 1);
  std::vector<std::size_t> val_idx(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::sort(val_idx.begin(), val_idx.end());
  std::vector<bool> is_val(corpus.size(), false);
  for (auto i : val_idx) is_val[i] = true;
  Corpus train, val;
  for (std::size_t i = 0; i < corpus.size(); ++i) (is_val[i] ? val : train).push_back(corpus[i]);
  // Without a held-out part, model selection falls back to the training data.
  if (val.empty()) val = train;
  return {std::move(train), std::move(val)};
}

KgEmbeddings embeddings_for(const TripleStore& kb, const TrainConfig& config) {
  if (!config.embeddings.empty()) {
    auto emb = KgEmbeddings::load(std::filesystem::path(config.embeddings));
    if (emb.dim() != config.model.d_k) {
      throw std::invalid_argument("embeddings have dimension " + std::to_string(emb.dim()) +
                                  " but d_k is " + std::to_string(config.model.d_k));
    }
    return emb;
  }
  if (config.model.ablation == Ablation::no_kg || kb.empty()) return KgEmbeddings(config.model.d_k);
  TransEOptions opts;
  opts.dim = config.model.d_k;
  opts.epochs = config.kb_epochs;
  opts.seed = config.seed;
  return train_transe(kb, opts);
}

namespace {

double validation_score(const Model& model, const std::vector<PreparedDialogue>& val,
                        const Corpus& val_corpus, double threshold, EpochLog& log) {
  std::vector<std::set<std::string>> pred_acts, gold_acts;
  std::vector<TagSequence> pred_tags, gold_tags;
  for (std::size_t i = 0; i < val.size(); ++i) {
    const auto preds = model.predict(val[i], threshold);
    for (std::size_t t = 0; t < preds.size(); ++t) {
      const auto& u = val_corpus[i].turns[t];
      pred_acts.push_back(preds[t].acts);
      gold_acts.push_back(u.acts);
      pred_tags.push_back(preds[t].tags);
      gold_tags.push_back(encode_bio(u.slots, u.tokens.size()));
    }
  }
  const auto r = make_report(pred_acts, gold_acts, pred_tags, gold_tags);
  log.val_act_accuracy = r.act_accuracy;
  log.val_slot_f1 = r.slot_f1;
  return r.act_accuracy + r.slot_f1;
}

}  // namespace

Model train(const Corpus& corpus, const TripleStore& kb, const std::vector<std::string>& acts,
            const std::vector<std::string>& slots, const TrainConfig& config, RunLog* log,
            std::ostream* progress) {
  config.validate();
  auto [train_set, val_set] = split_validation(corpus, config.val_fraction, config.seed);

  Model model(config.model, Vocab::build(train_set), acts, slots, embeddings_for(kb, config), config.seed);
  std::vector<PreparedDialogue> train_prep, val_prep;
  for (const auto& d : train_set) train_prep.push_back(model.prepare(d, kb));
  for (const auto& d : val_set) val_prep.push_back(model.prepare(d, kb));

  RunLog local;
  RunLog& run = log ? *log : local;
  run = RunLog{};
  run.config = config.items();

  AdamState adam;
  AdamOptions opts;
  opts.lr = config.lr;
  std::mt19937_64 rng(config.seed);
  std::bernoulli_distribution drop(config.unk_dropout);

  ParamStore best = model.params().clone();
  double best_score = -1.0;
  std::size_t since_best = 0;
  std::vector<std::size_t> order(train_prep.size());
  std::iota(order.begin(), order.end(), 0);

  for (std::size_t epoch = 1; epoch <= config.epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), rng);
    double loss_sum = 0.0;
    std::size_t batch_no = 0;
    for (std::size_t b = 0; b < order.size(); b += config.batch_dialogues) {
      ++batch_no;
      const std::size_t e = std::min(order.size(), b + config.batch_dialogues);
      const double inv = 1.0 / static_cast<double>(e - b);
      model.params().zero_grad();
      for (std::size_t i = b; i < e; ++i) {
        const PreparedDialogue* d = &train_prep[order[i]];
        PreparedDialogue masked;
        if (config.unk_dropout > 0.0) {
          masked = *d;
          for (auto& ids : masked.ids)
            for (auto& id : ids)
              if (drop(rng)) id = Vocab::kUnk;
          d = &masked;
        }
        Tensor l = model.loss(*d);
        const double v = l.item();
        if (!std::isfinite(v)) {
          throw TrainingDiverged("training diverged at epoch " + std::to_string(epoch) + ", batch " +
                                 std::to_string(batch_no) + ": loss is " + format_double(v) +
                                 " on dialogue '" + d->id + "'");
        }
        loss_sum += v;
        scale(l, inv).backward();
      }
      if (config.clip_norm > 0.0) clip_grad_norm(model.params(), config.clip_norm);
      try {
        adam_update(model.params(), adam, opts);
      } catch (const std::runtime_error& err) {
        throw TrainingDiverged("training diverged at epoch " + std::to_string(epoch) + ", batch " +
                               std::to_string(batch_no) + ": " + err.what());
      }
    }

    EpochLog entry;
    entry.epoch = epoch;
    entry.train_loss = loss_sum / static_cast<double>(train_prep.size());
    const double s = validation_score(model, val_prep, val_set, config.threshold, entry);
    entry.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    run.epochs.push_back(entry);
    if (progress) {
      *progress << "epoch " << epoch << " loss " << entry.train_loss << " val_act "
                << entry.val_act_accuracy << " val_f1 " << entry.val_slot_f1 << " (" << entry.seconds
                << "s)\n";
      progress->flush();
    }
    if (s > best_score) {
      best_score = s;
      best.copy_values_from(model.params());
      run.best_epoch = epoch;
      since_best = 0;
    } else if (config.patience > 0 && ++since_best >= config.patience) {
      break;
    }
  }
  model.params().copy_values_from(best);
  return model;
}

std::vector<TurnPrediction> predict_corpus(const Model& model, const Corpus& corpus,
                                           const TripleStore& kb, double threshold, bool explain) {
  std::vector<TurnPrediction> out;
  NoGradGuard guard;
  for (const auto& d : corpus) {
    const auto prep = model.prepare(d, kb);
    const auto f = model.forward(prep);
    for (std::size_t t = 0; t < prep.ids.size(); ++t) {
      TurnPrediction p;
      p.dialogue_id = d.id;
      p.turn = t;
      const auto row = f.act_logits.value().row_span(t);
      Matrix act_row(1, row.size(), std::vector<double>(row.begin(), row.end()));
      p.prediction = predict(act_row, f.slot_logits[t].value(), threshold, model.act_labels(),
                             model.tag_labels());
      if (explain) {
        p.triples = prep.triples[t];
        if (!f.fusion.empty()) p.fusion = f.fusion[t];
      }
      out.push_back(std::move(p));
    }
  }
  return out;
}

namespace {

void check_alignment(const Corpus& gold, const std::vector<TurnPrediction>& preds) {
  std::size_t k = 0;
  for (const auto& d : gold) {
    for (std::size_t t = 0; t < d.turns.size(); ++t, ++k) {
      if (k >= preds.size() || preds[k].dialogue_id != d.id || preds[k].turn != t) {
        throw std::invalid_argument("predictions do not align with the gold corpus at dialogue '" +
                                    d.id + "' turn " + std::to_string(t));
      }
      if (preds[k].prediction.tags.size() != d.turns[t].tokens.size()) {
        throw std::invalid_argument("dialogue '" + d.id + "' turn " + std::to_string(t) + ": " +
                                    std::to_string(preds[k].prediction.tags.size()) + " tags for " +
                                    std::to_string(d.turns[t].tokens.size()) + " tokens");
      }
    }
  }
  if (k != preds.size()) {
    throw std::invalid_argument(std::to_string(preds.size()) + " predictions for " +
                                std::to_string(k) + " gold turns");
  }
}

}  // namespace

EvalReport score(const Corpus& gold, const std::vector<TurnPrediction>& preds) {
  check_alignment(gold, preds);
  std::vector<std::set<std::string>> pred_acts, gold_acts;
  std::vector<TagSequence> pred_tags, gold_tags;
  std::size_t k = 0;
  for (const auto& d : gold) {
    for (const auto& u : d.turns) {
      pred_acts.push_back(preds[k].prediction.acts);
      pred_tags.push_back(preds[k].prediction.tags);
      gold_acts.push_back(u.acts);
      gold_tags.push_back(encode_bio(u.slots, u.tokens.size()));
      ++k;
    }
  }
  return make_report(pred_acts, gold_acts, pred_tags, gold_tags);
}

EvalReport evaluate(const Model& model, const Corpus& corpus, const TripleStore& kb, double threshold) {
  return score(corpus, predict_corpus(model, corpus, kb, threshold));
}

SubsetScores score_subsets(const Corpus& gold, const std::vector<TurnPrediction>& preds) {
  check_alignment(gold, preds);
  SubsetScores s;
  SpanCounts kb;
  std::size_t ctx_hit = 0;
  std::size_t k = 0;
  for (const auto& d : gold) {
    for (const auto& u : d.turns) {
      const auto& p = preds[k++].prediction;
      if (u.context_act) {
        ++s.context_turns;
        ctx_hit += p.acts == u.acts;
      }
      if (u.kb_only_spans.empty()) continue;
      std::vector<SlotSpan> targets;
      for (auto i : u.kb_only_spans) targets.push_back(u.slots.at(i));
      kb.gold += targets.size();
      for (const auto& span : decode_bio(repair_bio(p.tags))) {
        const bool overlaps = std::any_of(targets.begin(), targets.end(), [&](const SlotSpan& g) {
          return span.start < g.end && g.start < span.end;
        });
        if (!overlaps) continue;
        ++kb.predicted;
        kb.true_positive += std::find(targets.begin(), targets.end(), span) != targets.end();
      }
    }
  }
  s.knowledge_spans = kb.gold;
  s.knowledge_slot_f1 = kb.f1();
  s.context_act_accuracy =
      s.context_turns == 0 ? 0.0 : static_cast<double>(ctx_hit) / static_cast<double>(s.context_turns);
  return s;
}

nlohmann::json prediction_to_json(const TurnPrediction& p, const Model& model, bool explain) {
  nlohmann::ordered_json probs = nlohmann::ordered_json::object();
  for (std::size_t a = 0; a < model.act_labels().size(); ++a) {
    probs[model.act_labels()[a]] = p.prediction.act_probs[a];
  }
  nlohmann::ordered_json j = {{"dialogue_id", p.dialogue_id},
                              {"turn", p.turn},
                              {"acts", p.prediction.acts},
                              {"act_probs", probs},
                              {"tags", p.prediction.tags}};
  if (explain) {
    nlohmann::ordered_json tokens = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < p.triples.size(); ++i) {
      nlohmann::ordered_json kn = nlohmann::ordered_json::array();
      for (std::size_t r = 0; r < p.triples[i].size(); ++r) {
        const auto& tr = p.triples[i][r];
        nlohmann::ordered_json e = {{"head", tr.head}, {"relation", tr.relation}, {"tail", tr.tail},
                                    {"weight", tr.weight}};
        if (p.fusion) e["alpha"] = p.fusion->alpha[i][r];
        kn.push_back(std::move(e));
      }
      nlohmann::ordered_json tok = {{"index", i}, {"knowledge", kn}};
      if (p.fusion) {
        tok["gate"] = p.fusion->gate[i];
        if (p.triples[i].empty()) tok["alpha"] = p.fusion->alpha[i];
      }
      tokens.push_back(std::move(tok));
    }
    j["explain"] = tokens;
  }
  return nlohmann::json::parse(j.dump());
}

}  // namespace kabem
