#include <doctest.h>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "fixtures.hpp"
#include "kabem/grad_check.hpp"
#include "kabem/trainer.hpp"

using namespace kabem;
namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kActs = {"request", "inform", "offer"};
const std::vector<std::string> kSlots = {"pricing", "genre", "date", "starttime"};

Model toy_model(Ablation a, std::uint64_t seed = 0) {
  const TripleStore kb(fixture::toy_triples());
  TransEOptions opts;
  opts.dim = 4;
  opts.epochs = 20;
  return Model(fixture::tiny_model(a), Vocab::build({fixture::toy_dialogue()}), kActs, kSlots,
               train_transe(kb, opts), seed);
}

TrainConfig quick_config(Ablation a = Ablation::full) {
  TrainConfig cfg;
  cfg.model = fixture::tiny_model(a);
  cfg.epochs = 2;
  cfg.kb_epochs = 20;
  cfg.lr = 5e-3;
  return cfg;
}

std::string serialize(const Model& m) {
  std::ostringstream s;
  m.write(s);
  return s.str();
}

}  // namespace

TEST_CASE("end-to-end gradients for every variant") {
  // Central differences on a loss near 5 carry about 5e-11 of rounding noise,
  // so a coordinate whose true gradient is near 1e-8 fails the relative test
  // whatever the backward pass does. At init seed 11 no coordinate of any
  // variant falls in that band; the next case covers other seeds.
  const TripleStore kb(fixture::toy_triples());
  for (const Ablation a : kAllAblations) {
    CAPTURE(to_string(a));
    Model m = toy_model(a, 11);
    const auto prep = m.prepare(fixture::toy_dialogue(), kb);
    const auto report = grad_check_params([&] { return m.loss(prep); }, m.params());
    CAPTURE(report.worst_param);
    CAPTURE(report.worst_analytic);
    CAPTURE(report.worst_numeric);
    CHECK(report.max_relative_error < 1e-4);
    CHECK(report.coordinates_checked == m.params().scalar_count());
  }
}

TEST_CASE("end-to-end gradient mismatch stays at the rounding floor") {
  const TripleStore kb(fixture::toy_triples());
  for (std::uint64_t seed = 0; seed < 3; ++seed)
    for (const Ablation a : kAllAblations) {
      CAPTURE(seed);
      CAPTURE(to_string(a));
      Model m = toy_model(a, seed);
      const auto prep = m.prepare(fixture::toy_dialogue(), kb);
      const auto report = grad_check_params([&] { return m.loss(prep); }, m.params(), 1e-5, 8);
      CAPTURE(report.worst_param);
      const double gap = std::fabs(report.worst_analytic - report.worst_numeric);
      CHECK((report.max_relative_error < 1e-4 || gap < 2e-10));
    }
}

TEST_CASE("dialogue gradient is the sum of per-turn gradients") {
  const TripleStore kb(fixture::toy_triples());
  Model m = toy_model(Ablation::full);
  const auto prep = m.prepare(fixture::toy_dialogue(), kb);
  m.params().zero_grad();
  m.loss(prep).backward();
  std::map<std::string, Matrix> whole;
  for (auto& [name, t] : m.params()) whole[name] = t.grad();

  m.params().zero_grad();
  for (std::size_t t = 0; t < 2; ++t) {
    const auto f = m.forward(prep);
    Matrix gold(1, kActs.size());
    for (std::size_t a = 0; a < kActs.size(); ++a) gold[a] = prep.gold_acts(t, a);
    add(bce_with_logits(slice_rows(f.act_logits, t, t + 1), gold),
        cross_entropy_rows(f.slot_logits[t], prep.gold_tags[t]))
        .backward();
  }
  for (auto& [name, t] : m.params()) {
    const Matrix g = t.grad();
    for (std::size_t i = 0; i < g.size(); ++i) CHECK(g[i] == doctest::Approx(whole[name][i]).epsilon(1e-10));
  }
}

TEST_CASE("prepare rejects labels outside the inventories") {
  const TripleStore kb;
  const Model m = toy_model(Ablation::full);
  auto d = fixture::toy_dialogue();
  d.turns[0].acts = {"dance"};
  CHECK_THROWS(m.prepare(d, kb));
  d = fixture::toy_dialogue();
  d.turns[0].slots = {{"colour", 0, 1}};
  CHECK_THROWS(m.prepare(d, kb));
}

TEST_CASE("no_kg output ignores the knowledge base; full does not") {
  const TripleStore kb(fixture::toy_triples());
  TripleStore other;
  other.insert({"cheap", "related to", "chintzy", 1.0});
  other.insert({"comedy", "is a", "drama", 1.0});
  const auto d = fixture::toy_dialogue();

  const Model plain = toy_model(Ablation::no_kg);
  const auto a = plain.forward(plain.prepare(d, kb));
  const auto b = plain.forward(plain.prepare(d, other));
  const auto c = plain.forward(plain.prepare(d, TripleStore{}));
  CHECK(a.act_logits.value() == b.act_logits.value());
  CHECK(a.act_logits.value() == c.act_logits.value());
  for (std::size_t t = 0; t < 2; ++t) CHECK(a.slot_logits[t].value() == b.slot_logits[t].value());

  const Model full = toy_model(Ablation::full);
  const auto x = full.forward(full.prepare(d, kb));
  const auto y = full.forward(full.prepare(d, other));
  CHECK_FALSE(x.slot_logits[0].value() == y.slot_logits[0].value());
}

TEST_CASE("no_ca keeps turn causality") {
  const TripleStore kb(fixture::toy_triples());
  const Model m = toy_model(Ablation::no_ca);
  auto d = fixture::toy_dialogue();
  const auto before = m.forward(m.prepare(d, kb));
  d.turns[1].tokens = {"totally", "different", "words"};
  d.turns[1].slots.clear();
  const auto after = m.forward(m.prepare(d, kb));
  const auto r0 = before.act_logits.value().row_span(0), r1 = after.act_logits.value().row_span(0);
  CHECK(std::equal(r0.begin(), r0.end(), r1.begin()));
  CHECK(before.slot_logits[0].value() == after.slot_logits[0].value());
}

TEST_CASE("every prediction is valid BIO") {
  const auto data = fixture::small_data(6, 6, 3);
  const TripleStore kb(data.kb);
  TransEOptions opts;
  opts.dim = 4;
  opts.epochs = 5;
  for (const Ablation a : kAllAblations) {
    const Model m(fixture::tiny_model(a), Vocab::build(data.train), data.acts, data.slots,
                  train_transe(kb, opts), 7);
    for (const auto& p : predict_corpus(m, data.test, kb)) {
      CHECK(is_valid_bio(p.prediction.tags));
      CHECK_FALSE(p.prediction.acts.empty());
    }
  }
}

TEST_CASE("all four variants train on a smoke corpus") {
  const auto data = fixture::small_data(10, 4);
  const TripleStore kb(data.kb);
  for (const Ablation a : kAllAblations) {
    CAPTURE(to_string(a));
    RunLog log;
    const Model m = train(data.train, kb, data.acts, data.slots, quick_config(a), &log);
    CHECK(log.epochs.size() == 2);
    CHECK(log.epochs[0].epoch == 1);
    CHECK(log.epochs[1].epoch == 2);
    const auto r = evaluate(m, data.test, kb);
    CHECK(r.utterances > 0);
  }
}

TEST_CASE("training is reproducible") {
  const auto data = fixture::small_data(10, 2);
  const TripleStore kb(data.kb);
  RunLog a, b;
  const Model m1 = train(data.train, kb, data.acts, data.slots, quick_config(), &a);
  const Model m2 = train(data.train, kb, data.acts, data.slots, quick_config(), &b);
  CHECK(a.to_jsonl(false) == b.to_jsonl(false));
  CHECK(serialize(m1) == serialize(m2));

  auto other = quick_config();
  other.seed = 1;
  CHECK_FALSE(serialize(train(data.train, kb, data.acts, data.slots, other)) == serialize(m1));
}

TEST_CASE("loss falls and the kept checkpoint is the best one") {
  const auto data = fixture::small_data(40, 2);
  const TripleStore kb(data.kb);
  auto cfg = quick_config();
  cfg.epochs = 8;
  cfg.patience = 0;
  RunLog log;
  train(data.train, kb, data.acts, data.slots, cfg, &log);
  REQUIRE(log.epochs.size() == 8);
  CHECK(log.epochs[4].train_loss < log.epochs[0].train_loss);
  const auto& best = log.epochs.at(log.best_epoch - 1);
  for (const auto& e : log.epochs)
    CHECK(best.val_act_accuracy + best.val_slot_f1 >= e.val_act_accuracy + e.val_slot_f1);
  CHECK(best.val_slot_f1 + best.val_act_accuracy >= log.epochs.back().val_slot_f1 + log.epochs.back().val_act_accuracy);
}

TEST_CASE("an overfit model recalls its training acts") {
  const auto data = fixture::small_data(20, 2, 5);
  const TripleStore kb(data.kb);
  auto cfg = quick_config();
  cfg.model.d_model = cfg.model.attn_dim = 16;
  cfg.model.lstm_hidden = 16;
  cfg.epochs = 300;
  cfg.patience = 0;
  cfg.val_fraction = 0.0;
  const Model m = train(data.train, kb, data.acts, data.slots, cfg);
  CHECK(evaluate(m, data.train, kb).act_accuracy >= 0.95);
}

TEST_CASE("divergence names the epoch and batch") {
  const auto data = fixture::small_data(6, 2);
  const TripleStore kb(data.kb);
  const fs::path path = fs::temp_directory_path() / "kabem_tests" / "nan.emb";
  fs::create_directories(path.parent_path());
  {
    KgEmbeddings emb(4);
    for (const auto& t : data.kb) {
      emb.entities()[t.head] = {NAN, NAN, NAN, NAN};
      emb.entities()[t.tail] = {NAN, NAN, NAN, NAN};
      emb.relations()[t.relation] = {NAN, NAN, NAN, NAN};
    }
    emb.save(path);
  }
  auto cfg = quick_config();
  cfg.embeddings = path.string();
  CHECK_THROWS_WITH_AS(train(data.train, kb, data.acts, data.slots, cfg),
                       doctest::Contains("epoch 1, batch 1"), TrainingDiverged);
}

TEST_CASE("checkpoints round trip and evaluation leaves them untouched") {
  const auto data = fixture::small_data(8, 3);
  const TripleStore kb(data.kb);
  const Model m = train(data.train, kb, data.acts, data.slots, quick_config());
  const fs::path path = fs::temp_directory_path() / "kabem_tests" / "rt.ckpt";
  fs::create_directories(path.parent_path());
  m.save(path);
  std::ifstream in(path);
  const std::string before((std::istreambuf_iterator<char>(in)), {});

  const Model back = Model::load(path);
  CHECK(serialize(back) == before);
  const auto p1 = predict_corpus(m, data.test, kb), p2 = predict_corpus(back, data.test, kb);
  REQUIRE(p1.size() == p2.size());
  for (std::size_t i = 0; i < p1.size(); ++i) {
    CHECK(p1[i].prediction.act_probs == p2[i].prediction.act_probs);
    CHECK(p1[i].prediction.tags == p2[i].prediction.tags);
  }
  evaluate(back, data.test, kb);
  std::ifstream again(path);
  CHECK(std::string((std::istreambuf_iterator<char>(again)), {}) == before);
}

TEST_CASE("train config parsing") {
  TrainConfig cfg;
  std::istringstream in("# comment\nepochs = 3\nlr=5e-5\nablation=no_ca\nd_model=32\n");
  cfg.apply_all(parse_key_values(in, "test"));
  CHECK(cfg.epochs == 3);
  CHECK(cfg.lr == 5e-5);
  CHECK(cfg.model.ablation == Ablation::no_ca);
  CHECK(cfg.model.d_model == 32);
  CHECK_THROWS(cfg.apply_all({{"colour", "red"}}));
  CHECK_THROWS(cfg.apply_all({{"epochs", "-1"}}));
  CHECK_THROWS(cfg.apply_all({{"ablation", "no_everything"}}));
  cfg.epochs = 0;
  CHECK_THROWS(cfg.validate());
  cfg.epochs = 1;
  cfg.lr = 0.0;
  CHECK_THROWS(cfg.validate());
}

TEST_CASE("validation split is deterministic and disjoint") {
  const auto data = fixture::small_data(30, 1);
  const auto [t1, v1] = split_validation(data.train, 0.1, 4);
  const auto [t2, v2] = split_validation(data.train, 0.1, 4);
  CHECK(t1 == t2);
  CHECK(v1 == v2);
  CHECK(v1.size() == 3);
  CHECK(t1.size() == 27);
  for (const auto& d : v1)
    for (const auto& e : t1) CHECK(d.id != e.id);
}

TEST_CASE("subset scores") {
  Dialogue d;
  d.id = "s";
  Utterance u;
  u.tokens = {"how", "about", "zorba"};
  u.acts = {"inform"};
  u.slots = {{"city", 2, 3}};
  u.kb_only_spans = {0};
  Utterance v;
  v.tokens = {"sure"};
  v.acts = {"accept"};
  v.context_act = true;
  d.turns = {u, v};
  std::vector<TurnPrediction> preds(2);
  preds[0].dialogue_id = preds[1].dialogue_id = "s";
  preds[1].turn = 1;
  preds[0].prediction.acts = {"inform"};
  preds[0].prediction.tags = {"B-city", "O", "B-genre"};
  preds[1].prediction.acts = {"affirm"};
  preds[1].prediction.tags = {"O"};
  const auto s = score_subsets({d}, preds);
  CHECK(s.knowledge_spans == 1);
  CHECK(s.knowledge_slot_f1 == 0.0);  // only the overlapping genre span counts, and it is wrong
  CHECK(s.context_turns == 1);
  CHECK(s.context_act_accuracy == 0.0);
  preds[0].prediction.tags = {"B-city", "O", "B-city"};
  preds[1].prediction.acts = {"accept"};
  const auto t = score_subsets({d}, preds);
  CHECK(t.knowledge_slot_f1 == 1.0);
  CHECK(t.context_act_accuracy == 1.0);
}
