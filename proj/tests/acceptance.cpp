// Acceptance suite: one PASS/FAIL line per criterion.
//   kabem_acceptance            all criteria
//   kabem_acceptance 1 3 6      a subset

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <numeric>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <tuple>
#include <vector>

#include "fixtures.hpp"
#include "kabem/cli.hpp"
#include "kabem/decoder.hpp"
#include "kabem/encoder.hpp"
#include "kabem/fusion.hpp"
#include "kabem/grad_check.hpp"
#include "kabem/metrics.hpp"
#include "kabem/synth.hpp"
#include "kabem/trainer.hpp"
#include "oracles.hpp"

using namespace kabem;
namespace fs = std::filesystem;

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t) {
  return std::chrono::duration<double>(Clock::now() - t).count();
}

Tensor c(const Matrix& m) { return Tensor::constant(m); }

std::vector<double> row_of(const Matrix& m, std::size_t r = 0) {
  const auto s = m.row_span(r);
  return {s.begin(), s.end()};
}

struct Outcome {
  bool pass = true;
  std::ostringstream detail;

  void require(bool ok, const std::string& what) {
    if (!ok) {
      pass = false;
      detail << " [failed: " << what << "]";
    }
  }
};

// --- 1. gradients ----------------------------------------------------------

struct GradTally {
  double worst = 0.0;
  std::string where;

  void add(const std::string& name, double err) {
    if (err >= worst) {
      worst = err;
      where = name;
    }
  }
};

FfnParams register_ffn(ParamStore& store, std::size_t d, std::size_t hidden, std::mt19937_64& rng) {
  FfnParams p;
  p.w1 = store.add("W1", oracle::random_matrix(d, hidden, rng));
  p.b1 = store.add("b1", oracle::random_matrix(1, hidden, rng));
  p.w2 = store.add("W2", oracle::random_matrix(hidden, d, rng));
  p.b2 = store.add("b2", oracle::random_matrix(1, d, rng));
  return p;
}

FusionParams random_fusion(ParamStore& store, std::size_t d, std::size_t dk, std::size_t da,
                           std::mt19937_64& rng) {
  FusionParams p = register_fusion(store, {d, dk, da}, rng);
  store.get("kg.b_g").mutable_value()[0] = std::uniform_real_distribution<double>(-1, 1)(rng);
  return p;
}

Outcome gradients() {
  Outcome o;
  const auto start = Clock::now();
  std::map<std::string, GradTally> tally;

  for (std::uint64_t seed = 0; seed < 3; ++seed) {
    std::mt19937_64 rng(seed);

    {  // multi-head attention, with and without the output map
      for (const std::size_t attn : {4u, 6u}) {
        ParamStore store;
        const BlockShape shape{4, attn, 8, 2, ScaleMode::per_head};
        const auto block = register_block(store, "b", shape, rng);
        const Matrix x = oracle::random_matrix(3, 4, rng), probe = oracle::random_matrix(3, 4, rng);
        for (const bool causal : {false, true}) {
          const auto f = [&](const Tensor& in) {
            return sum(mul(mha(in, in, in, causal, block.attn, 2, shape.scale()), c(probe)));
          };
          tally["MHA"].add("input", grad_check(f, x));
          const auto loss = [&] { return f(c(x)); };
          const auto r = grad_check_params(loss, store);
          tally["MHA"].add(r.worst_param, r.max_relative_error);
        }
      }
    }
    {  // feed-forward
      ParamStore store;
      const auto p = register_ffn(store, 3, 5, rng);
      const Matrix x = oracle::random_matrix(4, 3, rng), probe = oracle::random_matrix(4, 3, rng);
      const auto f = [&](const Tensor& in) { return sum(mul(ffn(in, p), c(probe))); };
      tally["FFN"].add("input", grad_check(f, x));
      const auto r = grad_check_params([&] { return f(c(x)); }, store);
      tally["FFN"].add(r.worst_param, r.max_relative_error);
    }
    {  // knowledge attention and gate
      ParamStore store;
      const auto p = random_fusion(store, 6, 3, 4, rng);
      const Matrix h = oracle::random_matrix(1, 6, rng), r = oracle::random_matrix(3, 3, rng),
                   t = oracle::random_matrix(3, 3, rng), pv = oracle::random_matrix(1, 6, rng),
                   pa = oracle::random_matrix(1, 3, rng), ph = oracle::random_matrix(1, 6, rng);
      const auto att = [&](const Tensor& in) {
        const auto a = knowledge_attention(in, c(r), c(t), p);
        return add(sum(mul(a.v, c(pv))), sum(mul(a.alpha, c(pa))));
      };
      tally["knowledge attention"].add("h", grad_check(att, h));
      const auto ra = grad_check_params([&] { return att(c(h)); }, store);
      tally["knowledge attention"].add(ra.worst_param, ra.max_relative_error);

      const Matrix v = oracle::random_matrix(1, 6, rng);
      const auto gate = [&](const Tensor& hv) {
        return sum(mul(gate_fuse(slice_cols(hv, 0, 6), slice_cols(hv, 6, 12), p).h_prime, c(ph)));
      };
      Matrix hv(1, 12);
      for (std::size_t k = 0; k < 6; ++k) {
        hv[k] = h[k];
        hv[6 + k] = v[k];
      }
      tally["gate"].add("[h; v]", grad_check(gate, hv));
      const auto rg = grad_check_params([&] { return gate(c(hv)); }, store);
      tally["gate"].add(rg.worst_param, rg.max_relative_error);
    }
    {  // LSTM cell
      ParamStore store;
      const auto cell = register_lstm(store, "l", 3, 4, rng);
      store.get("l.b").mutable_value() = oracle::random_matrix(1, 16, rng);
      const Matrix x = oracle::random_matrix(1, 3, rng), h0 = oracle::random_matrix(1, 4, rng),
                   c0 = oracle::random_matrix(1, 4, rng), ph = oracle::random_matrix(1, 4, rng),
                   pc = oracle::random_matrix(1, 4, rng);
      const auto f = [&](const Tensor& in) {
        const auto s = lstm_cell(matmul(in, cell.w_x), {c(h0), c(c0)}, cell);
        return add(sum(mul(s.h, c(ph))), sum(mul(s.c, c(pc))));
      };
      tally["LSTM cell"].add("x", grad_check(f, x));
      const auto r = grad_check_params([&] { return f(c(x)); }, store);
      tally["LSTM cell"].add(r.worst_param, r.max_relative_error);
    }
    {  // BCE + CE joint loss
      const Matrix a = oracle::random_matrix(2, 3, rng, 3.0), s0 = oracle::random_matrix(2, 4, rng, 3.0),
                   s1 = oracle::random_matrix(3, 4, rng, 3.0);
      const Matrix gold(2, 3, std::vector<double>{1, 0, 1, 0, 0, 1});
      const std::vector<std::vector<std::size_t>> tags = {{0, 3}, {2, 2, 1}};
      tally["joint loss"].add("act logits", grad_check([&](const Tensor& x) {
        return joint_loss(x, {c(s0), c(s1)}, gold, tags);
      }, a));
      tally["joint loss"].add("slot logits", grad_check([&](const Tensor& x) {
        return joint_loss(c(a), {c(s0), x}, gold, tags);
      }, s1));
    }
  }

  {  // end to end, every variant, every coordinate
    const TripleStore kb(fixture::toy_triples());
    TransEOptions opts;
    opts.dim = 4;
    opts.epochs = 20;
    const auto emb = train_transe(kb, opts);
    for (const Ablation a : kAllAblations) {
      Model m(fixture::tiny_model(a), Vocab::build({fixture::toy_dialogue()}), {"request", "inform", "offer"},
              {"pricing", "genre", "date", "starttime"}, emb, 11);
      const auto prep = m.prepare(fixture::toy_dialogue(), kb);
      const auto r = grad_check_params([&] { return m.loss(prep); }, m.params());
      tally["end to end"].add(to_string(a) + ":" + r.worst_param, r.max_relative_error);
    }
  }

  const double elapsed = seconds_since(start);
  for (const auto& [name, t] : tally) {
    o.detail << ' ' << name << '=' << t.worst;
    o.require(t.worst < 1e-4, name + " at " + t.where);
  }
  o.detail << " time=" << elapsed << 's';
  o.require(elapsed < 120.0, "runtime");
  return o;
}

// --- 2. oracles ------------------------------------------------------------

Outcome oracles() {
  Outcome o;
  std::map<std::string, double> worst;
  std::map<std::string, std::size_t> count;
  std::size_t metric_mismatch = 0;
  const std::vector<std::string> names = {"pricing", "numberofpeople", "date", "starttime", "city"};

  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    std::uniform_int_distribution<std::size_t> rows(1, 5), m_dist(1, 5);
    for (int trial = 0; trial < 10; ++trial) {
      {
        ParamStore store;
        const std::size_t attn = trial % 2 ? 4 : 6;
        const BlockShape shape{4, attn, 8, 2, ScaleMode::per_head};
        const auto b = register_block(store, "b", shape, rng);
        const Matrix x = oracle::random_matrix(rows(rng), 4, rng);
        const bool causal = trial % 3 == 0;
        const Matrix got = mha(c(x), c(x), c(x), causal, b.attn, 2, shape.scale()).value();
        const Matrix want = oracle::mha(x, x, x, b.attn.wq.value(), b.attn.wk.value(), b.attn.wv.value(),
                                        b.attn.wo.defined() ? b.attn.wo.value() : Matrix(), 2,
                                        shape.scale(), causal);
        worst["MHA"] = std::max(worst["MHA"], oracle::max_abs_diff(got, want));
        ++count["MHA"];
      }
      ParamStore store;
      const auto p = random_fusion(store, 6, 3, 4, rng);
      {
        const std::size_t m = m_dist(rng);
        const Matrix h = oracle::random_matrix(1, 6, rng), r = oracle::random_matrix(m, 3, rng),
                     t = oracle::random_matrix(m, 3, rng);
        const auto got = knowledge_attention(c(h), c(r), c(t), p);
        const auto want = oracle::knowledge_attention(h, r, t, p.w_h.value(), p.w_r.value(), p.w_t.value(),
                                                      p.v_proj.value());
        double d = 0.0;
        for (std::size_t j = 0; j < m; ++j) d = std::max(d, std::fabs(got.alpha.value()[j] - want.alpha[j]));
        for (std::size_t k = 0; k < 6; ++k) d = std::max(d, std::fabs(got.v.value()[k] - want.v[k]));
        worst["knowledge attention"] = std::max(worst["knowledge attention"], d);
        ++count["knowledge attention"];
      }
      {
        const Matrix h = oracle::random_matrix(1, 6, rng), v = oracle::random_matrix(1, 6, rng);
        const auto got = gate_fuse(c(h), c(v), p);
        const auto want = oracle::gate(row_of(h), row_of(v), p.w_g.value(), p.b_g.value()[0]);
        double d = std::fabs(got.gate.item() - want.g);
        for (std::size_t k = 0; k < 6; ++k) d = std::max(d, std::fabs(got.h_prime.value()[k] - want.h_prime[k]));
        worst["gate"] = std::max(worst["gate"], d);
        ++count["gate"];
      }
      {
        ParamStore ls;
        const auto cell = register_lstm(ls, "l", 3, 4, rng);
        ls.get("l.b").mutable_value() = oracle::random_matrix(1, 16, rng);
        const Matrix x = oracle::random_matrix(1, 3, rng), h0 = oracle::random_matrix(1, 4, rng),
                     c0 = oracle::random_matrix(1, 4, rng, 2.0);
        const auto got = lstm_cell(matmul(c(x), cell.w_x), {c(h0), c(c0)}, cell);
        const auto want = oracle::lstm_cell(row_of(x), row_of(h0), row_of(c0), cell.w_x.value(),
                                            cell.w_h.value(), cell.b.value());
        double d = 0.0;
        for (std::size_t k = 0; k < 4; ++k) {
          d = std::max(d, std::fabs(got.h.value()[k] - want.first[k]));
          d = std::max(d, std::fabs(got.c.value()[k] - want.second[k]));
        }
        worst["LSTM cell"] = std::max(worst["LSTM cell"], d);
        ++count["LSTM cell"];
      }
      {
        std::vector<TagSequence> gold, pred;
        std::vector<std::set<std::string>> ga, pa;
        for (int u = 0; u < 20; ++u) {
          const std::size_t n = 1 + rng() % 10;
          gold.push_back(oracle::random_bio(n, names, rng));
          pred.push_back(rng() % 3 == 0 ? gold.back() : oracle::random_bio(n, names, rng));
          ga.push_back({names[rng() % 5]});
          if (rng() % 2) ga.back().insert(names[rng() % 5]);
          pa.push_back(rng() % 2 ? ga.back() : std::set<std::string>{names[rng() % 5]});
        }
        const auto s = slot_f1(pred, gold);
        const auto want = oracle::span_f1(pred, gold);
        metric_mismatch += s.precision != want.p || s.recall != want.r || s.f1 != want.f;
        metric_mismatch += act_accuracy(pa, ga) != oracle::act_accuracy(pa, ga);
        ++count["slot F1"];
        ++count["act accuracy"];
      }
    }
  }
  for (const auto& [name, n] : count) {
    o.detail << ' ' << name << ':' << n;
    if (worst.count(name)) o.detail << "@" << worst[name];
    o.require(n >= 100, name + " instance count");
  }
  for (const auto& [name, d] : worst) o.require(d <= 1e-12, name + " tolerance");
  o.detail << " metric mismatches=" << metric_mismatch;
  o.require(metric_mismatch == 0, "metrics");
  return o;
}

// --- 3. invariants ---------------------------------------------------------

Outcome invariants() {
  Outcome o;
  std::size_t checks = 0;
  auto expect = [&](bool ok, const std::string& what) {
    ++checks;
    o.require(ok, what);
  };

  // Causality of the context encoder, bitwise.
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed);
    ParamStore store;
    ContextParams ctx;
    ctx.shape = {4, 4, 8, 2, ScaleMode::per_head};
    ctx.layers.push_back(register_block(store, "c0", ctx.shape, rng));
    ctx.layers.push_back(register_block(store, "c1", ctx.shape, rng));
    Matrix h = oracle::random_matrix(5, 4, rng);
    const Matrix before = context_attend(c(h), ctx, 2).value();
    for (std::size_t n = 0; n < 4; ++n) {
      Matrix moved = h;
      for (std::size_t r = n + 1; r < 5; ++r)
        for (std::size_t j = 0; j < 4; ++j) moved(r, j) = 100.0 * std::normal_distribution<double>()(rng);
      const Matrix after = context_attend(c(moved), ctx, 2).value();
      bool same = true;
      for (std::size_t r = 0; r <= n; ++r)
        for (std::size_t j = 0; j < 4; ++j) same = same && after(r, j) == before(r, j);
      expect(same, "context causality");
    }
  }

  // Whole-model causality: every variant's outputs for turn n ignore later turns.
  {
    const auto data = fixture::small_data(4, 4, 3);
    const TripleStore kb(data.kb);
    TransEOptions opts;
    opts.dim = 4;
    opts.epochs = 5;
    const auto emb = train_transe(kb, opts);
    for (const Ablation a : kAllAblations) {
      Model m(fixture::tiny_model(a), Vocab::build(data.train), data.acts, data.slots, emb, 1);
      for (const auto& d : data.test) {
        const auto full = m.forward(m.prepare(d, kb));
        for (std::size_t n = 1; n < d.turns.size(); ++n) {
          Dialogue prefix = d;
          prefix.turns.resize(n);
          const auto part = m.forward(m.prepare(prefix, kb));
          bool same = true;
          for (std::size_t t = 0; t < n; ++t) {
            same = same && row_of(part.act_logits.value(), t) == row_of(full.act_logits.value(), t);
            same = same && part.slot_logits[t].value() == full.slot_logits[t].value();
          }
          expect(same, "model causality (" + to_string(a) + ")");
        }
      }
    }
  }

  // Knowledge attention: simplex, exact uniform on zero rows, gate bounds.
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed + 30);
    ParamStore store;
    const auto p = random_fusion(store, 6, 3, 4, rng);
    for (int trial = 0; trial < 10; ++trial) {
      const Matrix h = oracle::random_matrix(1, 6, rng, 3.0);
      const std::size_t used = rng() % 6;
      Matrix r(5, 3), t(5, 3);
      for (std::size_t j = 0; j < used; ++j)
        for (std::size_t k = 0; k < 3; ++k) {
          r(j, k) = std::normal_distribution<double>()(rng);
          t(j, k) = std::normal_distribution<double>()(rng);
        }
      const auto att = knowledge_attention(c(h), c(r), c(t), p);
      double total = 0.0;
      bool nonneg = true;
      for (std::size_t j = 0; j < 5; ++j) {
        total += att.alpha.value()[j];
        nonneg = nonneg && att.alpha.value()[j] >= 0.0;
      }
      expect(nonneg && std::fabs(total - 1.0) <= 1e-9, "alpha simplex");
      if (used == 0) {
        bool uniform = true;
        for (std::size_t j = 0; j < 5; ++j) uniform = uniform && att.alpha.value()[j] == 1.0 / 5.0;
        for (std::size_t k = 0; k < 6; ++k) uniform = uniform && att.v.value()[k] == 0.0;
        expect(uniform, "uniform alpha on zero triples");
      }
      const auto g = gate_fuse(c(h), att.v, p).gate.item();
      expect(g > 0.0 && g < 1.0, "gate bounds");
    }
  }

  // Every prediction is valid BIO: all variants, untrained and briefly trained.
  {
    const auto data = fixture::small_data(10, 6, 4);
    const TripleStore kb(data.kb);
    for (const Ablation a : kAllAblations) {
      TrainConfig cfg;
      cfg.model = fixture::tiny_model(a);
      cfg.kb_epochs = 5;
      cfg.epochs = 3;
      cfg.lr = 5e-3;
      const Model fresh(cfg.model, Vocab::build(data.train), data.acts, data.slots, embeddings_for(kb, cfg), 2);
      const Model trained = train(data.train, kb, data.acts, data.slots, cfg);
      for (const Model* m : {&fresh, &trained}) {
        bool valid = true;
        for (const auto& p : predict_corpus(*m, data.test, kb)) valid = valid && is_valid_bio(p.prediction.tags);
        expect(valid, "BIO validity (" + to_string(a) + ")");
      }
    }
  }

  // Metric permutation invariance.
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    std::mt19937_64 rng(seed + 60);
    const std::vector<std::string> names = {"city", "date", "pricing"};
    std::vector<TagSequence> gold, pred;
    std::vector<std::set<std::string>> ga, pa;
    for (int u = 0; u < 30; ++u) {
      const std::size_t n = 1 + rng() % 8;
      gold.push_back(oracle::random_bio(n, names, rng));
      pred.push_back(rng() % 2 ? gold.back() : oracle::random_bio(n, names, rng));
      ga.push_back({names[rng() % 3]});
      pa.push_back(rng() % 2 ? ga.back() : std::set<std::string>{names[rng() % 3]});
    }
    const auto base = make_report(pa, ga, pred, gold);
    std::vector<std::size_t> order(gold.size());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<TagSequence> g2, p2;
    std::vector<std::set<std::string>> ga2, pa2;
    for (auto i : order) {
      g2.push_back(gold[i]);
      p2.push_back(pred[i]);
      ga2.push_back(ga[i]);
      pa2.push_back(pa[i]);
    }
    const auto moved = make_report(pa2, ga2, p2, g2);
    expect(moved.act_accuracy == base.act_accuracy && moved.slot_f1 == base.slot_f1 &&
               moved.slot_precision == base.slot_precision && moved.slot_recall == base.slot_recall,
           "metric permutation invariance");
  }
  o.detail << ' ' << checks << " assertions";
  return o;
}

// --- 4 and 5. learning and ablations ---------------------------------------

struct RunResult {
  double act = 0.0, f1 = 0.0, kb_f1 = 0.0, ctx_act = 0.0, seconds = 0.0;
  std::size_t epochs = 0;
};

std::map<std::pair<std::uint64_t, Ablation>, RunResult> g_runs;

RunResult run_variant(std::uint64_t seed, Ablation a) {
  const auto key = std::make_pair(seed, a);
  if (auto it = g_runs.find(key); it != g_runs.end()) return it->second;
  const auto start = Clock::now();
  const auto data = generate_synthetic(GenConfig{}, seed);
  const TripleStore kb(data.kb);
  TrainConfig cfg;
  cfg.seed = seed;
  cfg.model.ablation = a;
  RunLog log;
  const Model m = train(data.train, kb, data.acts, data.slots, cfg, &log);
  const auto preds = predict_corpus(m, data.test, kb, cfg.threshold);
  const auto report = score(data.test, preds);
  const auto subsets = score_subsets(data.test, preds);
  RunResult r;
  r.act = report.act_accuracy;
  r.f1 = report.slot_f1;
  r.kb_f1 = subsets.knowledge_slot_f1;
  r.ctx_act = subsets.context_act_accuracy;
  r.epochs = log.epochs.size();
  r.seconds = seconds_since(start);
  std::fprintf(stderr, "  seed %llu %-8s act %.4f f1 %.4f kb-f1 %.4f ctx-act %.4f (%zu epochs, %.0fs)\n",
               static_cast<unsigned long long>(seed), to_string(a).c_str(), r.act, r.f1, r.kb_f1,
               r.ctx_act, r.epochs, r.seconds);
  g_runs[key] = r;
  return r;
}

Outcome learning() {
  Outcome o;
  const auto r = run_variant(0, Ablation::full);
  o.detail << " act=" << r.act << " slot_f1=" << r.f1 << " epochs=" << r.epochs << " time=" << r.seconds << 's';
  o.require(r.act >= 0.90, "act accuracy");
  o.require(r.f1 >= 0.85, "slot F1");
  o.require(r.epochs <= 60, "epoch budget");
  o.require(r.seconds < 1800.0, "runtime");
  return o;
}

Outcome ablations() {
  Outcome o;
  std::map<Ablation, RunResult> mean;
  for (std::uint64_t seed = 0; seed < 5; ++seed)
    for (const Ablation a : kAllAblations) {
      const auto r = run_variant(seed, a);
      auto& m = mean[a];
      m.act += r.act / 5.0;
      m.f1 += r.f1 / 5.0;
      m.kb_f1 += r.kb_f1 / 5.0;
      m.ctx_act += r.ctx_act / 5.0;
    }
  const auto& full = mean[Ablation::full];
  const double kg_gap = 100.0 * (full.kb_f1 - mean[Ablation::no_kg].kb_f1);
  const double ca_gap = 100.0 * (full.ctx_act - mean[Ablation::no_ca].ctx_act);
  const double lstm_act = 100.0 * (full.act - mean[Ablation::no_lstm].act);
  const double lstm_f1 = 100.0 * (full.f1 - mean[Ablation::no_lstm].f1);
  o.detail << " (a) kb-slot F1 gap=" << kg_gap << " (b) context act gap=" << ca_gap
           << " (c) no_lstm gaps act=" << lstm_act << " f1=" << lstm_f1;
  o.require(kg_gap >= 5.0, "(a)");
  o.require(ca_gap >= 5.0, "(b)");
  o.require(lstm_act > 0.0 && lstm_f1 > 0.0, "(c)");
  return o;
}

// --- 6. TransE -------------------------------------------------------------

Outcome transe() {
  Outcome o;
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    const auto data = generate_synthetic(GenConfig{}, seed);
    const TripleStore kb(data.kb);
    TransEOptions opts;
    opts.seed = seed;
    const auto emb = train_transe(kb, opts);
    std::vector<std::string> entities;
    for (const auto& [name, _] : emb.entities()) entities.push_back(name);
    std::set<std::tuple<std::string, std::string, std::string>> known;
    for (const auto& t : kb.triples()) known.insert({t.head, t.relation, t.tail});

    std::mt19937_64 rng(seed + 1000);
    std::uniform_int_distribution<std::size_t> pick(0, entities.size() - 1);
    std::size_t wins = 0, total = 0;
    for (const auto& t : kb.triples()) {
      std::string other;
      do other = entities[pick(rng)];
      while (other == t.tail || known.count({t.head, t.relation, other}));
      wins += emb.score(t.head, t.relation, t.tail) < emb.score(t.head, t.relation, other);
      ++total;
    }
    const double rate = static_cast<double>(wins) / static_cast<double>(total);
    o.detail << " seed" << seed << '=' << rate;
    o.require(rate >= 0.8, "seed " + std::to_string(seed));
  }
  return o;
}

// --- 7. determinism --------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

Outcome determinism() {
  Outcome o;
  const fs::path dir = fs::temp_directory_path() / "kabem_acceptance";
  fs::remove_all(dir);
  fs::create_directories(dir);
  std::ofstream(dir / "gen.cfg") << "train_dialogues=40\ntest_dialogues=10\n";
  std::ofstream(dir / "train.cfg") << "epochs=3\nd_model=16\nattn_dim=16\nffn_dim=32\nd_k=8\nd_a=8\n"
                                      "lstm_hidden=16\nkb_epochs=20\n";
  std::ostringstream sink;
  auto run = [&](std::vector<std::string> args) { return cli::run(args, sink, sink); };

  for (const char* out : {"g1", "g2"})
    o.require(run({"gen-data", "--config", (dir / "gen.cfg").string(), "--seed", "7", "--out", (dir / out).string()}) == 0,
              "gen-data exit");
  std::size_t files = 0;
  for (const char* f : {"train.jsonl", "test.jsonl", "kb.tsv", "acts.txt", "slots.txt"}) {
    o.require(slurp(dir / "g1" / f) == slurp(dir / "g2" / f), std::string("gen-data ") + f);
    ++files;
  }
  std::size_t checkpoints = 0;
  for (const Ablation a : kAllAblations) {
    const std::string v = to_string(a);
    for (const char* n : {"1", "2"})
      o.require(run({"train", "--corpus", (dir / "g1").string(), "--config", (dir / "train.cfg").string(),
                     "--variant", v, "--seed", "7", "--out", (dir / (v + n + ".ckpt")).string()}) == 0,
                "train exit");
    const std::string a1 = slurp(dir / (v + "1.ckpt")), a2 = slurp(dir / (v + "2.ckpt"));
    o.require(!a1.empty() && a1 == a2, "checkpoint " + v);
    ++checkpoints;
  }
  o.detail << ' ' << files << " corpus files, " << checkpoints << " checkpoint pairs compared";
  return o;
}

}  // namespace

int main(int argc, char** argv) {
  const std::vector<std::pair<std::string, std::function<Outcome()>>> criteria = {
      {"gradient suite", gradients},    {"oracle suite", oracles},   {"invariant suite", invariants},
      {"desk-scale learning", learning}, {"ablation trends", ablations}, {"TransE sanity", transe},
      {"determinism", determinism}};
  std::set<std::size_t> wanted;
  for (int i = 1; i < argc; ++i) wanted.insert(static_cast<std::size_t>(std::stoul(argv[i])));

  bool all = true;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    if (!wanted.empty() && !wanted.count(i + 1)) continue;
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o.pass = false;
      o.detail << " [exception: " << e.what() << "]";
    }
    all = all && o.pass;
    std::cout << "criterion " << i + 1 << " (" << criteria[i].first << "): " << (o.pass ? "PASS" : "FAIL")
              << " -" << o.detail.str() << std::endl;
  }
  return all ? 0 : 1;
}
