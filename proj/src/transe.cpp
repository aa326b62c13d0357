#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>

#include "kabem/knowledge.hpp"

namespace kabem {

namespace {

void project_to_unit_ball(std::vector<double>& v) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  const double n = std::sqrt(sq);
  if (n > 1.0) {
    for (double& x : v) x /= n;
  }
}

void normalize(std::vector<double>& v) {
  double sq = 0.0;
  for (double x : v) sq += x * x;
  const double n = std::sqrt(sq);
  if (n > 0.0) {
    for (double& x : v) x /= n;
  }
}

}  // namespace

KgEmbeddings train_transe(const TripleStore& store, const TransEOptions& opts,
                          std::vector<double>* epoch_loss) {
  if (store.empty()) throw std::invalid_argument("train_transe: empty triple store");
  if (opts.dim < 1) throw std::invalid_argument("train_transe: dimension must be at least 1");
  if (!(opts.margin > 0.0)) throw std::invalid_argument("train_transe: margin must be positive");

  const std::size_t d = opts.dim;
  std::mt19937_64 rng(opts.seed);
  const double bound = 6.0 / std::sqrt(static_cast<double>(d));
  std::uniform_real_distribution<double> init(-bound, bound);

  // Sorted name lists give a deterministic layout independent of hash order.
  std::vector<std::string> ent_names, rel_names;
  for (const auto& t : store.triples()) {
    ent_names.push_back(t.head);
    ent_names.push_back(t.tail);
    rel_names.push_back(t.relation);
  }
  auto uniq = [](std::vector<std::string>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  };
  uniq(ent_names);
  uniq(rel_names);

  auto index_of = [](const std::vector<std::string>& names, const std::string& n) {
    return static_cast<std::size_t>(std::lower_bound(names.begin(), names.end(), n) - names.begin());
  };

  std::vector<std::vector<double>> ent(ent_names.size(), std::vector<double>(d));
  std::vector<std::vector<double>> rel(rel_names.size(), std::vector<double>(d));
  for (auto& v : rel) {
    for (double& x : v) x = init(rng);
    normalize(v);
  }
  for (auto& v : ent) {
    for (double& x : v) x = init(rng);
    normalize(v);
  }

  struct Idx {
    std::size_t h, r, t;
  };
  std::vector<Idx> triples;
  for (const auto& t : store.triples()) {
    triples.push_back({index_of(ent_names, t.head), index_of(rel_names, t.relation),
                       index_of(ent_names, t.tail)});
  }

  std::uniform_int_distribution<std::size_t> pick_entity(0, ent_names.size() - 1);
  std::bernoulli_distribution corrupt_head(0.5);
  std::vector<double> diff_pos(d), diff_neg(d);

  auto distance = [&](std::size_t h, std::size_t r, std::size_t t, std::vector<double>& diff) {
    double sq = 0.0;
    for (std::size_t i = 0; i < d; ++i) {
      diff[i] = ent[h][i] + rel[r][i] - ent[t][i];
      sq += diff[i] * diff[i];
    }
    return std::sqrt(sq);
  };

  std::vector<std::size_t> order(triples.size());
  for (std::size_t e = 0; e < opts.epochs; ++e) {
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::shuffle(order.begin(), order.end(), rng);
    double total = 0.0;
    for (std::size_t k : order) {
      const Idx pos = triples[k];
      Idx neg = pos;
      const bool head_side = corrupt_head(rng);
      if (ent_names.size() > 1) {
        std::size_t& slot = head_side ? neg.h : neg.t;
        const std::size_t original = slot;
        do slot = pick_entity(rng);
        while (slot == original);
      }
      const double dp = distance(pos.h, pos.r, pos.t, diff_pos);
      const double dn = distance(neg.h, neg.r, neg.t, diff_neg);
      const double loss = opts.margin + dp - dn;
      if (loss <= 0.0) continue;
      total += loss;
      // d||x||/dx = x / ||x||
      const double sp = dp > 0.0 ? opts.lr / dp : 0.0;
      const double sn = dn > 0.0 ? opts.lr / dn : 0.0;
      for (std::size_t i = 0; i < d; ++i) {
        const double gp = sp * diff_pos[i];
        const double gn = sn * diff_neg[i];
        ent[pos.h][i] -= gp;
        rel[pos.r][i] -= gp;
        ent[pos.t][i] += gp;
        ent[neg.h][i] += gn;
        rel[neg.r][i] += gn;
        ent[neg.t][i] -= gn;
      }
    }
    for (auto& v : ent) project_to_unit_ball(v);
    if (epoch_loss) epoch_loss->push_back(total);
  }

  KgEmbeddings out(d);
  for (std::size_t i = 0; i < ent_names.size(); ++i) out.entities()[ent_names[i]] = ent[i];
  for (std::size_t i = 0; i < rel_names.size(); ++i) out.relations()[rel_names[i]] = rel[i];
  return out;
}

}  // namespace kabem
