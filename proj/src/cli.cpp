#include "kabem/cli.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <set>
#include <sstream>

#include <CLI11.hpp>

#include "kabem/synth.hpp"
#include "kabem/trainer.hpp"

namespace kabem::cli {

namespace fs = std::filesystem;

namespace {

struct Options {
  std::string config;
  std::string out;
  std::string triples;
  std::string corpus;
  std::string checkpoint;
  std::string variant;
  std::string predictions;
  std::uint64_t seed = 0;
  bool explain = false;
  double threshold = 0.5;
  std::size_t dim = 16;
  std::size_t epochs = 200;
};

void print_config(std::ostream& err, const std::vector<std::pair<std::string, std::string>>& items) {
  for (const auto& [k, v] : items) err << "config " << k << '=' << v << '\n';
}

// Writes through a temporary file so a failed run never leaves a partial artifact.
void write_file(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) fs::create_directories(path.parent_path());
  const fs::path tmp = path.string() + ".tmp";
  {
    std::ofstream f(tmp, std::ios::binary);
    if (!f) throw std::runtime_error("cannot write " + path.string());
    f << content;
    if (!f) throw std::runtime_error("error writing " + path.string());
  }
  fs::rename(tmp, path);
}

fs::path corpus_file(const std::string& corpus, const char* default_name) {
  if (corpus.empty()) throw std::invalid_argument("--corpus is required");
  fs::path p(corpus);
  if (fs::is_directory(p)) p /= default_name;
  if (!fs::exists(p)) throw std::runtime_error("corpus file not found: " + p.string());
  return p;
}

TripleStore load_kb(const Options& o, std::ostream& err) {
  fs::path p(o.triples);
  if (p.empty() && !o.corpus.empty() && fs::is_directory(o.corpus)) p = fs::path(o.corpus) / "kb.tsv";
  if (p.empty()) {
    err << "warning: no --triples given; every token sees an empty knowledge set\n";
    return {};
  }
  if (!fs::exists(p)) throw std::runtime_error("triples file not found: " + p.string());
  TripleLoadReport report;
  TripleStore kb = load_triples(p, &report);
  for (const auto& w : report.warnings) err << "warning: " << p.string() << ": " << w << '\n';
  return kb;
}

// Label inventories from acts.txt / slots.txt beside the corpus, else from the
// corpus itself.
std::pair<std::vector<std::string>, std::vector<std::string>> inventories(const fs::path& corpus_path,
                                                                          const Corpus& corpus) {
  const fs::path dir = corpus_path.parent_path();
  if (fs::exists(dir / "acts.txt") && fs::exists(dir / "slots.txt")) {
    return {load_labels(dir / "acts.txt"), load_labels(dir / "slots.txt")};
  }
  std::set<std::string> acts, slots;
  for (const auto& d : corpus)
    for (const auto& u : d.turns) {
      acts.insert(u.acts.begin(), u.acts.end());
      for (const auto& s : u.slots) slots.insert(s.name);
    }
  return {{acts.begin(), acts.end()}, {slots.begin(), slots.end()}};
}

TrainConfig train_config(const Options& o, bool seed_given) {
  TrainConfig cfg;
  if (!o.config.empty()) cfg.apply_all(load_key_values(o.config));
  if (seed_given) cfg.seed = o.seed;
  if (!o.variant.empty()) cfg.model.ablation = ablation_from_string(o.variant);
  cfg.validate();
  return cfg;
}

// --- subcommands -----------------------------------------------------------

int gen_data(const Options& o, bool seed_given, std::ostream& out, std::ostream& err) {
  GenConfig cfg;
  if (!o.config.empty()) {
    for (const auto& [k, v] : load_key_values(o.config)) {
      if (k == "seed") continue;
      if (!cfg.apply(k, v)) throw std::invalid_argument("unknown config key '" + k + "'");
    }
  }
  cfg.validate();
  std::uint64_t seed = o.seed;
  if (!seed_given && !o.config.empty()) {
    const auto kv = load_key_values(o.config);
    if (auto it = kv.find("seed"); it != kv.end()) seed = std::stoull(it->second);
  }
  auto items = cfg.items();
  items.emplace_back("seed", std::to_string(seed));
  items.emplace_back("out", o.out);
  print_config(err, items);
  const auto data = generate_synthetic(cfg, seed);
  save_synthetic(data, o.out);
  out << "wrote " << data.train.size() << " train and " << data.test.size() << " test dialogues, "
      << data.kb.size() << " triples to " << o.out << '\n';
  return 0;
}

int build_kb(const Options& o, bool seed_given, std::ostream& out, std::ostream& err) {
  if (o.triples.empty()) throw std::invalid_argument("--triples is required");
  TransEOptions opts;
  opts.dim = o.dim;
  opts.epochs = o.epochs;
  if (!o.config.empty()) {
    for (const auto& [k, v] : load_key_values(o.config)) {
      if (k == "dim") opts.dim = std::stoull(v);
      else if (k == "epochs") opts.epochs = std::stoull(v);
      else if (k == "margin") opts.margin = parse_double(v);
      else if (k == "lr") opts.lr = parse_double(v);
      else if (k == "seed") opts.seed = std::stoull(v);
      else throw std::invalid_argument("unknown config key '" + k + "'");
    }
  }
  if (seed_given) opts.seed = o.seed;
  print_config(err, {{"triples", o.triples},
                     {"dim", std::to_string(opts.dim)},
                     {"epochs", std::to_string(opts.epochs)},
                     {"margin", format_double(opts.margin)},
                     {"lr", format_double(opts.lr)},
                     {"seed", std::to_string(opts.seed)},
                     {"out", o.out}});
  Options kb_opts = o;
  const TripleStore kb = load_kb(kb_opts, err);
  if (kb.empty()) throw std::runtime_error("no usable triples in " + o.triples);
  std::vector<double> losses;
  const KgEmbeddings emb = train_transe(kb, opts, &losses);
  std::ostringstream s;
  emb.save(s);
  write_file(o.out, s.str());
  out << "embedded " << emb.entities().size() << " entities and " << emb.relations().size()
      << " relations (d=" << emb.dim() << "); hinge loss " << (losses.empty() ? 0.0 : losses.front())
      << " -> " << (losses.empty() ? 0.0 : losses.back()) << "; wrote " << o.out << '\n';
  return 0;
}

int train_cmd(const Options& o, bool seed_given, std::ostream& out, std::ostream& err) {
  TrainConfig cfg = train_config(o, seed_given);
  std::string path = !o.out.empty() ? o.out : !o.checkpoint.empty() ? o.checkpoint : cfg.checkpoint;
  if (path.empty()) path = "model.ckpt";
  cfg.checkpoint = path;
  const fs::path corpus_path = corpus_file(o.corpus, "train.jsonl");
  auto items = cfg.items();
  items.emplace_back("corpus", corpus_path.string());
  items.emplace_back("triples", o.triples);
  print_config(err, items);

  const Corpus corpus = load_dialogues(corpus_path);
  const auto [acts, slots] = inventories(corpus_path, corpus);
  const TripleStore kb = load_kb(o, err);
  RunLog log;
  const Model model = train(corpus, kb, acts, slots, cfg, &log, &err);
  std::ostringstream ckpt;
  model.write(ckpt);
  write_file(path, ckpt.str());
  write_file(path + ".runlog.jsonl", log.to_jsonl());
  const auto& best = log.epochs.at(log.best_epoch - 1);
  out << "trained " << to_string(cfg.model.ablation) << " for " << log.epochs.size()
      << " epochs; best epoch " << log.best_epoch << " (val act " << std::fixed << std::setprecision(4)
      << best.val_act_accuracy << ", val F1 " << best.val_slot_f1 << "); wrote " << path << '\n';
  return 0;
}

std::vector<TurnPrediction> read_predictions(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open predictions " + path.string());
  std::vector<TurnPrediction> preds;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      const auto j = nlohmann::json::parse(line);
      TurnPrediction p;
      p.dialogue_id = j.at("dialogue_id").get<std::string>();
      p.turn = j.at("turn").get<std::size_t>();
      for (const auto& a : j.at("acts")) p.prediction.acts.insert(a.get<std::string>());
      p.prediction.tags = j.at("tags").get<TagSequence>();
      preds.push_back(std::move(p));
    } catch (const nlohmann::json::exception& e) {
      throw std::runtime_error(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return preds;
}

int eval_cmd(const Options& o, std::ostream& out, std::ostream& err) {
  const fs::path corpus_path = corpus_file(o.corpus, "test.jsonl");
  print_config(err, {{"corpus", corpus_path.string()},
                     {"checkpoint", o.checkpoint},
                     {"predictions", o.predictions},
                     {"triples", o.triples},
                     {"threshold", format_double(o.threshold)}});
  const Corpus gold = load_dialogues(corpus_path);
  EvalReport report;
  SubsetScores subsets;
  if (!o.predictions.empty()) {
    const auto preds = read_predictions(o.predictions);
    report = score(gold, preds);
    subsets = score_subsets(gold, preds);
  } else {
    if (o.checkpoint.empty()) throw std::invalid_argument("eval needs --checkpoint or --predictions");
    const Model model = Model::load(o.checkpoint);
    const auto preds = predict_corpus(model, gold, load_kb(o, err), o.threshold);
    report = score(gold, preds);
    subsets = score_subsets(gold, preds);
  }
  auto j = report.to_json();
  if (subsets.knowledge_spans > 0) {
    j["knowledge_slot_f1"] = subsets.knowledge_slot_f1;
    j["knowledge_spans"] = subsets.knowledge_spans;
  }
  if (subsets.context_turns > 0) {
    j["context_act_accuracy"] = subsets.context_act_accuracy;
    j["context_turns"] = subsets.context_turns;
  }
  out << report.to_text() << '\n' << j.dump(2) << '\n';
  if (!o.out.empty()) write_file(o.out, j.dump(2) + '\n');
  return 0;
}

void explain_text(std::ostream& out, const Dialogue& d, const TurnPrediction& p) {
  const auto& u = d.turns.at(p.turn);
  out << d.id << " turn " << p.turn << ":";
  for (const auto& t : u.tokens) out << ' ' << t;
  out << "\n";
  out << std::fixed << std::setprecision(4);
  for (std::size_t i = 0; i < u.tokens.size(); ++i) {
    out << "  " << std::left << std::setw(14) << u.tokens[i] << std::right << ' ' << p.prediction.tags[i];
    if (p.fusion) out << "  gate " << p.fusion->gate[i];
    out << '\n';
    if (p.triples.empty()) continue;
    if (p.triples[i].empty()) {
      if (p.fusion) {
        const auto& a = p.fusion->alpha[i];
        out << "      (no knowledge) alpha uniform " << (a.empty() ? 0.0 : a.front()) << '\n';
      }
      continue;
    }
    for (std::size_t r = 0; r < p.triples[i].size(); ++r) {
      const auto& tr = p.triples[i][r];
      out << "      ";
      if (p.fusion) out << "alpha " << p.fusion->alpha[i][r] << "  ";
      out << '(' << tr.head << ", " << tr.relation << ", " << tr.tail << ")  w " << tr.weight << '\n';
    }
  }
  out.unsetf(std::ios::floatfield);
}

int predict_cmd(const Options& o, std::ostream& out, std::ostream& err) {
  if (o.checkpoint.empty()) throw std::invalid_argument("--checkpoint is required");
  const fs::path corpus_path = corpus_file(o.corpus, "test.jsonl");
  print_config(err, {{"checkpoint", o.checkpoint},
                     {"corpus", corpus_path.string()},
                     {"triples", o.triples},
                     {"threshold", format_double(o.threshold)},
                     {"explain", o.explain ? "true" : "false"},
                     {"out", o.out}});
  if (!(o.threshold > 0.0 && o.threshold < 1.0)) throw std::invalid_argument("--threshold must lie in (0, 1)");
  const Model model = Model::load(o.checkpoint);
  const Corpus corpus = load_dialogues(corpus_path);
  const auto preds = predict_corpus(model, corpus, load_kb(o, err), o.threshold, o.explain);
  std::string jsonl;
  for (const auto& p : preds) jsonl += prediction_to_json(p, model, o.explain).dump() + '\n';
  if (o.out.empty()) {
    out << jsonl;
    return 0;
  }
  write_file(o.out, jsonl);
  if (o.explain) {
    std::size_t k = 0;
    for (const auto& d : corpus)
      for (std::size_t t = 0; t < d.turns.size(); ++t) explain_text(out, d, preds[k++]);
  }
  out << "wrote " << preds.size() << " predictions to " << o.out << '\n';
  return 0;
}

int ablate_cmd(const Options& o, bool seed_given, std::ostream& out, std::ostream& err) {
  TrainConfig base = train_config(o, seed_given);
  Corpus train_set, test_set;
  TripleStore kb;
  std::vector<std::string> acts, slots;
  if (o.corpus.empty()) {
    print_config(err, {{"corpus", "synthetic default"}, {"data_seed", std::to_string(base.seed)}});
    const auto data = generate_synthetic(GenConfig{}, base.seed);
    train_set = data.train;
    test_set = data.test;
    kb = TripleStore(data.kb);
    acts = data.acts;
    slots = data.slots;
  } else {
    const fs::path train_path = corpus_file(o.corpus, "train.jsonl");
    const fs::path test_path = fs::is_directory(o.corpus) ? fs::path(o.corpus) / "test.jsonl" : train_path;
    train_set = load_dialogues(train_path);
    test_set = load_dialogues(test_path);
    std::tie(acts, slots) = inventories(train_path, train_set);
    kb = load_kb(o, err);
  }
  print_config(err, base.items());

  nlohmann::ordered_json rows = nlohmann::ordered_json::array();
  std::ostringstream table;
  table << std::fixed << std::setprecision(2);
  table << std::left << std::setw(10) << "variant" << std::right << std::setw(10) << "ID Acc"
        << std::setw(10) << "SL F1" << std::setw(12) << "KB-slot F1" << std::setw(12) << "ctx-act"
        << '\n';
  for (const Ablation a : kAllAblations) {
    TrainConfig cfg = base;
    cfg.model.ablation = a;
    err << "== " << to_string(a) << '\n';
    const Model model = train(train_set, kb, acts, slots, cfg, nullptr, &err);
    const auto preds = predict_corpus(model, test_set, kb, cfg.threshold);
    const auto r = score(test_set, preds);
    const auto s = score_subsets(test_set, preds);
    table << std::left << std::setw(10) << to_string(a) << std::right << std::setw(10)
          << 100 * r.act_accuracy << std::setw(10) << 100 * r.slot_f1 << std::setw(12)
          << 100 * s.knowledge_slot_f1 << std::setw(12) << 100 * s.context_act_accuracy << '\n';
    rows.push_back({{"variant", to_string(a)},
                    {"act_accuracy", r.act_accuracy},
                    {"slot_f1", r.slot_f1},
                    {"knowledge_slot_f1", s.knowledge_slot_f1},
                    {"context_act_accuracy", s.context_act_accuracy}});
  }
  out << table.str();
  if (!o.out.empty()) write_file(o.out, rows.dump(2) + '\n');
  return 0;
}

}  // namespace

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Knowledge-augmented joint dialogue act and slot model", "kabem"};
  app.require_subcommand(1);
  Options o;

  auto* gen = app.add_subcommand("gen-data", "Generate the synthetic corpus and knowledge base");
  gen->add_option("--config", o.config, "key=value generator settings");
  gen->add_option("--seed", o.seed);
  gen->add_option("--out", o.out, "output directory (default data)");

  auto* kbc = app.add_subcommand("build-kb", "Train TransE embeddings for a triple file");
  kbc->add_option("--triples", o.triples, "TSV head, relation, tail, weight")->required();
  kbc->add_option("--config", o.config);
  kbc->add_option("--dim", o.dim)->check(CLI::PositiveNumber);
  kbc->add_option("--epochs", o.epochs);
  kbc->add_option("--seed", o.seed);
  kbc->add_option("--out", o.out, "embedding file (default kb.emb)");

  auto* tr = app.add_subcommand("train", "Train a model and write a checkpoint");
  tr->add_option("--corpus", o.corpus, "train JSONL or a gen-data directory")->required();
  tr->add_option("--triples", o.triples);
  tr->add_option("--config", o.config);
  tr->add_option("--seed", o.seed);
  tr->add_option("--variant", o.variant, "full, no_kg, no_ca or no_lstm");
  tr->add_option("--out,--checkpoint", o.out, "checkpoint path");

  auto* ev = app.add_subcommand("eval", "Score a checkpoint or a prediction file");
  ev->add_option("--corpus", o.corpus, "gold JSONL or a gen-data directory")->required();
  ev->add_option("--checkpoint", o.checkpoint);
  ev->add_option("--predictions", o.predictions, "prediction JSONL to score instead of a checkpoint");
  ev->add_option("--triples", o.triples);
  ev->add_option("--threshold", o.threshold);
  ev->add_option("--out", o.out, "write the JSON report here");

  auto* pr = app.add_subcommand("predict", "Write per-turn predictions as JSONL");
  pr->add_option("--checkpoint", o.checkpoint)->required();
  pr->add_option("--corpus", o.corpus)->required();
  pr->add_option("--triples", o.triples);
  pr->add_option("--threshold", o.threshold);
  pr->add_flag("--explain", o.explain, "add per-token knowledge weights and gate values");
  pr->add_option("--out", o.out);

  auto* ab = app.add_subcommand("ablate", "Train and compare all four variants");
  ab->add_option("--corpus", o.corpus, "gen-data directory; default generates one from --seed");
  ab->add_option("--triples", o.triples);
  ab->add_option("--config", o.config);
  ab->add_option("--seed", o.seed);
  ab->add_option("--out", o.out, "write the table as JSON here");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err);
  }

  auto seed_given = [&](CLI::App* sub) { return sub->count("--seed") > 0; };
  // Subcommands share one Options, so per-command defaults are applied here.
  if (*gen && o.out.empty()) o.out = "data";
  if (*kbc && o.out.empty()) o.out = "kb.emb";
  try {
    if (*gen) return gen_data(o, seed_given(gen), out, err);
    if (*kbc) return build_kb(o, seed_given(kbc), out, err);
    if (*tr) return train_cmd(o, seed_given(tr), out, err);
    if (*ev) return eval_cmd(o, out, err);
    if (*pr) return predict_cmd(o, out, err);
    if (*ab) return ablate_cmd(o, seed_given(ab), out, err);
  } catch (const std::exception& e) {
    std::string msg = e.what();
    std::replace(msg.begin(), msg.end(), '\n', ' ');
    err << "error: " << msg << '\n';
    return 1;
  }
  return 2;
}

int run(int argc, char** argv) {
  std::vector<std::string> args;
  for (int i = 1; i < argc; ++i) args.emplace_back(argv[i]);
  return run(args, std::cout, std::cerr);
}

}  // namespace kabem::cli
