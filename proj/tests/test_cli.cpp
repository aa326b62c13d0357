#include <doctest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <json.hpp>

#include "kabem/cli.hpp"
#include "kabem/corpus.hpp"

namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out, err;
};

Result run(std::vector<std::string> args) {
  std::ostringstream out, err;
  const int code = kabem::cli::run(args, out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

fs::path workdir() {
  const fs::path d = fs::temp_directory_path() / "kabem_cli_tests";
  fs::create_directories(d);
  return d;
}

void write(const fs::path& p, const std::string& s) { std::ofstream(p) << s; }

const char* kTiny =
    "train_dialogues=12\ntest_dialogues=4\ntrain_entities=10\ntest_entities=4\n";
const char* kTinyModel =
    "epochs=2\nd_model=8\ntoken_layers=1\ntoken_heads=2\ncontext_layers=1\ncontext_heads=2\n"
    "attn_dim=8\nffn_dim=12\nd_k=4\nd_a=6\nlstm_hidden=6\nkb_epochs=5\n";

}  // namespace

TEST_CASE("gen-data writes identical corpora for the same seed") {
  const auto dir = workdir();
  write(dir / "gen.cfg", kTiny);
  const auto a = run({"gen-data", "--config", (dir / "gen.cfg").string(), "--seed", "3", "--out", (dir / "g1").string()});
  const auto b = run({"gen-data", "--config", (dir / "gen.cfg").string(), "--seed", "3", "--out", (dir / "g2").string()});
  REQUIRE(a.code == 0);
  REQUIRE(b.code == 0);
  CHECK(a.err.find("config knowledge_rate=0.3") != std::string::npos);
  for (const char* f : {"train.jsonl", "test.jsonl", "kb.tsv", "acts.txt", "slots.txt"})
    CHECK(slurp(dir / "g1" / f) == slurp(dir / "g2" / f));
}

TEST_CASE("usage errors exit nonzero with one line") {
  const auto unknown = run({"gen-data", "--colour", "red"});
  CHECK(unknown.code != 0);
  CHECK(run({}).code != 0);
  CHECK(run({"dance"}).code != 0);

  const auto missing = run({"train", "--corpus", "/nonexistent/file.jsonl"});
  CHECK(missing.code == 1);
  CHECK(missing.err.find("error: corpus file not found") != std::string::npos);

  const auto dir = workdir();
  write(dir / "bad.cfg", "colour=red\n");
  write(dir / "one.jsonl", R"({"id":"a","turns":[{"speaker":"user","tokens":["x"],"acts":["inform"],"slots":[]}]})" "\n");
  const auto badcfg = run({"train", "--corpus", (dir / "one.jsonl").string(), "--config", (dir / "bad.cfg").string()});
  CHECK(badcfg.code == 1);
  CHECK(badcfg.err.find("unknown config key 'colour'") != std::string::npos);

  const auto badvariant = run({"train", "--corpus", (dir / "one.jsonl").string(), "--variant", "no_everything"});
  CHECK(badvariant.code == 1);
}

TEST_CASE("build-kb embeds a triple file") {
  const auto dir = workdir();
  write(dir / "kb.tsv", "comedy\trelated to\tcomic\t1.0\ncomedy\tis a\tdrama\t0.6\nbad line\n");
  const auto r = run({"build-kb", "--triples", (dir / "kb.tsv").string(), "--dim", "4", "--epochs", "10",
                      "--seed", "0", "--out", (dir / "kb.emb").string()});
  REQUIRE(r.code == 0);
  CHECK(r.err.find("warning") != std::string::npos);
  CHECK(slurp(dir / "kb.emb").rfind("d_k=4\n", 0) == 0);
  const auto again = run({"build-kb", "--triples", (dir / "kb.tsv").string(), "--dim", "4", "--epochs", "10",
                          "--seed", "0", "--out", (dir / "kb2.emb").string()});
  CHECK(slurp(dir / "kb.emb") == slurp(dir / "kb2.emb"));
}

TEST_CASE("train, predict and eval end to end") {
  const auto dir = workdir();
  write(dir / "gen.cfg", kTiny);
  write(dir / "model.cfg", kTinyModel);
  REQUIRE(run({"gen-data", "--config", (dir / "gen.cfg").string(), "--out", (dir / "data").string()}).code == 0);

  const auto data = (dir / "data").string();
  const auto ck1 = (dir / "m1.ckpt").string(), ck2 = (dir / "m2.ckpt").string();
  const auto t1 = run({"train", "--corpus", data, "--config", (dir / "model.cfg").string(), "--out", ck1});
  REQUIRE(t1.code == 0);
  CHECK(t1.err.find("config ablation=full") != std::string::npos);
  REQUIRE(run({"train", "--corpus", data, "--config", (dir / "model.cfg").string(), "--out", ck2}).code == 0);
  CHECK(slurp(ck1) == slurp(ck2));
  CHECK(fs::exists(ck1 + ".runlog.jsonl"));

  const auto preds = (dir / "preds.jsonl").string();
  const auto p = run({"predict", "--checkpoint", ck1, "--corpus", data, "--explain", "--out", preds});
  REQUIRE(p.code == 0);
  std::ifstream in(preds);
  std::string line;
  bool saw_absent = false;
  std::size_t lines = 0;
  while (std::getline(in, line)) {
    ++lines;
    const auto j = nlohmann::json::parse(line);
    for (const char* key : {"dialogue_id", "turn", "acts", "act_probs", "tags", "explain"}) CHECK(j.contains(key));
    for (const auto& tok : j["explain"]) {
      CHECK(tok.contains("gate"));
      const double g = tok["gate"];
      CHECK(g > 0.0);
      CHECK(g < 1.0);
      if (tok["knowledge"].empty()) {
        saw_absent = true;
        for (const auto& a : tok["alpha"]) CHECK(a.get<double>() == 1.0 / 5.0);
      }
    }
  }
  CHECK(saw_absent);
  CHECK(lines > 0);
  CHECK(p.out.find("no knowledge") != std::string::npos);

  const bool stray_before = fs::exists("kb.emb");
  const auto e = run({"eval", "--checkpoint", ck1, "--corpus", data});
  REQUIRE(e.code == 0);
  CHECK(fs::exists("kb.emb") == stray_before);
  CHECK(e.out.find("\"act_accuracy\"") != std::string::npos);

  const auto from_file = run({"eval", "--predictions", preds, "--corpus", data});
  REQUIRE(from_file.code == 0);
  const auto j1 = nlohmann::json::parse(e.out.substr(e.out.find('{')));
  const auto j2 = nlohmann::json::parse(from_file.out.substr(from_file.out.find('{')));
  CHECK(j1["act_accuracy"] == j2["act_accuracy"]);
  CHECK(j1["slot_f1"] == j2["slot_f1"]);
}

TEST_CASE("eval on gold predictions scores perfectly") {
  const auto dir = workdir();
  write(dir / "gen.cfg", kTiny);
  REQUIRE(run({"gen-data", "--config", (dir / "gen.cfg").string(), "--out", (dir / "gold").string()}).code == 0);
  const auto gold = kabem::load_dialogues(dir / "gold" / "test.jsonl");
  std::ofstream f(dir / "gold_preds.jsonl");
  for (const auto& d : gold)
    for (std::size_t t = 0; t < d.turns.size(); ++t) {
      const auto& u = d.turns[t];
      f << nlohmann::json{{"dialogue_id", d.id}, {"turn", t}, {"acts", u.acts},
                          {"tags", kabem::encode_bio(u.slots, u.tokens.size())}}
               .dump()
        << '\n';
    }
  f.close();
  const auto r = run({"eval", "--predictions", (dir / "gold_preds.jsonl").string(), "--corpus",
                      (dir / "gold").string(), "--out", (dir / "report.json").string()});
  REQUIRE(r.code == 0);
  const auto j = nlohmann::json::parse(slurp(dir / "report.json"));
  CHECK(j["act_accuracy"] == 1.0);
  CHECK(j["slot_f1"] == 1.0);

  std::ofstream short_file(dir / "short.jsonl");
  short_file << R"({"dialogue_id":"x","turn":0,"acts":[],"tags":[]})" << '\n';
  short_file.close();
  CHECK(run({"eval", "--predictions", (dir / "short.jsonl").string(), "--corpus", (dir / "gold").string()}).code == 1);
}

TEST_CASE("ablate prints one row per variant") {
  const auto dir = workdir();
  write(dir / "gen.cfg", kTiny);
  write(dir / "model.cfg", kTinyModel);
  REQUIRE(run({"gen-data", "--config", (dir / "gen.cfg").string(), "--out", (dir / "abl").string()}).code == 0);
  const auto r = run({"ablate", "--corpus", (dir / "abl").string(), "--config", (dir / "model.cfg").string(),
                      "--out", (dir / "abl.json").string()});
  REQUIRE(r.code == 0);
  for (const char* v : {"full", "no_kg", "no_ca", "no_lstm"}) CHECK(r.out.find(v) != std::string::npos);
  CHECK(r.out.find("ID Acc") != std::string::npos);
  CHECK(nlohmann::json::parse(slurp(dir / "abl.json")).size() == 4);
}
