#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "kabem/corpus.hpp"
#include "kabem/knowledge.hpp"
#include "kabem/metrics.hpp"
#include "kabem/model.hpp"

namespace kabem {

class TrainingDiverged : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct TrainConfig {
  std::size_t epochs = 60;
  double lr = 1e-3;
  std::size_t batch_dialogues = 4;
  std::uint64_t seed = 0;
  std::size_t patience = 10;
  double val_fraction = 0.1;
  double clip_norm = 0.0;  // 0 disables clipping
  // Probability of hiding a training token's identity behind <unk> while its
  // KB lookup stays intact.
  double unk_dropout = 0.0;
  double threshold = 0.5;
  std::size_t kb_epochs = 200;
  std::string embeddings;  // precomputed KG embeddings; empty trains TransE
  std::string checkpoint;
  ModelConfig model;

  // Accepts every TrainConfig and ModelConfig key; false for unknown keys.
  bool apply(const std::string& key, const std::string& value);
  void apply_all(const KeyValues& kv);
  std::vector<std::pair<std::string, std::string>> items() const;
  void validate() const;
};

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;  // mean per-dialogue joint loss
  double val_act_accuracy = 0.0;
  double val_slot_f1 = 0.0;
  double seconds = 0.0;
};

struct RunLog {
  std::vector<std::pair<std::string, std::string>> config;
  std::vector<EpochLog> epochs;
  std::size_t best_epoch = 0;

  // One JSON object per line: the config first, then one per epoch. Wall
  // times are omitted when `with_time` is false.
  std::string to_jsonl(bool with_time = true) const;
};

// Deterministic split of `corpus` into (train, validation).
std::pair<Corpus, Corpus> split_validation(const Corpus& corpus, double fraction, std::uint64_t seed);

KgEmbeddings embeddings_for(const TripleStore& kb, const TrainConfig& config);

// Trains on `corpus` (validation carved out internally) and returns the model
// holding the best-validation parameters.
Model train(const Corpus& corpus, const TripleStore& kb, const std::vector<std::string>& acts,
            const std::vector<std::string>& slots, const TrainConfig& config, RunLog* log = nullptr,
            std::ostream* progress = nullptr);

struct TurnPrediction {
  std::string dialogue_id;
  std::size_t turn = 0;
  Prediction prediction;
  std::vector<std::vector<KnowledgeTriple>> triples;  // per token
  std::optional<FusionDiagnostics> fusion;            // filled when explaining
};

// Predictions for every turn, each using its full dialogue history.
std::vector<TurnPrediction> predict_corpus(const Model& model, const Corpus& corpus,
                                           const TripleStore& kb, double threshold = 0.5,
                                           bool explain = false);

EvalReport score(const Corpus& gold, const std::vector<TurnPrediction>& preds);
EvalReport evaluate(const Model& model, const Corpus& corpus, const TripleStore& kb,
                    double threshold = 0.5);

// Metrics restricted to the generator-annotated hard cases.
struct SubsetScores {
  double knowledge_slot_f1 = 0.0;   // gold: kb-only spans; predicted: spans overlapping them
  std::size_t knowledge_spans = 0;
  double context_act_accuracy = 0.0;
  std::size_t context_turns = 0;
};
SubsetScores score_subsets(const Corpus& gold, const std::vector<TurnPrediction>& preds);

nlohmann::json prediction_to_json(const TurnPrediction& p, const Model& model, bool explain);

}  // namespace kabem
