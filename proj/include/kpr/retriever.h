// Copyright 2026 The kpr Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef KPR_RETRIEVER_H_
#define KPR_RETRIEVER_H_

#include <cstddef>
#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "kpr/anchor_linker.h"
#include "kpr/encoder.h"
#include "kpr/entity_knowledge.h"
#include "kpr/kpr_attention.h"

namespace kpr {

using PassageId = uint64_t;

struct Passage {
  PassageId id = 0;
  std::string title;
  std::string text;
};

class PassageCollection {
 public:
  PassageCollection() = default;
  explicit PassageCollection(std::vector<Passage> passages);

  // JSON lines {"id", "title", "text"}.
  static PassageCollection Parse(const std::string &jsonl);
  static PassageCollection Load(const std::string &path);
  std::string to_jsonl() const;

  const std::vector<Passage> &passages() const { return passages_; }
  size_t size() const { return passages_.size(); }
  // InputError when absent.
  const Passage &at(PassageId id) const;
  bool contains(PassageId id) const { return index_.count(id) != 0; }

 private:
  std::vector<Passage> passages_;
  std::unordered_map<PassageId, size_t> index_;
};

struct TrainingInstance {
  std::string question;
  PassageId positive = 0;
  std::vector<PassageId> hard_negatives;
};

// JSON lines {"question", "positive_ids": [...], "hard_negative_ids": [...]};
// the first positive id is used.
std::vector<TrainingInstance> parse_training_set(const std::string &jsonl);
std::vector<TrainingInstance> load_training_set(const std::string &path);
std::string training_set_to_jsonl(const std::vector<TrainingInstance> &instances);

enum class Similarity { kDot, kCosine };
enum class Role { kQuery, kPassage };

struct ModelOptions {
  Activation activation = Activation::kSigmoid;
  LengthBias length_bias = LengthBias::kRowsWithNoop;
  Similarity similarity = Similarity::kDot;
  double temperature = 1.0;
  // false: plain bi-encoder returning H_[CLS] (the DPR baseline).
  bool use_kpr = true;
  std::optional<std::string> instruction;
};

// One tower shared by queries and passages.
struct KprModel {
  EncoderConfig encoder_config;
  EncoderParams encoder;
  KprParams kpr;
  std::shared_ptr<const AnchorDictionary> dictionary;
  std::shared_ptr<EntityEmbeddingTable> entities;
  ModelOptions options;

  // Fresh parameters for the given encoder shape.
  static KprModel Init(EncoderConfig config, std::shared_ptr<const AnchorDictionary> dictionary,
                       std::shared_ptr<EntityEmbeddingTable> entities, Rng &rng);
};

struct EmbedCache {
  EncoderCache encoder;
  AttendCache attend;
  size_t length = 0;
  size_t linked_rows = 0;
};

// Model input string for a query (instruction prepended when configured) or
// a formatted passage.
std::string query_input(const KprModel &model, const std::string &question);
std::string passage_input(const Passage &passage);

// tokenize -> encode -> link -> build U -> attend. `text` is the already
// formatted model input (see query_input/passage_input).
Matrix embed_text(const KprModel &model, const std::string &text, Mode mode, Rng &rng,
                  EmbedCache *cache = nullptr);
Matrix embed_query(const KprModel &model, const std::string &question);
Matrix embed_passage(const KprModel &model, const Passage &passage);

// Backpropagates d_embedding through one cached embed_text call.
void embed_backward(const KprModel &model, const Matrix &d_embedding, const EmbedCache &cache,
                    bool train_encoder, EncoderParams &d_encoder, KprParams &d_kpr);

// dot: e_q·e_p / T; cosine: e_q·e_p / (|e_q||e_p| T).
double score(const Matrix &e_q, const Matrix &e_p, Similarity similarity, double temperature);

struct InBatchLoss {
  double loss = 0.0;
  Matrix d_queries;   // B x D
  Matrix d_passages;  // P x D
};

// Mean over queries of −log softmax(scores_i)[positives[i]] where query i is
// scored against every passage row.
InBatchLoss in_batch_loss(const Matrix &queries, const Matrix &passages,
                          const std::vector<size_t> &positives, Similarity similarity,
                          double temperature);

struct TrainConfig {
  size_t batch_size = 8;
  double learning_rate = 2e-5;
  size_t epochs = 40;
  Similarity similarity = Similarity::kDot;
  double temperature = 1.0;
  bool freeze_base = false;
  Activation activation = Activation::kSigmoid;
  LengthBias length_bias = LengthBias::kRowsWithNoop;
  bool baseline = false;
  std::optional<std::string> instruction;
  uint64_t seed = 0;
  size_t max_steps = 0;  // 0: no step limit
  size_t patience = 0;   // epochs without improvement before stopping; 0 disables
  double clip_norm = 2.0;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const;
  // Copies the architecture knobs into model options.
  void apply_to(ModelOptions &options) const;
};

struct BatchGradients {
  double loss = 0.0;
  EncoderParams encoder;
  KprParams kpr;
};

// Embeds every query and every batch passage (positives, then hard
// negatives, instance by instance) and scores each query against all of
// them. InputError when a passage id occurs twice in the batch.
BatchGradients batch_loss(const KprModel &model, const std::vector<TrainingInstance> &batch,
                          const PassageCollection &passages, bool train_encoder, Mode mode,
                          Rng &rng);

struct TrainResult {
  std::vector<double> epoch_losses;
  size_t steps = 0;
  bool early_stopped = false;
};

// Adam over the encoder (unless freeze_base) and the attention layer; the
// entity table is never written. NumericError on a non-finite loss.
TrainResult train(KprModel &model, const std::vector<TrainingInstance> &dataset,
                  const PassageCollection &passages, const TrainConfig &config);

// Splits instances into batches of at most batch_size with no passage id
// repeated inside a batch; conflicting instances roll over to later batches.
std::vector<std::vector<TrainingInstance>> make_batches(std::vector<TrainingInstance> instances,
                                                        size_t batch_size);

}  // namespace kpr

#endif  // KPR_RETRIEVER_H_
