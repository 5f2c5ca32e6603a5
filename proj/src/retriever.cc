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

#include "kpr/retriever.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>
#include <sstream>

#include "json.hpp"
#include "kpr/error.h"
#include "kpr/tensor_io.h"

namespace kpr {

namespace {

using nlohmann::json;

template <typename Params>
std::vector<Matrix *> tensors(Params &params) {
  std::vector<Matrix *> out;
  params.for_each([&](const char *, Matrix &m) { out.push_back(&m); });
  return out;
}

double squared_norm(const std::vector<Matrix *> &ts) {
  double sum = 0.0;
  for (const Matrix *m : ts) {
    for (double v : m->data()) sum += v * v;
  }
  return sum;
}

struct AdamGroup {
  std::vector<Matrix *> params;
  std::vector<Matrix> m;
  std::vector<Matrix> v;

  explicit AdamGroup(std::vector<Matrix *> p) : params(std::move(p)) {
    for (const Matrix *t : params) {
      m.emplace_back(t->rows(), t->cols());
      v.emplace_back(t->rows(), t->cols());
    }
  }

  void step(const TrainConfig &c, size_t t, double grad_scale,
            const std::vector<Matrix *> &grads) {
    const double bias1 = 1.0 - std::pow(c.adam_beta1, static_cast<double>(t));
    const double bias2 = 1.0 - std::pow(c.adam_beta2, static_cast<double>(t));
    for (size_t i = 0; i < params.size(); ++i) {
      auto &p = params[i]->data();
      const auto &g = grads[i]->data();
      auto &mi = m[i].data();
      auto &vi = v[i].data();
      for (size_t j = 0; j < p.size(); ++j) {
        const double gj = g[j] * grad_scale;
        mi[j] = c.adam_beta1 * mi[j] + (1.0 - c.adam_beta1) * gj;
        vi[j] = c.adam_beta2 * vi[j] + (1.0 - c.adam_beta2) * gj * gj;
        const double m_hat = mi[j] / bias1;
        const double v_hat = vi[j] / bias2;
        p[j] -= c.learning_rate * m_hat / (std::sqrt(v_hat) + c.adam_eps);
      }
    }
  }
};

}  // namespace

PassageCollection::PassageCollection(std::vector<Passage> passages)
    : passages_(std::move(passages)) {
  for (size_t i = 0; i < passages_.size(); ++i) {
    if (!index_.emplace(passages_[i].id, i).second) {
      throw InputError("duplicate passage id " + std::to_string(passages_[i].id));
    }
  }
}

PassageCollection PassageCollection::Parse(const std::string &jsonl) {
  std::vector<Passage> passages;
  std::istringstream in(jsonl);
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      json j = json::parse(line);
      passages.push_back({j.at("id").get<PassageId>(), j.value("title", ""),
                          j.at("text").get<std::string>()});
    } catch (const json::exception &e) {
      throw InputError("passages line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return PassageCollection(std::move(passages));
}

PassageCollection PassageCollection::Load(const std::string &path) {
  return Parse(read_file(path));
}

std::string PassageCollection::to_jsonl() const {
  std::string out;
  for (const auto &p : passages_) {
    out += json{{"id", p.id}, {"title", p.title}, {"text", p.text}}.dump() + "\n";
  }
  return out;
}

const Passage &PassageCollection::at(PassageId id) const {
  auto it = index_.find(id);
  if (it == index_.end()) throw InputError("unknown passage id " + std::to_string(id));
  return passages_[it->second];
}

std::vector<TrainingInstance> parse_training_set(const std::string &jsonl) {
  std::vector<TrainingInstance> out;
  std::istringstream in(jsonl);
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      json j = json::parse(line);
      TrainingInstance t;
      t.question = j.at("question").get<std::string>();
      auto positives = j.at("positive_ids").get<std::vector<PassageId>>();
      if (positives.empty()) throw InputError("no positive id");
      t.positive = positives.front();
      t.hard_negatives = j.value("hard_negative_ids", std::vector<PassageId>{});
      if (std::find(t.hard_negatives.begin(), t.hard_negatives.end(), t.positive) !=
          t.hard_negatives.end()) {
        throw InputError("positive passage listed as a hard negative");
      }
      out.push_back(std::move(t));
    } catch (const json::exception &e) {
      throw InputError("training line " + std::to_string(line_no) + ": " + e.what());
    } catch (const InputError &e) {
      throw InputError("training line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::vector<TrainingInstance> load_training_set(const std::string &path) {
  return parse_training_set(read_file(path));
}

std::string training_set_to_jsonl(const std::vector<TrainingInstance> &instances) {
  std::string out;
  for (const auto &t : instances) {
    json j = {{"question", t.question},
              {"positive_ids", std::vector<PassageId>{t.positive}},
              {"hard_negative_ids", t.hard_negatives}};
    out += j.dump() + "\n";
  }
  return out;
}

KprModel KprModel::Init(EncoderConfig config, std::shared_ptr<const AnchorDictionary> dictionary,
                        std::shared_ptr<EntityEmbeddingTable> entities, Rng &rng) {
  KprModel model;
  model.encoder = EncoderParams::Init(config, rng);
  model.kpr = KprParams::Init(config.hidden, config.max_tokens, config.dropout_p, rng);
  model.encoder_config = std::move(config);
  model.dictionary = std::move(dictionary);
  model.entities = std::move(entities);
  return model;
}

std::string query_input(const KprModel &model, const std::string &question) {
  return format_query(question, model.options.instruction);
}

std::string passage_input(const Passage &passage) {
  return format_passage(passage.title, passage.text);
}

Matrix embed_text(const KprModel &model, const std::string &text, Mode mode, Rng &rng,
                  EmbedCache *cache) {
  const auto &cfg = model.encoder_config;
  TokenSequence tokens = tokenize(text, cfg.vocab, cfg.max_tokens);
  EncoderOutput enc = encode(tokens, model.encoder, cfg, mode, rng,
                             cache ? &cache->encoder : nullptr);
  if (cache) cache->length = enc.length;
  Matrix h_cls = enc.cls();
  if (!model.options.use_kpr) return h_cls;

  std::vector<Mention> mentions;
  if (model.dictionary) mentions = model.dictionary->link(tokens);
  static const EntityEmbeddingTable kEmpty;
  const EntityEmbeddingTable &table = model.entities ? *model.entities : kEmpty;
  EntityInputs inputs = build_entity_inputs(mentions, table, model.kpr);
  if (cache) cache->linked_rows = inputs.entity_count;
  AttendOptions options{model.options.activation, model.options.length_bias};
  return attend(h_cls, inputs, model.kpr, options, mode, rng, cache ? &cache->attend : nullptr);
}

Matrix embed_query(const KprModel &model, const std::string &question) {
  Rng rng(0);
  return embed_text(model, query_input(model, question), Mode::kEval, rng);
}

Matrix embed_passage(const KprModel &model, const Passage &passage) {
  Rng rng(0);
  return embed_text(model, passage_input(passage), Mode::kEval, rng);
}

void embed_backward(const KprModel &model, const Matrix &d_embedding, const EmbedCache &cache,
                    bool train_encoder, EncoderParams &d_encoder, KprParams &d_kpr) {
  Matrix d_h = d_embedding;
  if (model.options.use_kpr) {
    d_h = attend_backward(d_embedding, cache.attend, model.kpr, d_kpr).d_h_cls;
  }
  if (!train_encoder) return;
  Matrix d_last(cache.length, model.encoder_config.hidden);
  std::copy(d_h.data().begin(), d_h.data().end(), d_last.row(0).begin());
  encode_backward(d_last, cache.encoder, model.encoder, model.encoder_config, d_encoder);
}

double score(const Matrix &e_q, const Matrix &e_p, Similarity similarity, double temperature) {
  if (!(temperature > 0.0)) throw ParameterError("temperature must be positive");
  if (e_q.size() != e_p.size()) {
    throw ShapeError("score of " + e_q.shape_string() + " and " + e_p.shape_string());
  }
  const double d = dot(e_q.data(), e_p.data());
  if (similarity == Similarity::kDot) return d / temperature;
  const double nq = l2_norm(e_q.data());
  const double np = l2_norm(e_p.data());
  if (nq == 0.0 || np == 0.0) throw NumericError("cosine similarity of a zero vector");
  return d / (nq * np * temperature);
}

InBatchLoss in_batch_loss(const Matrix &queries, const Matrix &passages,
                          const std::vector<size_t> &positives, Similarity similarity,
                          double temperature) {
  const size_t b = queries.rows();
  const size_t p = passages.rows();
  const size_t d = queries.cols();
  if (b == 0 || p == 0) throw InputError("empty batch");
  if (positives.size() != b) throw ShapeError("one positive per query required");
  if (passages.cols() != d) {
    throw ShapeError("queries " + queries.shape_string() + " vs passages " + passages.shape_string());
  }
  if (!(temperature > 0.0)) throw ParameterError("temperature must be positive");

  std::vector<double> qn(b, 1.0), pn(p, 1.0);
  if (similarity == Similarity::kCosine) {
    for (size_t i = 0; i < b; ++i) qn[i] = l2_norm(queries.row(i));
    for (size_t j = 0; j < p; ++j) pn[j] = l2_norm(passages.row(j));
    for (double n : qn) if (n == 0.0) throw NumericError("cosine similarity of a zero query");
    for (double n : pn) if (n == 0.0) throw NumericError("cosine similarity of a zero passage");
  }

  Matrix dots = matmul_nt(queries, passages);
  Matrix scores(b, p);
  for (size_t i = 0; i < b; ++i) {
    for (size_t j = 0; j < p; ++j) scores(i, j) = dots(i, j) / (qn[i] * pn[j] * temperature);
  }
  Matrix probs = softmax_row(scores);

  InBatchLoss out;
  Matrix d_scores = probs;
  for (size_t i = 0; i < b; ++i) {
    if (positives[i] >= p) throw ParameterError("positive index out of range");
    // log-sum-exp form keeps the loss finite when probs underflow.
    auto row = scores.row(i);
    const double max = *std::max_element(row.begin(), row.end());
    double sum = 0.0;
    for (double s : row) sum += std::exp(s - max);
    out.loss += (max + std::log(sum)) - row[positives[i]];
    d_scores(i, positives[i]) -= 1.0;
  }
  out.loss /= static_cast<double>(b);
  d_scores *= 1.0 / static_cast<double>(b);

  out.d_queries = Matrix(b, d);
  out.d_passages = Matrix(p, d);
  for (size_t i = 0; i < b; ++i) {
    for (size_t j = 0; j < p; ++j) {
      const double g = d_scores(i, j) / temperature;
      if (g == 0.0) continue;
      auto q = queries.row(i);
      auto ps = passages.row(j);
      auto dq = out.d_queries.row(i);
      auto dp = out.d_passages.row(j);
      if (similarity == Similarity::kDot) {
        for (size_t k = 0; k < d; ++k) {
          dq[k] += g * ps[k];
          dp[k] += g * q[k];
        }
      } else {
        const double inv = 1.0 / (qn[i] * pn[j]);
        const double c = dots(i, j) * inv;
        for (size_t k = 0; k < d; ++k) {
          dq[k] += g * (ps[k] * inv - c * q[k] / (qn[i] * qn[i]));
          dp[k] += g * (q[k] * inv - c * ps[k] / (pn[j] * pn[j]));
        }
      }
    }
  }
  return out;
}

void TrainConfig::validate() const {
  if (batch_size == 0) throw ParameterError("batch_size must be positive");
  if (!(learning_rate > 0.0)) throw ParameterError("learning_rate must be positive");
  if (!(temperature > 0.0)) throw ParameterError("temperature must be positive");
  if (freeze_base && baseline) {
    throw ParameterError("a frozen base with the baseline path leaves nothing to train");
  }
}

void TrainConfig::apply_to(ModelOptions &options) const {
  options.activation = activation;
  options.length_bias = length_bias;
  options.similarity = similarity;
  options.temperature = temperature;
  options.use_kpr = !baseline;
  options.instruction = instruction;
}

BatchGradients batch_loss(const KprModel &model, const std::vector<TrainingInstance> &batch,
                          const PassageCollection &passages, bool train_encoder, Mode mode,
                          Rng &rng) {
  if (batch.empty()) throw InputError("empty batch");

  std::vector<PassageId> passage_ids;
  std::vector<size_t> positives;
  for (const auto &inst : batch) {
    positives.push_back(passage_ids.size());
    passage_ids.push_back(inst.positive);
    for (PassageId neg : inst.hard_negatives) passage_ids.push_back(neg);
  }
  std::set<PassageId> seen;
  for (PassageId id : passage_ids) {
    if (!seen.insert(id).second) {
      throw InputError("batch construction: passage " + std::to_string(id) + " appears twice");
    }
  }

  const size_t d = model.encoder_config.hidden;
  std::vector<EmbedCache> q_cache(batch.size()), p_cache(passage_ids.size());
  Matrix queries(batch.size(), d), embedded(passage_ids.size(), d);
  for (size_t i = 0; i < batch.size(); ++i) {
    Matrix e = embed_text(model, query_input(model, batch[i].question), mode, rng, &q_cache[i]);
    std::copy(e.data().begin(), e.data().end(), queries.row(i).begin());
  }
  for (size_t j = 0; j < passage_ids.size(); ++j) {
    Matrix e = embed_text(model, passage_input(passages.at(passage_ids[j])), mode, rng, &p_cache[j]);
    std::copy(e.data().begin(), e.data().end(), embedded.row(j).begin());
  }

  InBatchLoss loss = in_batch_loss(queries, embedded, positives, model.options.similarity,
                                   model.options.temperature);
  BatchGradients out;
  out.loss = loss.loss;
  out.encoder = EncoderParams::ZerosLike(model.encoder);
  out.kpr = KprParams::ZerosLike(model.kpr);
  for (size_t i = 0; i < batch.size(); ++i) {
    embed_backward(model, Matrix::RowVector(loss.d_queries.row(i)), q_cache[i], train_encoder,
                   out.encoder, out.kpr);
  }
  for (size_t j = 0; j < passage_ids.size(); ++j) {
    embed_backward(model, Matrix::RowVector(loss.d_passages.row(j)), p_cache[j], train_encoder,
                   out.encoder, out.kpr);
  }
  return out;
}

std::vector<std::vector<TrainingInstance>> make_batches(std::vector<TrainingInstance> instances,
                                                        size_t batch_size) {
  if (batch_size == 0) throw ParameterError("batch_size must be positive");
  std::vector<std::vector<TrainingInstance>> batches;
  std::vector<TrainingInstance> pending = std::move(instances);
  while (!pending.empty()) {
    std::vector<TrainingInstance> batch, deferred;
    std::set<PassageId> used;
    for (auto &inst : pending) {
      bool fits = batch.size() < batch_size && !used.count(inst.positive);
      for (PassageId neg : inst.hard_negatives) fits = fits && !used.count(neg);
      if (!fits) {
        deferred.push_back(std::move(inst));
        continue;
      }
      used.insert(inst.positive);
      used.insert(inst.hard_negatives.begin(), inst.hard_negatives.end());
      batch.push_back(std::move(inst));
    }
    if (batch.empty()) throw InputError("instance repeats a passage id within itself");
    batches.push_back(std::move(batch));
    pending = std::move(deferred);
  }
  return batches;
}

TrainResult train(KprModel &model, const std::vector<TrainingInstance> &dataset,
                  const PassageCollection &passages, const TrainConfig &config) {
  config.validate();
  if (dataset.empty()) throw InputError("empty training set");
  config.apply_to(model.options);

  const uint64_t table_checksum = model.entities ? model.entities->checksum() : 0;
  const bool train_encoder = !config.freeze_base;
  const bool train_kpr = model.options.use_kpr;

  Rng master(config.seed);
  Rng shuffle_rng = master.fork();
  Rng dropout_rng = master.fork();

  AdamGroup encoder_adam(tensors(model.encoder));
  AdamGroup kpr_adam(tensors(model.kpr));

  TrainResult result;
  double best = std::numeric_limits<double>::infinity();
  size_t stale = 0;
  for (size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::vector<TrainingInstance> order = dataset;
    shuffle_rng.shuffle(order);
    double epoch_loss = 0.0;
    size_t epoch_batches = 0;
    for (auto &batch : make_batches(std::move(order), config.batch_size)) {
      if (config.max_steps && result.steps >= config.max_steps) break;
      BatchGradients g = batch_loss(model, batch, passages, train_encoder, Mode::kTrain, dropout_rng);
      if (!std::isfinite(g.loss)) {
        throw NumericError("non-finite loss " + std::to_string(g.loss) + " at epoch " +
                           std::to_string(epoch) + ", step " + std::to_string(result.steps));
      }
      const auto d_encoder = tensors(g.encoder);
      const auto d_kpr = tensors(g.kpr);
      double sq = squared_norm(d_kpr);
      if (train_encoder) sq += squared_norm(d_encoder);
      const double norm = std::sqrt(sq);
      if (!std::isfinite(norm)) {
        throw NumericError("non-finite gradient norm at step " + std::to_string(result.steps));
      }
      const double scale = (config.clip_norm > 0.0 && norm > config.clip_norm)
                               ? config.clip_norm / norm
                               : 1.0;

      ++result.steps;
      if (train_encoder) encoder_adam.step(config, result.steps, scale, d_encoder);
      if (train_kpr) kpr_adam.step(config, result.steps, scale, d_kpr);
      epoch_loss += g.loss;
      ++epoch_batches;
    }
    if (epoch_batches == 0) break;
    epoch_loss /= static_cast<double>(epoch_batches);
    result.epoch_losses.push_back(epoch_loss);

    if (config.patience > 0) {
      if (epoch_loss < best - 1e-6) {
        best = epoch_loss;
        stale = 0;
      } else if (++stale >= config.patience) {
        result.early_stopped = true;
        break;
      }
    }
    if (config.max_steps && result.steps >= config.max_steps) break;
  }

  if (model.entities && model.entities->checksum() != table_checksum) {
    throw UsageError("entity table changed during training");
  }
  return result;
}

}  // namespace kpr
