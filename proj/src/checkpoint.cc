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

#include "kpr/checkpoint.h"

#include <cmath>
#include <filesystem>
#include <sstream>

#include "kpr/anchor_linker.h"
#include "kpr/error.h"
#include "kpr/tensor_io.h"

namespace kpr {

namespace {

struct ModelParams {
  EncoderParams *encoder;
  KprParams *kpr;

  template <typename Fn>
  void for_each(Fn fn) {
    encoder->for_each(fn);
    kpr->for_each(fn);
  }
};

std::string trim(const std::string &s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

const std::string &get(const KeyValues &kv, const std::string &key) {
  auto it = kv.find(key);
  if (it == kv.end()) throw InputError("checkpoint config lacks '" + key + "'");
  return it->second;
}

size_t get_size(const KeyValues &kv, const std::string &key) {
  const std::string &v = get(kv, key);
  try {
    size_t used = 0;
    const unsigned long long n = std::stoull(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return static_cast<size_t>(n);
  } catch (const std::exception &) {
    throw InputError("'" + key + "' is not a non-negative integer: " + v);
  }
}

double get_double(const KeyValues &kv, const std::string &key) {
  const std::string &v = get(kv, key);
  try {
    size_t used = 0;
    const double d = std::stod(v, &used);
    if (used != v.size()) throw std::invalid_argument(v);
    return d;
  } catch (const std::exception &) {
    throw InputError("'" + key + "' is not a number: " + v);
  }
}

bool get_bool(const KeyValues &kv, const std::string &key) {
  const std::string &v = get(kv, key);
  if (v == "true") return true;
  if (v == "false") return false;
  throw InputError("'" + key + "' is not true/false: " + v);
}

std::string bool_string(bool b) { return b ? "true" : "false"; }

}  // namespace

KeyValues parse_key_values(const std::string &text) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    const auto eq = t.find('=');
    if (eq == std::string::npos) {
      throw InputError("config line " + std::to_string(line_no) + ": expected key = value");
    }
    kv[trim(t.substr(0, eq))] = trim(t.substr(eq + 1));
  }
  return kv;
}

std::string format_key_values(const KeyValues &kv) {
  std::string out;
  for (const auto &[k, v] : kv) out += k + " = " + v + "\n";
  return out;
}

std::string to_string(Activation activation) {
  return activation == Activation::kSigmoid ? "sigmoid" : "softmax";
}

std::string to_string(LengthBias bias) {
  return bias == LengthBias::kRowsWithNoop ? "rows" : "entities";
}

std::string to_string(Similarity similarity) {
  return similarity == Similarity::kDot ? "dot" : "cosine";
}

Activation parse_activation(const std::string &s) {
  if (s == "sigmoid") return Activation::kSigmoid;
  if (s == "softmax") return Activation::kSoftmax;
  throw ParameterError("activation must be sigmoid or softmax, got '" + s + "'");
}

LengthBias parse_length_bias(const std::string &s) {
  if (s == "rows") return LengthBias::kRowsWithNoop;
  if (s == "entities") return LengthBias::kEntityCount;
  throw ParameterError("length bias must be rows or entities, got '" + s + "'");
}

Similarity parse_similarity(const std::string &s) {
  if (s == "dot") return Similarity::kDot;
  if (s == "cosine") return Similarity::kCosine;
  throw ParameterError("similarity must be dot or cosine, got '" + s + "'");
}

KeyValues train_config_values(const TrainConfig &c) {
  return {
      {"train.batch_size", std::to_string(c.batch_size)},
      {"train.learning_rate", format_double(c.learning_rate)},
      {"train.epochs", std::to_string(c.epochs)},
      {"train.similarity", to_string(c.similarity)},
      {"train.temperature", format_double(c.temperature)},
      {"train.freeze_base", bool_string(c.freeze_base)},
      {"train.activation", to_string(c.activation)},
      {"train.length_bias", to_string(c.length_bias)},
      {"train.baseline", bool_string(c.baseline)},
      {"train.instruction", c.instruction.value_or("")},
      {"train.seed", std::to_string(c.seed)},
      {"train.max_steps", std::to_string(c.max_steps)},
      {"train.patience", std::to_string(c.patience)},
      {"train.clip_norm", format_double(c.clip_norm)},
      {"train.adam_beta1", format_double(c.adam_beta1)},
      {"train.adam_beta2", format_double(c.adam_beta2)},
      {"train.adam_eps", format_double(c.adam_eps)},
  };
}

TrainConfig train_config_from_values(const KeyValues &kv) {
  TrainConfig c;
  c.batch_size = get_size(kv, "train.batch_size");
  c.learning_rate = get_double(kv, "train.learning_rate");
  c.epochs = get_size(kv, "train.epochs");
  c.similarity = parse_similarity(get(kv, "train.similarity"));
  c.temperature = get_double(kv, "train.temperature");
  c.freeze_base = get_bool(kv, "train.freeze_base");
  c.activation = parse_activation(get(kv, "train.activation"));
  c.length_bias = parse_length_bias(get(kv, "train.length_bias"));
  c.baseline = get_bool(kv, "train.baseline");
  if (!get(kv, "train.instruction").empty()) c.instruction = get(kv, "train.instruction");
  c.seed = get_size(kv, "train.seed");
  c.max_steps = get_size(kv, "train.max_steps");
  c.patience = get_size(kv, "train.patience");
  c.clip_norm = get_double(kv, "train.clip_norm");
  c.adam_beta1 = get_double(kv, "train.adam_beta1");
  c.adam_beta2 = get_double(kv, "train.adam_beta2");
  c.adam_eps = get_double(kv, "train.adam_eps");
  return c;
}

void save_checkpoint(const std::string &dir, const KprModel &model, const KeyValues &extra) {
  std::filesystem::create_directories(dir);
  const auto &cfg = model.encoder_config;
  KprModel copy = model;
  ModelParams params{&copy.encoder, &copy.kpr};
  Matrix flat = flatten(params);

  TensorContainer c;
  c.dim = static_cast<uint32_t>(cfg.hidden);
  const size_t rows = (flat.size() + cfg.hidden - 1) / cfg.hidden;
  for (size_t r = 0; r < rows; ++r) {
    std::vector<double> row(cfg.hidden, 0.0);
    for (size_t j = 0; j < cfg.hidden && r * cfg.hidden + j < flat.size(); ++j) {
      row[j] = flat[r * cfg.hidden + j];
    }
    c.records.emplace_back(r, std::move(row));
  }

  KeyValues kv = extra;
  kv["model.layers"] = std::to_string(cfg.layers);
  kv["model.hidden"] = std::to_string(cfg.hidden);
  kv["model.max_tokens"] = std::to_string(cfg.max_tokens);
  kv["model.heads"] = std::to_string(cfg.heads);
  kv["model.ffn"] = std::to_string(cfg.ffn_dim());
  kv["model.dropout"] = format_double(cfg.dropout_p);
  kv["model.kpr_dropout"] = format_double(model.kpr.dropout_p);
  kv["model.parameters"] = std::to_string(flat.size());
  kv["model.activation"] = to_string(model.options.activation);
  kv["model.length_bias"] = to_string(model.options.length_bias);
  kv["model.similarity"] = to_string(model.options.similarity);
  kv["model.temperature"] = format_double(model.options.temperature);
  kv["model.use_kpr"] = bool_string(model.options.use_kpr);
  kv["model.instruction"] = model.options.instruction.value_or("");

  const std::filesystem::path base(dir);
  write_container((base / "params.kpre").string(), c);
  write_file_atomic((base / "config.txt").string(), format_key_values(kv));
  std::string vocab;
  for (const auto &t : cfg.vocab.tokens()) vocab += t + "\n";
  write_file_atomic((base / "vocab.txt").string(), vocab);
}

KeyValues load_checkpoint_values(const std::string &dir) {
  return parse_key_values(read_file((std::filesystem::path(dir) / "config.txt").string()));
}

KprModel load_checkpoint(const std::string &dir, std::shared_ptr<const AnchorDictionary> dictionary,
                         std::shared_ptr<EntityEmbeddingTable> entities) {
  const std::filesystem::path base(dir);
  const KeyValues kv = load_checkpoint_values(dir);
  EncoderConfig cfg;
  cfg.layers = get_size(kv, "model.layers");
  cfg.hidden = get_size(kv, "model.hidden");
  cfg.max_tokens = get_size(kv, "model.max_tokens");
  cfg.heads = get_size(kv, "model.heads");
  cfg.ffn = get_size(kv, "model.ffn");
  cfg.dropout_p = get_double(kv, "model.dropout");
  cfg.vocab = Vocab::Load((base / "vocab.txt").string());
  cfg.validate();

  KprModel model;
  model.encoder_config = cfg;
  Rng unused(0);
  model.encoder = EncoderParams::Init(cfg, unused);
  model.kpr = KprParams::Init(cfg.hidden, cfg.max_tokens, get_double(kv, "model.kpr_dropout"), unused);
  model.dictionary = std::move(dictionary);
  model.entities = std::move(entities);
  model.options.activation = parse_activation(get(kv, "model.activation"));
  model.options.length_bias = parse_length_bias(get(kv, "model.length_bias"));
  model.options.similarity = parse_similarity(get(kv, "model.similarity"));
  model.options.temperature = get_double(kv, "model.temperature");
  model.options.use_kpr = get_bool(kv, "model.use_kpr");
  if (!get(kv, "model.instruction").empty()) model.options.instruction = get(kv, "model.instruction");

  ModelParams params{&model.encoder, &model.kpr};
  const size_t count = parameter_count(params);
  if (count != get_size(kv, "model.parameters")) {
    throw InputError("checkpoint parameter count disagrees with its shape");
  }
  TensorContainer c = read_container((base / "params.kpre").string());
  if (c.dim != cfg.hidden || c.records.size() != (count + cfg.hidden - 1) / cfg.hidden) {
    throw InputError("checkpoint tensor container does not match the model shape");
  }
  Matrix flat(1, count);
  for (size_t r = 0; r < c.records.size(); ++r) {
    if (c.records[r].first != r) throw InputError("checkpoint rows out of order");
    for (size_t j = 0; j < cfg.hidden && r * cfg.hidden + j < count; ++j) {
      flat[r * cfg.hidden + j] = c.records[r].second[j];
    }
  }
  unflatten(flat, params);
  return model;
}

}  // namespace kpr
