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

#ifndef KPR_CHECKPOINT_H_
#define KPR_CHECKPOINT_H_

#include <map>
#include <memory>
#include <string>

#include "kpr/retriever.h"

namespace kpr {

using KeyValues = std::map<std::string, std::string>;

// "key = value" lines; blank lines and '#' comments are skipped.
KeyValues parse_key_values(const std::string &text);
std::string format_key_values(const KeyValues &kv);

std::string to_string(Activation activation);
std::string to_string(LengthBias bias);
std::string to_string(Similarity similarity);
Activation parse_activation(const std::string &s);
LengthBias parse_length_bias(const std::string &s);
Similarity parse_similarity(const std::string &s);

// Every TrainConfig field, keys prefixed "train.".
KeyValues train_config_values(const TrainConfig &config);
TrainConfig train_config_from_values(const KeyValues &kv);

// A checkpoint directory holds
//   params.kpre  encoder then attention parameters, flattened and cut into
//                rows of width D (the last row zero-padded); id = row index
//   config.txt   key = value sidecar: model shape, options, extra entries
//   vocab.txt    one token per line
void save_checkpoint(const std::string &dir, const KprModel &model, const KeyValues &extra = {});

// The dictionary and entity table are not part of a checkpoint.
KprModel load_checkpoint(const std::string &dir,
                         std::shared_ptr<const AnchorDictionary> dictionary = nullptr,
                         std::shared_ptr<EntityEmbeddingTable> entities = nullptr);
KeyValues load_checkpoint_values(const std::string &dir);

}  // namespace kpr

#endif  // KPR_CHECKPOINT_H_
