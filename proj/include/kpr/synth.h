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

#ifndef KPR_SYNTH_H_
#define KPR_SYNTH_H_

#include <cstddef>
#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "kpr/anchor_linker.h"
#include "kpr/retrieval_eval.h"
#include "kpr/retriever.h"

namespace kpr {

// Generator for a rare-entity retrieval corpus. Entities are "first last"
// people; first names come from a small shared pool and double as ambiguous
// anchor aliases, surnames are unique made-up words. Entity i receives
// round(max_frequency / (i+1)^s) anchors, s chosen so the last entity gets 1.
struct SynthConfig {
  size_t entities = 200;
  size_t first_names = 20;
  size_t passages_per_entity = 1;
  double max_frequency = 1000.0;
  // Fraction of non-first anchors written with the bare first name.
  double alias_rate = 0.3;
  // The most frequent entities, by this fraction, supply the training set.
  double train_fraction = 0.5;
  uint64_t seed = 0;

  void validate() const;
};

struct SynthCorpus {
  EntityVocabulary entities;
  std::vector<double> frequency;  // anchors per entity id
  std::vector<std::string> first, last;
  std::vector<EntityId> train_entities;
  std::vector<EntityId> held_out;  // every entity outside training
  HyperlinkCorpus hyperlinks;
  PassageCollection passages;
  std::map<PassageId, EntityId> passage_entity;
  std::vector<TrainingInstance> train;
  std::vector<EvalQuery> eval;       // one query per entity
  std::vector<EvalQuery> rare_eval;  // held-out entities only

  std::string name(EntityId id) const { return first[id] + " " + last[id]; }
  PassageId first_passage(EntityId id) const;

  // entities.tsv, corpus.jsonl, passages.jsonl, train.jsonl, eval.jsonl,
  // eval_rare.jsonl
  void save(const std::string &dir) const;
};

SynthCorpus generate_synth(const SynthConfig &config);

// Question used for evaluation queries; never seen in training.
std::string synth_eval_question(const std::string &name);

}  // namespace kpr

#endif  // KPR_SYNTH_H_
