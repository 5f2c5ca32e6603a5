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

#include "kpr/synth.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <set>

#include "kpr/error.h"
#include "kpr/tensor_io.h"

namespace kpr {

namespace {

const std::vector<std::string> kFirstNames = {
    "anna", "boris", "clara", "dmitri", "elena", "felix", "greta", "hugo",  "iris",  "jonas",
    "karla", "leon", "mira",  "nils",   "olga",  "pavel", "rosa",  "sven",  "tara",  "viktor",
    "alma", "bruno", "cora",  "dario",  "edith", "fritz", "gina",  "henri", "ida",   "jakob"};
const std::vector<std::string> kProfessions = {"teacher", "painter", "doctor", "pilot",
                                               "farmer",  "singer",  "baker",  "lawyer",
                                               "sailor",  "chemist", "poet",   "architect"};
const std::vector<std::string> kCities = {"rome",  "oslo",  "lima",  "cairo", "quito", "dakar",
                                          "hanoi", "perth", "tunis", "riga",  "lyon",  "turin"};
const std::vector<std::string> kOnsets = {"b", "d", "g", "k", "l", "m", "n", "p",
                                          "r", "s", "t", "v", "z", "br", "dr", "gr",
                                          "kr", "st", "tr", "vl"};
const std::vector<std::string> kVowels = {"a", "e", "i", "o", "u"};
const std::vector<std::string> kCodas = {"", "", "n", "r", "l", "s", "k", "x"};
const std::vector<std::string> kTrainTemplates = {"who is {}", "tell me about {}",
                                                  "what is known about {}"};
const std::vector<std::string> kPassageTemplates = {
    "{} is a {p} from {c}.", "{} moved to {c} and worked as a {p}.",
    "friends of {} know the {p} from {c}."};

std::string fill(const std::string &tmpl, const std::string &name, const std::string &p = "",
                 const std::string &c = "") {
  std::string out = tmpl;
  auto replace = [&](const std::string &key, const std::string &value) {
    for (auto pos = out.find(key); pos != std::string::npos; pos = out.find(key, pos)) {
      out.replace(pos, key.size(), value);
      pos += value.size();
    }
  };
  replace("{p}", p);
  replace("{c}", c);
  replace("{}", name);
  return out;
}

std::string pseudo_word(Rng &rng) {
  std::string w;
  const size_t syllables = 2 + rng.below(2);
  for (size_t s = 0; s < syllables; ++s) {
    w += kOnsets[rng.below(kOnsets.size())];
    w += kVowels[rng.below(kVowels.size())];
  }
  w += kCodas[rng.below(kCodas.size())];
  return w;
}

}  // namespace

void SynthConfig::validate() const {
  if (entities < 2) throw ParameterError("synth needs at least 2 entities");
  if (first_names < 1 || first_names > kFirstNames.size()) {
    throw ParameterError("first_names must be in [1, " + std::to_string(kFirstNames.size()) + "]");
  }
  if (passages_per_entity < 1 || passages_per_entity > kPassageTemplates.size()) {
    throw ParameterError("passages_per_entity must be in [1, " +
                         std::to_string(kPassageTemplates.size()) + "]");
  }
  if (!(max_frequency >= 1.0)) throw ParameterError("max_frequency must be >= 1");
  if (!(alias_rate >= 0.0 && alias_rate <= 1.0)) throw ParameterError("alias_rate outside [0, 1]");
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ParameterError("train_fraction outside (0, 1)");
  }
}

PassageId SynthCorpus::first_passage(EntityId id) const {
  for (const auto &[pid, e] : passage_entity) {
    if (e == id) return pid;
  }
  throw InputError("entity " + std::to_string(id) + " has no passage");
}

std::string synth_eval_question(const std::string &name) { return "who is " + name; }

SynthCorpus generate_synth(const SynthConfig &config) {
  config.validate();
  Rng rng(config.seed);
  SynthCorpus out;
  const size_t n = config.entities;

  std::set<std::string> used(kFirstNames.begin(), kFirstNames.end());
  used.insert(kProfessions.begin(), kProfessions.end());
  used.insert(kCities.begin(), kCities.end());
  std::vector<std::string> profession(n), city(n);
  for (size_t i = 0; i < n; ++i) {
    out.first.push_back(kFirstNames[rng.below(config.first_names)]);
    std::string surname;
    do {
      surname = pseudo_word(rng);
    } while (!used.insert(surname).second);
    out.last.push_back(surname);
    profession[i] = kProfessions[rng.below(kProfessions.size())];
    city[i] = kCities[rng.below(kCities.size())];
    out.entities.add(out.name(i));
  }

  const double s = n > 1 ? std::log(config.max_frequency) / std::log(static_cast<double>(n)) : 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double f = std::round(config.max_frequency / std::pow(static_cast<double>(i + 1), s));
    out.frequency.push_back(std::max(1.0, f));
  }

  // One anchor per document; the first anchor of each entity uses the full
  // name so every entity is reachable through the dictionary.
  size_t doc = 0;
  for (size_t i = 0; i < n; ++i) {
    const auto count = static_cast<size_t>(out.frequency[i]);
    for (size_t a = 0; a < count; ++a) {
      const bool alias = a > 0 && rng.bernoulli(config.alias_rate);
      const std::string surface = alias ? out.first[i] : out.name(i);
      const std::string &c = kCities[rng.below(kCities.size())];
      Document d;
      d.id = "doc" + std::to_string(doc++);
      d.title = "visit " + std::to_string(doc);
      d.text = surface + " visited " + c + " last spring.";
      d.anchors.push_back({0, surface.size(), i});
      out.hyperlinks.documents.push_back(std::move(d));
    }
  }
  rng.shuffle(out.hyperlinks.documents);

  std::vector<Passage> passages;
  for (size_t i = 0; i < n; ++i) {
    for (size_t j = 0; j < config.passages_per_entity; ++j) {
      const PassageId id = i * config.passages_per_entity + j;
      passages.push_back({id, out.name(i), fill(kPassageTemplates[j], out.name(i), profession[i],
                                                city[i])});
      out.passage_entity[id] = i;
    }
  }
  out.passages = PassageCollection(std::move(passages));

  const auto train_count = std::max<size_t>(
      1, static_cast<size_t>(std::floor(config.train_fraction * static_cast<double>(n))));
  for (size_t i = 0; i < n; ++i) {
    (i < train_count ? out.train_entities : out.held_out).push_back(i);
  }

  // Hard negative: another training entity sharing the first name when one
  // exists, otherwise any other training entity.
  for (EntityId e : out.train_entities) {
    std::vector<EntityId> same;
    for (EntityId o : out.train_entities) {
      if (o != e && out.first[o] == out.first[e]) same.push_back(o);
    }
    for (const auto &tmpl : kTrainTemplates) {
      EntityId neg;
      if (!same.empty()) {
        neg = same[rng.below(same.size())];
      } else {
        do {
          neg = out.train_entities[rng.below(out.train_entities.size())];
        } while (neg == e && out.train_entities.size() > 1);
      }
      TrainingInstance inst;
      inst.question = fill(tmpl, out.name(e));
      inst.positive = out.first_passage(e) + rng.below(config.passages_per_entity);
      if (neg != e) inst.hard_negatives.push_back(out.first_passage(neg));
      out.train.push_back(std::move(inst));
    }
  }

  std::set<EntityId> held(out.held_out.begin(), out.held_out.end());
  for (size_t i = 0; i < n; ++i) {
    EvalQuery q;
    q.question = synth_eval_question(out.name(i));
    for (size_t j = 0; j < config.passages_per_entity; ++j) {
      q.gold_ids.push_back(i * config.passages_per_entity + j);
    }
    q.entity_frequency = out.frequency[i];
    out.eval.push_back(q);
    if (held.count(i)) out.rare_eval.push_back(q);
  }
  return out;
}

void SynthCorpus::save(const std::string &dir) const {
  std::filesystem::create_directories(dir);
  const std::filesystem::path base(dir);
  write_file_atomic((base / "entities.tsv").string(), entities.to_tsv());
  write_file_atomic((base / "corpus.jsonl").string(), hyperlinks.to_jsonl());
  write_file_atomic((base / "passages.jsonl").string(), passages.to_jsonl());
  write_file_atomic((base / "train.jsonl").string(), training_set_to_jsonl(train));
  write_file_atomic((base / "eval.jsonl").string(), eval_set_to_jsonl(eval));
  write_file_atomic((base / "eval_rare.jsonl").string(), eval_set_to_jsonl(rare_eval));
}

}  // namespace kpr
