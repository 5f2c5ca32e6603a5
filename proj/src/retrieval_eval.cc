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

#include "kpr/retrieval_eval.h"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "json.hpp"
#include "kpr/error.h"
#include "kpr/tensor_io.h"

namespace kpr {

namespace {

using nlohmann::json;

bool hit_within(const std::vector<SearchHit> &hits, const std::vector<PassageId> &golds,
                size_t k) {
  const size_t n = std::min(k, hits.size());
  for (size_t r = 0; r < n; ++r) {
    if (std::find(golds.begin(), golds.end(), hits[r].id) != golds.end()) return true;
  }
  return false;
}

}  // namespace

PassageIndex build_index(const KprModel &model, const PassageCollection &passages) {
  if (passages.size() == 0) throw InputError("cannot index an empty passage collection");
  PassageIndex index;
  index.similarity = model.options.similarity;
  index.temperature = model.options.temperature;
  index.embeddings = Matrix(passages.size(), model.encoder_config.hidden);
  for (size_t i = 0; i < passages.size(); ++i) {
    const Passage &p = passages.passages()[i];
    Matrix e = embed_passage(model, p);
    if (!all_finite(e)) throw NumericError("non-finite embedding for passage " + std::to_string(p.id));
    std::copy(e.data().begin(), e.data().end(), index.embeddings.row(i).begin());
    index.ids.push_back(p.id);
  }
  return index;
}

std::vector<SearchHit> search(const PassageIndex &index, const Matrix &query, size_t k) {
  if (k < 1 || k > index.size()) {
    throw ParameterError("k = " + std::to_string(k) + " outside [1, " +
                         std::to_string(index.size()) + "]");
  }
  std::vector<SearchHit> hits;
  hits.reserve(index.size());
  for (size_t i = 0; i < index.size(); ++i) {
    hits.push_back({index.ids[i], score(query, Matrix::RowVector(index.embeddings.row(i)),
                                        index.similarity, index.temperature)});
  }
  auto better = [](const SearchHit &a, const SearchHit &b) {
    if (a.score != b.score) return a.score > b.score;
    return a.id < b.id;
  };
  std::partial_sort(hits.begin(), hits.begin() + static_cast<std::ptrdiff_t>(k), hits.end(), better);
  hits.resize(k);
  return hits;
}

double top_k_accuracy(const std::vector<std::vector<SearchHit>> &results,
                      const std::vector<std::vector<PassageId>> &golds, size_t k) {
  if (results.size() != golds.size()) throw ShapeError("results and golds differ in length");
  if (results.empty()) throw InputError("no queries to evaluate");
  size_t hits = 0;
  for (size_t q = 0; q < results.size(); ++q) {
    if (golds[q].empty()) throw InputError("query " + std::to_string(q) + " has no gold ids");
    if (hit_within(results[q], golds[q], k)) ++hits;
  }
  return static_cast<double>(hits) / static_cast<double>(results.size());
}

std::pair<double, double> bin_edges(size_t bin) {
  if (bin >= kFrequencyBins) throw ParameterError("bin index out of range");
  // 2j/5 is exact for the integral edges (j = 0, 5, 10).
  auto edge = [](size_t j) { return std::pow(10.0, 2.0 * static_cast<double>(j) / 5.0); };
  return {edge(bin), edge(bin + 1)};
}

size_t frequency_bin(double frequency) {
  if (!(frequency >= 1.0)) {
    throw InputError("entity frequency must be >= 1, got " + std::to_string(frequency));
  }
  size_t bin = 0;
  while (bin + 1 < kFrequencyBins && frequency >= bin_edges(bin + 1).first) ++bin;
  return bin;
}

std::array<BinStats, kFrequencyBins> binned_accuracy(
    const std::vector<std::vector<SearchHit>> &results,
    const std::vector<std::vector<PassageId>> &golds, const std::vector<double> &frequencies,
    size_t k) {
  if (results.size() != golds.size() || results.size() != frequencies.size()) {
    throw ShapeError("results, golds and frequencies differ in length");
  }
  std::array<BinStats, kFrequencyBins> bins{};
  for (size_t b = 0; b < kFrequencyBins; ++b) {
    std::tie(bins[b].low, bins[b].high) = bin_edges(b);
  }
  for (size_t q = 0; q < results.size(); ++q) {
    if (golds[q].empty()) throw InputError("query " + std::to_string(q) + " has no gold ids");
    BinStats &bin = bins[frequency_bin(frequencies[q])];
    ++bin.count;
    if (hit_within(results[q], golds[q], k)) ++bin.hits;
  }
  for (auto &bin : bins) {
    bin.accuracy = bin.count ? static_cast<double>(bin.hits) / static_cast<double>(bin.count) : 0.0;
  }
  return bins;
}

std::vector<EvalQuery> parse_eval_set(const std::string &jsonl) {
  std::vector<EvalQuery> out;
  std::istringstream in(jsonl);
  std::string line;
  size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      json j = json::parse(line);
      EvalQuery q;
      q.question = j.at("question").get<std::string>();
      q.gold_ids = j.at("gold_ids").get<std::vector<PassageId>>();
      if (j.contains("entity_frequency") && !j["entity_frequency"].is_null()) {
        q.entity_frequency = j["entity_frequency"].get<double>();
      }
      out.push_back(std::move(q));
    } catch (const json::exception &e) {
      throw InputError("eval line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::vector<EvalQuery> load_eval_set(const std::string &path) {
  return parse_eval_set(read_file(path));
}

std::string eval_set_to_jsonl(const std::vector<EvalQuery> &queries) {
  std::string out;
  for (const auto &q : queries) {
    json j = {{"question", q.question}, {"gold_ids", q.gold_ids}};
    if (q.entity_frequency) j["entity_frequency"] = *q.entity_frequency;
    out += j.dump() + "\n";
  }
  return out;
}

std::string EvalReport::to_json() const {
  json j;
  json acc = json::array();
  for (size_t i = 0; i < ks.size(); ++i) acc.push_back({{"k", ks[i]}, {"accuracy", accuracy[i]}});
  j["top_k_accuracy"] = acc;
  json bins_json = json::array();
  for (const auto &b : bins) {
    bins_json.push_back({{"bin_low", b.low}, {"bin_high", b.high}, {"n", b.count},
                         {"hits", b.hits}, {"accuracy", b.accuracy}});
  }
  j["bin_k"] = bin_k;
  j["binned_queries"] = binned_queries;
  j["bins"] = bins_json;
  json ranks = json::array();
  for (const auto &r : hit_ranks) ranks.push_back(r ? json(*r) : json(nullptr));
  j["hit_ranks"] = ranks;
  return j.dump(2);
}

std::string EvalReport::bins_tsv() const {
  std::string out = "bin_low\tbin_high\tn\taccuracy\n";
  char buf[128];
  for (const auto &b : bins) {
    std::snprintf(buf, sizeof(buf), "%.6g\t%.6g\t%zu\t%.6f\n", b.low, b.high, b.count, b.accuracy);
    out += buf;
  }
  return out;
}

EvalReport evaluate(const KprModel &model, const PassageIndex &index,
                    const std::vector<EvalQuery> &queries, const std::vector<size_t> &ks,
                    size_t bin_k) {
  if (ks.empty()) throw ParameterError("no k values");
  const size_t max_k = std::max(*std::max_element(ks.begin(), ks.end()), bin_k);
  EvalReport report;
  report.ks = ks;
  report.bin_k = bin_k;

  std::vector<std::vector<SearchHit>> results;
  std::vector<std::vector<PassageId>> golds;
  std::vector<std::vector<SearchHit>> binned_results;
  std::vector<std::vector<PassageId>> binned_golds;
  std::vector<double> frequencies;
  for (const auto &q : queries) {
    auto hits = search(index, embed_query(model, q.question), max_k);
    std::optional<size_t> rank;
    for (size_t r = 0; r < hits.size() && !rank; ++r) {
      if (std::find(q.gold_ids.begin(), q.gold_ids.end(), hits[r].id) != q.gold_ids.end()) {
        rank = r + 1;
      }
    }
    report.hit_ranks.push_back(rank);
    if (q.entity_frequency) {
      binned_results.push_back(hits);
      binned_golds.push_back(q.gold_ids);
      frequencies.push_back(*q.entity_frequency);
    }
    results.push_back(std::move(hits));
    golds.push_back(q.gold_ids);
  }
  for (size_t k : ks) report.accuracy.push_back(top_k_accuracy(results, golds, k));
  report.bins = binned_accuracy(binned_results, binned_golds, frequencies, bin_k);
  report.binned_queries = frequencies.size();
  return report;
}

}  // namespace kpr
