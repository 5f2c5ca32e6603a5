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

#ifndef KPR_RETRIEVAL_EVAL_H_
#define KPR_RETRIEVAL_EVAL_H_

#include <array>
#include <cstddef>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "kpr/retriever.h"

namespace kpr {

// Exact brute-force index over passage embeddings.
struct PassageIndex {
  std::vector<PassageId> ids;
  Matrix embeddings;  // row i belongs to ids[i]
  Similarity similarity = Similarity::kDot;
  double temperature = 1.0;

  size_t size() const { return ids.size(); }
};

PassageIndex build_index(const KprModel &model, const PassageCollection &passages);

struct SearchHit {
  PassageId id;
  double score;
};

// Top-k by descending score, ties by ascending id. ParameterError unless
// 1 <= k <= index size.
std::vector<SearchHit> search(const PassageIndex &index, const Matrix &query, size_t k);

// Fraction of queries whose top-k contains any gold id. InputError when a
// query has no gold ids.
double top_k_accuracy(const std::vector<std::vector<SearchHit>> &results,
                      const std::vector<std::vector<PassageId>> &golds, size_t k);

inline constexpr size_t kFrequencyBins = 10;

// Bin j covers [10^(0.4 j), 10^(0.4 (j+1))); the last bin is right-inclusive
// and absorbs frequencies above 10^4. InputError for frequency < 1.
size_t frequency_bin(double frequency);
std::pair<double, double> bin_edges(size_t bin);

struct BinStats {
  double low = 0.0;
  double high = 0.0;
  size_t count = 0;
  size_t hits = 0;
  double accuracy = 0.0;  // 0 for empty bins
};

std::array<BinStats, kFrequencyBins> binned_accuracy(
    const std::vector<std::vector<SearchHit>> &results,
    const std::vector<std::vector<PassageId>> &golds, const std::vector<double> &frequencies,
    size_t k);

struct EvalQuery {
  std::string question;
  std::vector<PassageId> gold_ids;
  std::optional<double> entity_frequency;
};

// JSON lines {"question", "gold_ids": [...], "entity_frequency": f}.
std::vector<EvalQuery> parse_eval_set(const std::string &jsonl);
std::vector<EvalQuery> load_eval_set(const std::string &path);
std::string eval_set_to_jsonl(const std::vector<EvalQuery> &queries);

struct EvalReport {
  std::vector<size_t> ks;
  std::vector<double> accuracy;                        // per k
  std::array<BinStats, kFrequencyBins> bins{};         // at bin_k
  size_t bin_k = 0;
  size_t binned_queries = 0;
  std::vector<std::optional<size_t>> hit_ranks;        // 1-based rank of first gold hit

  std::string to_json() const;
  // bin_low, bin_high, n, accuracy
  std::string bins_tsv() const;
};

// Searches every query with max(ks) and summarizes. Queries without a
// frequency are left out of the bins.
EvalReport evaluate(const KprModel &model, const PassageIndex &index,
                    const std::vector<EvalQuery> &queries, const std::vector<size_t> &ks,
                    size_t bin_k);

}  // namespace kpr

#endif  // KPR_RETRIEVAL_EVAL_H_
