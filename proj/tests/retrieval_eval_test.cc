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

#include <cmath>
#include <sstream>

#include "gtest/gtest.h"
#include "kpr/error.h"
#include "kpr/retrieval_eval.h"
#include "testing.h"

namespace kpr {
namespace {

PassageIndex scalar_index(const std::vector<std::pair<PassageId, double>> &rows) {
  PassageIndex index;
  index.embeddings = Matrix(rows.size(), 1);
  for (size_t i = 0; i < rows.size(); ++i) {
    index.ids.push_back(rows[i].first);
    index.embeddings(i, 0) = rows[i].second;
  }
  return index;
}

std::vector<PassageId> ids(const std::vector<SearchHit> &hits) {
  std::vector<PassageId> out;
  for (const auto &h : hits) out.push_back(h.id);
  return out;
}

TEST(SearchTest, Examples) {
  PassageIndex index = scalar_index({{3, 0.1}, {1, 0.9}, {2, 0.5}});
  Matrix q = Matrix::FromRows({{1}});
  EXPECT_EQ(ids(search(index, q, 2)), (std::vector<PassageId>{1, 2}));
  PassageIndex ties = scalar_index({{9, 1}, {4, 1}, {7, 1}});
  EXPECT_EQ(ids(search(ties, q, 2)), (std::vector<PassageId>{4, 7}));
  EXPECT_THROW(search(index, q, 0), ParameterError);
  EXPECT_THROW(search(index, q, 4), ParameterError);
}

TEST(SearchTest, MatchesFullSort) {
  Rng rng(1);
  for (int trial = 0; trial < 200; ++trial) {
    const size_t p = 1 + rng.below(40), d = 1 + rng.below(6);
    PassageIndex index;
    index.similarity = rng.bernoulli(0.5) ? Similarity::kDot : Similarity::kCosine;
    index.embeddings = Matrix(p, d);
    // Coarse values so that ties are common.
    for (double &v : index.embeddings.data()) v = static_cast<double>(rng.below(5)) - 2.0;
    for (size_t i = 0; i < p; ++i) {
      index.embeddings(i, 0) = 1.0 + static_cast<double>(rng.below(3));  // no zero rows
      index.ids.push_back(rng.next_u64() % 1000 * 1000 + i);
    }
    Matrix q(1, d);
    for (double &v : q.data()) v = static_cast<double>(rng.below(5)) - 2.0;
    q[0] = 1.0;
    const size_t k = 1 + rng.below(p);
    auto fast = search(index, q, k);
    auto slow = testing::full_sort_search(index, q, k);
    ASSERT_EQ(ids(fast), ids(slow));
    for (size_t i = 0; i < k; ++i) EXPECT_EQ(fast[i].score, slow[i].score);
  }
}

TEST(TopKAccuracyTest, Examples) {
  std::vector<std::vector<SearchHit>> results = {{{1, 0.9}, {2, 0.1}}, {{3, 0.5}, {4, 0.4}}};
  EXPECT_EQ(top_k_accuracy(results, {{1}, {3}}, 1), 1.0);
  EXPECT_EQ(top_k_accuracy(results, {{5}, {6}}, 2), 0.0);
  EXPECT_EQ(top_k_accuracy(results, {{1}, {4}}, 1), 0.5);
  EXPECT_EQ(top_k_accuracy(results, {{1}, {4}}, 2), 1.0);
  EXPECT_THROW(top_k_accuracy(results, {{1}, {}}, 1), InputError);
}

TEST(TopKAccuracyTest, MonotoneInK) {
  Rng rng(2);
  std::vector<std::vector<SearchHit>> results(30);
  std::vector<std::vector<PassageId>> golds(30);
  for (size_t q = 0; q < 30; ++q) {
    for (size_t r = 0; r < 10; ++r) results[q].push_back({rng.below(20), 0.0});
    golds[q] = {rng.below(20)};
  }
  double prev = 0.0;
  for (size_t k = 1; k <= 10; ++k) {
    const double acc = top_k_accuracy(results, golds, k);
    EXPECT_GE(acc, prev);
    prev = acc;
  }
}

TEST(FrequencyBinTest, EdgeTable) {
  EXPECT_EQ(frequency_bin(1), 0u);
  EXPECT_EQ(frequency_bin(10), 2u);
  EXPECT_EQ(frequency_bin(100), 5u);
  EXPECT_EQ(frequency_bin(10000), 9u);
  EXPECT_EQ(frequency_bin(1e7), 9u);
  EXPECT_EQ(frequency_bin(2.5), 0u);
  EXPECT_EQ(frequency_bin(2.52), 1u);
  EXPECT_THROW(frequency_bin(0.5), InputError);
  const double edges[] = {1.0,
                          2.5118864315095801,
                          6.3095734448019325,
                          15.848931924611133,
                          39.810717055349734,
                          100.0,
                          251.18864315095797,
                          630.95734448019323,
                          1584.8931924611136,
                          3981.0717055349733,
                          10000.0};
  for (size_t j = 0; j < kFrequencyBins; ++j) {
    EXPECT_NEAR(bin_edges(j).first, edges[j], 1e-9 * edges[j]);
    EXPECT_NEAR(bin_edges(j).second, edges[j + 1], 1e-9 * edges[j + 1]);
    EXPECT_EQ(frequency_bin(bin_edges(j).first), j);
  }
}

TEST(BinnedAccuracyTest, DecompositionAddsUp) {
  Rng rng(3);
  std::vector<std::vector<SearchHit>> results(100);
  std::vector<std::vector<PassageId>> golds(100);
  std::vector<double> freq(100);
  for (size_t q = 0; q < 100; ++q) {
    results[q] = {{rng.below(4), 0.0}};
    golds[q] = {rng.below(4)};
    freq[q] = std::pow(10.0, rng.uniform(0.0, 4.5));
  }
  auto bins = binned_accuracy(results, golds, freq, 1);
  size_t count = 0;
  double hits = 0.0;
  for (const auto &b : bins) {
    count += b.count;
    hits += static_cast<double>(b.count) * b.accuracy;
  }
  EXPECT_EQ(count, 100u);
  EXPECT_NEAR(hits, top_k_accuracy(results, golds, 1) * 100.0, 1e-9);
}

TEST(EvaluateTest, ReportAndTsv) {
  auto s = testing::tiny_setup(4, 8, 1, 4);
  PassageIndex index = build_index(s.model, s.passages);
  EXPECT_EQ(index.embeddings.rows(), s.passages.size());
  std::vector<EvalQuery> queries;
  for (const auto &inst : s.instances) {
    queries.push_back({inst.question, {inst.positive}, 3.0});
  }
  queries.push_back({"w1", {100}, std::nullopt});
  EvalReport report = evaluate(s.model, index, queries, {1, 5}, 5);
  EXPECT_EQ(report.hit_ranks.size(), queries.size());
  EXPECT_EQ(report.binned_queries, 4u);
  EXPECT_EQ(report.bins[1].count, 4u);
  EXPECT_LE(report.accuracy[0], report.accuracy[1]);

  std::istringstream tsv(report.bins_tsv());
  std::string line;
  std::getline(tsv, line);
  EXPECT_EQ(line, "bin_low\tbin_high\tn\taccuracy");
  size_t rows = 0;
  while (std::getline(tsv, line)) ++rows;
  EXPECT_EQ(rows, 10u);
  EXPECT_NE(report.to_json().find("\"top_k_accuracy\""), std::string::npos);
}

TEST(BuildIndexTest, IdenticalPassagesIdenticalRows) {
  auto s = testing::tiny_setup(5, 8, 1, 0);
  s.passages = PassageCollection({{1, "w1", "w2 w3"}, {2, "w1", "w2 w3"}, {3, "w4", "w5"}});
  PassageIndex index = build_index(s.model, s.passages);
  EXPECT_EQ(Matrix::RowVector(index.embeddings.row(0)), Matrix::RowVector(index.embeddings.row(1)));
  EXPECT_THROW(build_index(s.model, PassageCollection{}), InputError);
}

TEST(EvalSetTest, JsonlRoundTrip) {
  std::vector<EvalQuery> set = {{"q1", {1, 2}, 12.5}, {"q2", {3}, std::nullopt}};
  auto back = parse_eval_set(eval_set_to_jsonl(set));
  ASSERT_EQ(back.size(), 2u);
  EXPECT_EQ(back[0].gold_ids, (std::vector<PassageId>{1, 2}));
  EXPECT_EQ(*back[0].entity_frequency, 12.5);
  EXPECT_FALSE(back[1].entity_frequency.has_value());
  EXPECT_THROW(parse_eval_set("{\"question\": 1}"), InputError);
}

}  // namespace
}  // namespace kpr
