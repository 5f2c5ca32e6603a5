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

#include <filesystem>

#include "gtest/gtest.h"
#include "kpr/error.h"
#include "kpr/tokenizer.h"
#include "testing.h"

namespace kpr {
namespace {

std::vector<std::string> pieces(const TokenSequence &seq) {
  std::vector<std::string> out;
  for (const auto &t : seq.tokens) out.push_back(t.piece);
  return out;
}

Vocab small_vocab() {
  return Vocab({"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]", "apple", "b", "big", "t", "who",
                "is", "x"});
}

TEST(VocabTest, RequiresEachSpecialOnce) {
  EXPECT_THROW(Vocab({"[PAD]", "[UNK]", "[CLS]", "[SEP]"}), InputError);
  EXPECT_THROW(Vocab({"[PAD]", "[UNK]", "[CLS]", "[SEP]", "[MASK]", "[SEP]"}), InputError);
  Vocab v = small_vocab();
  EXPECT_EQ(v.id("apple"), 5);
  EXPECT_EQ(v.id("nope"), v.unk_id());
  EXPECT_FALSE(v.find("nope").has_value());
}

TEST(VocabTest, BuildCountsAndRoundTrips) {
  Vocab v = Vocab::Build({"b a b", "c b a"}, 2);
  EXPECT_EQ(v.size(), 7u);
  EXPECT_EQ(v.token(5), "a");
  EXPECT_EQ(v.token(6), "b");
  auto path = std::filesystem::temp_directory_path() / "kpr_vocab_test.txt";
  v.Save(path.string());
  Vocab loaded = Vocab::Load(path.string());
  EXPECT_EQ(loaded.tokens(), v.tokens());
  std::filesystem::remove(path);
}

TEST(TokenizeTest, CaseFolding) {
  auto seq = tokenize("Apple", small_vocab(), 64);
  EXPECT_EQ(pieces(seq), (std::vector<std::string>{"[CLS]", "apple", "[SEP]"}));
  EXPECT_EQ(seq.ids(), (std::vector<int32_t>{2, 5, 3}));
  EXPECT_EQ(seq.tokens[1].start, 0u);
  EXPECT_EQ(seq.tokens[1].end, 5u);
}

TEST(TokenizeTest, PunctuationSplitsAndUnknowns) {
  Vocab v = small_vocab();
  auto seq = tokenize("zzzz-unknown", v, 64);
  EXPECT_EQ(seq.ids(), (std::vector<int32_t>{v.cls_id(), v.unk_id(), v.unk_id(), v.sep_id()}));
}

TEST(TokenizeTest, TruncationKeepsClsAndSep) {
  Vocab v = small_vocab();
  std::string text;
  for (int i = 0; i < 500; ++i) text += "apple ";
  auto seq = tokenize(text, v, 64);
  ASSERT_EQ(seq.size(), 64u);
  EXPECT_EQ(seq.tokens.front().id, v.cls_id());
  EXPECT_EQ(seq.tokens.back().id, v.sep_id());
  for (size_t i = 1; i + 1 < seq.size(); ++i) EXPECT_EQ(seq.tokens[i].id, 5);
}

TEST(TokenizeTest, SpansAreOrderedAndDisjoint) {
  Rng rng(4);
  Vocab v = testing::word_vocab(10);
  for (int trial = 0; trial < 50; ++trial) {
    auto seq = tokenize(testing::random_words(rng, 1 + rng.below(40), 10) + ", end.", v,
                        4 + rng.below(30));
    EXPECT_EQ(seq.tokens.front().id, v.cls_id());
    EXPECT_EQ(seq.tokens.back().id, v.sep_id());
    for (size_t i = 1; i < seq.size(); ++i) {
      EXPECT_LE(seq.tokens[i - 1].end, seq.tokens[i].start);
    }
  }
}

TEST(TokenizeTest, BlankTextIsRejected) {
  EXPECT_THROW(tokenize("", small_vocab(), 64), InputError);
  EXPECT_THROW(tokenize("  \t", small_vocab(), 64), InputError);
}

TEST(FormatTest, PassageLayout) {
  Vocab v = small_vocab();
  auto ids = tokenize(format_passage("T", "B"), v, 64).ids();
  EXPECT_EQ(ids, (std::vector<int32_t>{v.cls_id(), v.id("t"), v.sep_id(), v.id("b"), v.sep_id()}));
  auto no_title = tokenize(format_passage("", "B"), v, 64).ids();
  EXPECT_EQ(no_title, (std::vector<int32_t>{v.cls_id(), v.sep_id(), v.id("b"), v.sep_id()}));
  auto no_body = tokenize(format_passage("T", ""), v, 64).ids();
  EXPECT_EQ(no_body, (std::vector<int32_t>{v.cls_id(), v.id("t"), v.sep_id(), v.sep_id()}));
}

TEST(FormatTest, QueryInstruction) {
  EXPECT_EQ(format_query("who is x"), "who is x");
  EXPECT_EQ(format_query("who is x", std::string(kBgeQueryInstruction)),
            "Represent this sentence for searching relevant passages: who is x");
  EXPECT_THROW(format_query("", std::string(kBgeQueryInstruction)), InputError);
}

TEST(MaskSpanTest, SingleAndMultiToken) {
  Vocab v = small_vocab();
  auto seq = tokenize("who is big apple x", v, 64);
  auto [one, one_index] = mask_span(seq, {7, 10}, v);
  EXPECT_EQ(one.size(), seq.size());
  EXPECT_EQ(one_index, 3u);
  EXPECT_EQ(one.tokens[3].id, v.mask_id());

  auto [three, three_index] = mask_span(seq, {4, 16}, v);
  EXPECT_EQ(three.size(), seq.size() - 2);
  EXPECT_EQ(three_index, 2u);
  EXPECT_EQ(three.tokens[2].id, v.mask_id());
  EXPECT_EQ(three.tokens[3].piece, "x");
}

TEST(MaskSpanTest, UnalignedOrSpecialSpansFail) {
  Vocab v = small_vocab();
  auto seq = tokenize("who is big apple", v, 64);
  EXPECT_THROW(mask_span(seq, {8, 10}, v), AlignmentError);
  EXPECT_THROW(mask_span(seq, {0, 0}, v), AlignmentError);  // [CLS] only
  auto passage = tokenize(format_passage("t", "apple"), v, 64);
  // The literal [SEP] between title and text.
  EXPECT_THROW(mask_span(passage, {2, 7}, v), AlignmentError);
}

}  // namespace
}  // namespace kpr
