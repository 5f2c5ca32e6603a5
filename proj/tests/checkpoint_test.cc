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
#include "kpr/checkpoint.h"
#include "kpr/error.h"
#include "kpr/tensor_io.h"
#include "testing.h"

namespace kpr {
namespace {

namespace fs = std::filesystem;

template <typename Params>
std::vector<double> values(Params &p) {
  std::vector<double> out;
  p.for_each([&](const char *, Matrix &m) { out.insert(out.end(), m.data().begin(), m.data().end()); });
  return out;
}

TEST(KeyValuesTest, ParseAndFormat) {
  KeyValues kv = parse_key_values("# comment\n\n a = 1 \nb=two words\nc =\n");
  EXPECT_EQ(kv.size(), 3u);
  EXPECT_EQ(kv["a"], "1");
  EXPECT_EQ(kv["b"], "two words");
  EXPECT_EQ(kv["c"], "");
  EXPECT_EQ(format_key_values(kv), "a = 1\nb = two words\nc = \n");
  EXPECT_EQ(parse_key_values(format_key_values(kv)), kv);
  EXPECT_THROW(parse_key_values("a = 1\nbroken\n"), InputError);
}

TEST(EnumStringsTest, RoundTripAndReject) {
  for (auto a : {Activation::kSigmoid, Activation::kSoftmax}) {
    EXPECT_EQ(parse_activation(to_string(a)), a);
  }
  for (auto b : {LengthBias::kRowsWithNoop, LengthBias::kEntityCount}) {
    EXPECT_EQ(parse_length_bias(to_string(b)), b);
  }
  for (auto s : {Similarity::kDot, Similarity::kCosine}) {
    EXPECT_EQ(parse_similarity(to_string(s)), s);
  }
  EXPECT_THROW(parse_activation("relu"), ParameterError);
  EXPECT_THROW(parse_similarity("l2"), ParameterError);
}

TEST(TrainConfigValuesTest, RoundTrip) {
  TrainConfig c;
  c.batch_size = 3;
  c.learning_rate = 1.0 / 3.0;
  c.similarity = Similarity::kCosine;
  c.temperature = 0.05;
  c.freeze_base = true;
  c.activation = Activation::kSoftmax;
  c.length_bias = LengthBias::kEntityCount;
  c.instruction = "find:";
  c.seed = 1234567890123ULL;
  c.patience = 2;
  TrainConfig back = train_config_from_values(train_config_values(c));
  EXPECT_EQ(train_config_values(back), train_config_values(c));
  EXPECT_EQ(back.learning_rate, c.learning_rate);
  EXPECT_EQ(back.instruction, c.instruction);
}

TEST(CheckpointTest, RoundTripsParametersAtF32) {
  testing::TinySetup s = testing::tiny_setup(5, 12, 2, 4);
  s.model.options.similarity = Similarity::kCosine;
  s.model.options.instruction = "q:";
  const fs::path dir = fs::temp_directory_path() / "kpr_checkpoint_test";
  fs::remove_all(dir);
  save_checkpoint(dir.string(), s.model, {{"note", "x"}});
  KprModel loaded = load_checkpoint(dir.string(), s.model.dictionary, s.model.entities);

  EXPECT_EQ(loaded.encoder_config.vocab.tokens(), s.model.encoder_config.vocab.tokens());
  EXPECT_EQ(loaded.encoder_config.layers, 2u);
  EXPECT_EQ(loaded.encoder_config.hidden, 12u);
  EXPECT_EQ(loaded.options.similarity, Similarity::kCosine);
  EXPECT_EQ(loaded.options.instruction, std::optional<std::string>("q:"));
  EXPECT_EQ(loaded.kpr.dropout_p, s.model.kpr.dropout_p);

  std::vector<double> want = values(s.model.encoder);
  std::vector<double> kw = values(s.model.kpr);
  want.insert(want.end(), kw.begin(), kw.end());
  std::vector<double> got = values(loaded.encoder);
  std::vector<double> kg = values(loaded.kpr);
  got.insert(got.end(), kg.begin(), kg.end());
  ASSERT_EQ(got.size(), want.size());
  for (size_t i = 0; i < want.size(); ++i) {
    EXPECT_EQ(got[i], static_cast<double>(static_cast<float>(want[i])));
  }
  EXPECT_EQ(load_checkpoint_values(dir.string()).at("note"), "x");

  // Saving what was loaded reproduces the bytes.
  const fs::path again = fs::temp_directory_path() / "kpr_checkpoint_test_again";
  save_checkpoint(again.string(), loaded, {{"note", "x"}});
  for (const char *f : {"params.kpre", "config.txt", "vocab.txt"}) {
    EXPECT_EQ(read_file((dir / f).string()), read_file((again / f).string())) << f;
  }

  // A shape edit that disagrees with the stored tensors is rejected.
  KeyValues kv = load_checkpoint_values(dir.string());
  kv["model.layers"] = "1";
  write_file_atomic((dir / "config.txt").string(), format_key_values(kv));
  EXPECT_THROW(load_checkpoint(dir.string()), InputError);
  fs::remove_all(dir);
  fs::remove_all(again);
}

}  // namespace
}  // namespace kpr
