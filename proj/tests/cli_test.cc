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

#include <chrono>
#include <filesystem>
#include <map>
#include <sstream>

#include "gtest/gtest.h"
#include "json.hpp"
#include "kpr/checkpoint.h"
#include "kpr/cli.h"
#include "kpr/tensor_io.h"
#include "testing.h"

namespace kpr {
namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Outcome {
  int code;
  std::string out, err;
};

Outcome run(std::vector<std::string> args) {
  args.insert(args.begin(), "kpr");
  std::vector<const char *> argv;
  for (const auto &a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("kpr_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string &name) const { return (dir_ / name).string(); }
  static std::string toy(const std::string &name) { return std::string(KPR_TOY_DIR) + "/" + name; }

  fs::path dir_;
};

TEST_F(CliTest, FlopsDefaults) {
  Outcome r = run({"flops"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("\"flops_bert\":22045261824"), std::string::npos);
  EXPECT_NE(r.out.find("\"flops_kpr_att\":38952960"), std::string::npos);
  EXPECT_NE(r.out.find("attention share 0.18%"), std::string::npos);
}

TEST_F(CliTest, ExitCodes) {
  EXPECT_EQ(run({}).code, 1);
  EXPECT_EQ(run({"frobnicate"}).code, 1);
  EXPECT_EQ(run({"flops", "--bogus"}).code, 1);
  EXPECT_EQ(run({"flops", "--layers", "0"}).code, 1);
  EXPECT_EQ(run({"build-dict", "--corpus", path("missing.jsonl"), "--out-tsv", path("d.tsv")}).code,
            1);
  write_file_atomic(path("empty.jsonl"), "");
  EXPECT_EQ(run({"build-dict", "--corpus", path("empty.jsonl"), "--out-tsv", path("d.tsv")}).code,
            2);
  write_file_atomic(path("bad.jsonl"), "{not json\n");
  EXPECT_EQ(run({"build-dict", "--corpus", path("bad.jsonl"), "--out-tsv", path("d.tsv")}).code, 2);
  EXPECT_FALSE(fs::exists(path("d.tsv")));
  EXPECT_EQ(run({"flops", "--help"}).code, 0);
}

TEST_F(CliTest, BuildDictOnHandBuiltCorpus) {
  write_file_atomic(path("corpus.jsonl"), testing::linker_fixture().to_jsonl());
  Outcome r = run({"build-dict", "--corpus", path("corpus.jsonl"), "--out-tsv", path("a.tsv"),
               "--out-trie", path("a.kprt")});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(read_file(path("a.tsv")),
            "apple\t0.5\t2\t0.8\n"
            "freddie mercury\t1\t8\t1\n"
            "mercury\t0.9090909090909091\t6\t0.8\n"
            "michael jordan\t1\t10\t1\n"
            "new york\t0.8333333333333334\t0\t0.7\n"
            "new york\t0.8333333333333334\t1\t0.3\n"
            "paris\t0.05\t4\t0.5\n"
            "paris\t0.05\t5\t0.5\n");
  EXPECT_EQ(AnchorDictionary::ParseBinary(read_file(path("a.kprt"))).to_tsv(),
            read_file(path("a.tsv")));

  ASSERT_EQ(run({"build-dict", "--corpus", path("corpus.jsonl"), "--out-tsv", path("b.tsv"),
                 "--out-trie", path("b.kprt")})
                .code,
            0);
  EXPECT_EQ(read_file(path("a.tsv")), read_file(path("b.tsv")));
  EXPECT_EQ(read_file(path("a.kprt")), read_file(path("b.kprt")));
}

TEST_F(CliTest, ConfigFileSitsBetweenFlagsAndDefaults) {
  write_file_atomic(path("f.cfg"), "# shape\nlayers = 2\ndim = 64\n");
  ASSERT_EQ(run({"flops", "--config", path("f.cfg"), "--dim", "32", "--out", path("f.json")}).code, 0);
  json j = json::parse(read_file(path("f.json")));
  EXPECT_EQ(j["config"]["layers"], "2");
  EXPECT_EQ(j["config"]["dim"], "32");
  EXPECT_EQ(j["config"]["tokens"], "128");
  EXPECT_EQ(j["flops_bert"], 2ull * 2 * 32 * 128 * (12 * 32 + 128));

  write_file_atomic(path("bad.cfg"), "no equals sign\n");
  EXPECT_EQ(run({"flops", "--config", path("bad.cfg")}).code, 2);
}

TEST_F(CliTest, EmbedEntitiesVariants) {
  ASSERT_EQ(run({"init", "--train", toy("train.jsonl"), "--passages", toy("passages.jsonl"),
                 "--out", path("ck"), "--layers", "2", "--dim", "16", "--seed", "4"})
                .code,
            0);
  auto embed = [&](const std::string &out, std::vector<std::string> extra) {
    std::vector<std::string> args = {"embed-entities", "--corpus", toy("corpus.jsonl"), "--entities",
                                     toy("entities.tsv"), "--checkpoint", path("ck"), "--out",
                                     path(out), "--seed", "9"};
    args.insert(args.end(), extra.begin(), extra.end());
    Outcome r = run(args);
    EXPECT_EQ(r.code, 0) << r.err;
    return read_file(path(out));
  };
  const std::string last = embed("last.kpre", {});
  const std::string mid = embed("mid.kpre", {"--layer-index", "1"});
  const std::string last2 = embed("last2.kpre", {"--layer-index", "2"});
  EXPECT_NE(last, mid);
  EXPECT_EQ(last, last2);

  const KprModel model = load_checkpoint(path("ck"));
  const EntityEmbeddingTable loaded = EntityEmbeddingTable::Load(path("last.kpre"));
  EXPECT_EQ(loaded.size(), 60u);
  EXPECT_DOUBLE_EQ(loaded.reference_norm(), model.encoder.mean_token_norm());
  for (EntityId id : loaded.sorted_ids()) {
    double sq = 0.0;
    for (double v : *loaded.lookup(id)) sq += v * v;
    EXPECT_NEAR(std::sqrt(sq), loaded.reference_norm(), 1e-6);
  }

  embed("random.kpre", {"--random"});
  Rng rng(9);
  const EntityEmbeddingTable expected =
      random_table(EntityVocabulary::Load(toy("entities.tsv")), 16, 1.0,
                   model.encoder.mean_token_norm(), rng);
  const EntityEmbeddingTable random = EntityEmbeddingTable::Load(path("random.kpre"));
  ASSERT_EQ(random.sorted_ids(), expected.sorted_ids());
  for (EntityId id : expected.sorted_ids()) {
    for (size_t j = 0; j < 16; ++j) {
      EXPECT_EQ((*random.lookup(id))[j], static_cast<double>(static_cast<float>((*expected.lookup(id))[j])));
    }
  }
}

TEST_F(CliTest, ToyPipeline) {
  const auto start = std::chrono::steady_clock::now();
  const std::vector<std::string> inputs = {"corpus.jsonl", "entities.tsv",  "passages.jsonl",
                                           "train.jsonl",  "eval.jsonl",    "eval_rare.jsonl"};
  std::vector<std::string> before;
  for (const auto &f : inputs) before.push_back(read_file(toy(f)));

  auto ok = [](const Outcome &r) {
    EXPECT_EQ(r.code, 0) << r.err;
    return r;
  };
  ok(run({"build-dict", "--corpus", toy("corpus.jsonl"), "--out-tsv", path("dict.tsv"),
          "--out-trie", path("dict.kprt")}));
  ok(run({"init", "--train", toy("train.jsonl"), "--passages", toy("passages.jsonl"), "--out",
          path("ck0"), "--layers", "1", "--dim", "32", "--seed", "1"}));
  ok(run({"embed-entities", "--corpus", toy("corpus.jsonl"), "--entities", toy("entities.tsv"),
          "--checkpoint", path("ck0"), "--out", path("emb.kpre"), "--random", "--seed", "2"}));
  write_file_atomic(path("train.cfg"), "learning-rate = 0.005\nepochs = 15\nseed = 3\n");
  const std::vector<std::string> train_args = {
      "train",        "--config",     path("train.cfg"),   "--train",  toy("train.jsonl"),
      "--passages",   toy("passages.jsonl"), "--checkpoint", path("ck0"), "--dict",
      path("dict.kprt"), "--embeddings", path("emb.kpre")};
  auto with = [](std::vector<std::string> a, std::vector<std::string> b) {
    a.insert(a.end(), b.begin(), b.end());
    return a;
  };
  ok(run(with(train_args, {"--out", path("ck1"), "--report", path("train.json")})));
  ok(run(with(train_args, {"--out", path("ck1b"), "--report", path("train_b.json")})));
  EXPECT_EQ(read_file(path("ck1/params.kpre")), read_file(path("ck1b/params.kpre")));
  json first = json::parse(read_file(path("train.json")));
  json second = json::parse(read_file(path("train_b.json")));
  first.erase("config");  // output paths differ
  second.erase("config");
  EXPECT_EQ(first, second);

  const json report = json::parse(read_file(path("train.json")));
  EXPECT_EQ(report["config"]["learning-rate"], "0.005");
  EXPECT_EQ(report["config"]["epochs"], "15");
  EXPECT_EQ(report["epoch_losses"].size(), 15u);
  EXPECT_EQ(report["entity_checksum_before"], report["entity_checksum_after"]);
  EXPECT_LT(report["epoch_losses"].back().get<double>(), report["epoch_losses"][0].get<double>());

  const std::vector<std::string> model_args = {"--checkpoint", path("ck1"), "--dict",
                                               path("dict.tsv"), "--embeddings", path("emb.kpre")};
  ok(run(with(with({"index"}, model_args),
              {"--passages", toy("passages.jsonl"), "--out", path("index.kpre")})));
  ok(run(with(with({"index"}, model_args),
              {"--passages", toy("passages.jsonl"), "--out", path("index_base.kpre"), "--baseline"})));

  const std::string name = EntityVocabulary::Load(toy("entities.tsv")).name(0);
  Outcome s = ok(run(with(with({"search"}, model_args),
                      {"--index", path("index.kpre"), "--query", "who is " + name, "--k", "3"})));
  const json hits = json::parse(s.out)["hits"];
  ASSERT_EQ(hits.size(), 3u);
  EXPECT_GE(hits[0]["score"].get<double>(), hits[1]["score"].get<double>());

  // The baseline path must score with H_[CLS] alone.
  Outcome b = ok(run(with(with({"search"}, model_args), {"--index", path("index_base.kpre"), "--query",
                                                     "who is " + name, "--k", "1", "--baseline"})));
  KprModel base = load_checkpoint(path("ck1"));
  base.options.use_kpr = false;
  const PassageCollection passages = PassageCollection::Load(toy("passages.jsonl"));
  const PassageIndex direct = build_index(base, passages);
  const auto direct_hits = search(direct, embed_query(base, "who is " + name), 1);
  EXPECT_EQ(json::parse(b.out)["hits"][0]["id"], direct_hits[0].id);
  EXPECT_NEAR(json::parse(b.out)["hits"][0]["score"].get<double>(), direct_hits[0].score, 1e-4);

  ok(run(with(with({"eval"}, model_args), {"--index", path("index.kpre"), "--eval",
                                           toy("eval.jsonl"), "--k", "1,5", "--report",
                                           path("eval.json"), "--bins", path("bins.tsv")})));
  const std::string bins = read_file(path("bins.tsv"));
  EXPECT_EQ(std::count(bins.begin(), bins.end(), '\n'), 11);  // header + 10 bins
  const json eval = json::parse(read_file(path("eval.json")));
  EXPECT_EQ(eval["bins"].size(), 10u);
  EXPECT_EQ(eval["binned_queries"], 60);
  EXPECT_GT(eval["top_k_accuracy"][1]["accuracy"].get<double>(), 0.5);

  Outcome a = ok(run(with(with({"inspect-attention"}, model_args), {"--query", "who is " + name})));
  const json rows = json::parse(a.out)["rows"];
  ASSERT_GE(rows.size(), 2u);
  EXPECT_TRUE(rows.back()["entity"].is_null());
  double total = 0.0;
  bool found = false;
  for (const auto &row : rows) {
    total += row["normalized_weight"].get<double>();
    found = found || row["entity"] == 0;
  }
  EXPECT_NEAR(total, 1.0, 1e-12);
  EXPECT_TRUE(found);
  EXPECT_FALSE(rows[0].contains("mention_weight"));

  Outcome pm = ok(run(with(with({"inspect-attention"}, model_args),
                           {"--query", "who is " + name, "--per-mention"})));
  std::map<std::string, double> per_surface;
  const json pm_rows = json::parse(pm.out)["rows"];
  for (const auto &row : pm_rows) {
    if (row["entity"].is_null()) {
      EXPECT_TRUE(row["mention_weight"].is_null());
    } else {
      per_surface[row["surface"].get<std::string>()] += row["mention_weight"].get<double>();
    }
  }
  ASSERT_FALSE(per_surface.empty());
  for (const auto &[surface, sum] : per_surface) EXPECT_NEAR(sum, 1.0, 1e-12) << surface;

  for (size_t i = 0; i < inputs.size(); ++i) EXPECT_EQ(read_file(toy(inputs[i])), before[i]);
  const double minutes =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count() / 60.0;
  EXPECT_LT(minutes, 5.0);
}

TEST_F(CliTest, SynthIsDeterministic) {
  ASSERT_EQ(run({"synth", "--out", path("a"), "--entities", "30", "--max-frequency", "50",
                 "--seed", "5"})
                .code,
            0);
  ASSERT_EQ(run({"synth", "--out", path("b"), "--entities", "30", "--max-frequency", "50",
                 "--seed", "5"})
                .code,
            0);
  for (const char *f : {"corpus.jsonl", "entities.tsv", "passages.jsonl", "train.jsonl",
                        "eval.jsonl", "eval_rare.jsonl"}) {
    EXPECT_EQ(read_file(path(std::string("a/") + f)), read_file(path(std::string("b/") + f))) << f;
  }
  EXPECT_EQ(run({"synth", "--out", path("c"), "--entities", "1"}).code, 1);
}

}  // namespace
}  // namespace kpr
