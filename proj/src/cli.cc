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

#include "kpr/cli.h"

#include <algorithm>
#include <filesystem>
#include <map>
#include <memory>
#include <ostream>
#include <set>

#include "CLI11.hpp"
#include "json.hpp"
#include "kpr/checkpoint.h"
#include "kpr/error.h"
#include "kpr/flops.h"
#include "kpr/retrieval_eval.h"
#include "kpr/synth.h"
#include "kpr/tensor_io.h"

namespace kpr {

namespace {

using nlohmann::json;
namespace fs = std::filesystem;

// Flag values as resolved after command line, config file and defaults.
json effective_config(const CLI::App &app) {
  json j = json::object();
  for (const CLI::Option *opt : app.get_options()) {
    const std::string name = opt->get_single_name();
    if (name.empty() || name == "help") continue;
    if (opt->get_expected_min() == 0) {
      j[name] = opt->count() > 0 && opt->as<bool>();
    } else if (opt->count() > 0) {
      j[name] = opt->as<std::string>();
    } else {
      j[name] = opt->get_default_str();
    }
  }
  return j;
}

void write_json(const std::string &path, const json &j) { write_file_atomic(path, j.dump(2) + "\n"); }

std::shared_ptr<const AnchorDictionary> load_dictionary(const std::string &path) {
  const std::string bytes = read_file(path);
  if (bytes.rfind("KPRT", 0) == 0) {
    return std::make_shared<AnchorDictionary>(AnchorDictionary::ParseBinary(bytes));
  }
  return std::make_shared<AnchorDictionary>(AnchorDictionary::ParseTsv(bytes));
}

std::vector<size_t> parse_ks(const std::string &s) {
  std::vector<size_t> ks;
  std::stringstream in(s);
  std::string part;
  while (std::getline(in, part, ',')) {
    try {
      size_t used = 0;
      const long long k = std::stoll(part, &used);
      if (used != part.size() || k < 1) throw std::invalid_argument(part);
      ks.push_back(static_cast<size_t>(k));
    } catch (const std::exception &) {
      throw ParameterError("bad k value '" + part + "' in '" + s + "'");
    }
  }
  if (ks.empty()) throw ParameterError("no k values given");
  return ks;
}

// Shared by every command that embeds text with a trained model.
struct ModelFlags {
  std::string checkpoint;
  std::string dictionary;
  std::string embeddings;
  bool baseline = false;

  void add(CLI::App *cmd) {
    cmd->add_option("--checkpoint", checkpoint, "Checkpoint directory")
        ->required()
        ->check(CLI::ExistingDirectory);
    cmd->add_option("--dict", dictionary, "Anchor dictionary (TSV or KPRT binary)")
        ->check(CLI::ExistingFile);
    cmd->add_option("--embeddings", embeddings, "Entity embedding container")
        ->check(CLI::ExistingFile);
    cmd->add_flag("--baseline", baseline, "Use H_[CLS] only, skipping entity attention");
  }

  KprModel load() const {
    std::shared_ptr<const AnchorDictionary> dict;
    std::shared_ptr<EntityEmbeddingTable> table;
    if (!dictionary.empty()) dict = load_dictionary(dictionary);
    if (!embeddings.empty()) {
      table = std::make_shared<EntityEmbeddingTable>(EntityEmbeddingTable::Load(embeddings));
    }
    KprModel model = load_checkpoint(checkpoint, dict, table);
    if (baseline) model.options.use_kpr = false;
    if (model.options.use_kpr && (!dict || !table)) {
      throw UsageError("entity attention needs --dict and --embeddings (or pass --baseline)");
    }
    if (table && table->dim() != model.encoder_config.hidden) {
      throw InputError("embedding dim " + std::to_string(table->dim()) + " differs from model dim " +
                       std::to_string(model.encoder_config.hidden));
    }
    return model;
  }
};

PassageIndex load_index(const std::string &path, const KprModel &model) {
  TensorContainer c = read_container(path);
  if (c.dim != model.encoder_config.hidden) throw InputError("index dim differs from model dim");
  PassageIndex index;
  index.similarity = model.options.similarity;
  index.temperature = model.options.temperature;
  index.embeddings = Matrix(c.records.size(), c.dim);
  for (size_t i = 0; i < c.records.size(); ++i) {
    index.ids.push_back(c.records[i].first);
    std::copy(c.records[i].second.begin(), c.records[i].second.end(),
              index.embeddings.row(i).begin());
  }
  return index;
}

json hits_json(const std::vector<SearchHit> &hits) {
  json arr = json::array();
  for (const auto &h : hits) arr.push_back({{"id", h.id}, {"score", h.score}});
  return arr;
}

// Inserts "--key=value" for every config file entry right after the command
// name. Later occurrences win, so explicit flags override the file.
std::vector<std::string> expand_config(int argc, const char *const *argv) {
  std::vector<std::string> args(argv, argv + argc);
  std::optional<std::string> config;
  for (size_t i = 2; i < args.size(); ++i) {
    if (args[i] == "--config" && i + 1 < args.size()) config = args[i + 1];
    if (args[i].rfind("--config=", 0) == 0) config = args[i].substr(9);
  }
  if (!config || !fs::is_regular_file(*config)) return args;
  std::vector<std::string> expanded;
  for (const auto &[key, value] : parse_key_values(read_file(*config))) {
    if (key == "config") throw UsageError("a config file cannot name another config file");
    expanded.push_back("--" + key + "=" + value);
  }
  args.insert(args.begin() + 2, expanded.begin(), expanded.end());
  return args;
}

}  // namespace

int run_cli(int argc, const char *const *argv, std::ostream &out, std::ostream &err) {
  CLI::App app{"Knowledgeable passage retriever toolkit", "kpr"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default()->multi_option_policy(
      CLI::MultiOptionPolicy::TakeLast);
  std::string config_path;
  auto command = [&](const std::string &name, const std::string &help) {
    CLI::App *cmd = app.add_subcommand(name, help);
    cmd->add_option("--config", config_path, "key = value file of long flag names; command-line flags win")
        ->check(CLI::ExistingFile);
    return cmd;
  };

  // synth
  SynthConfig synth;
  std::string synth_out;
  {
    CLI::App *cmd = command("synth", "Generate a synthetic rare-entity corpus");
    cmd->add_option("--out", synth_out, "Output directory")->required();
    cmd->add_option("--entities", synth.entities);
    cmd->add_option("--first-names", synth.first_names, "Shared first names (ambiguous aliases)");
    cmd->add_option("--passages-per-entity", synth.passages_per_entity);
    cmd->add_option("--max-frequency", synth.max_frequency, "Anchors of the most frequent entity");
    cmd->add_option("--alias-rate", synth.alias_rate);
    cmd->add_option("--train-fraction", synth.train_fraction);
    cmd->add_option("--seed", synth.seed);
    cmd->callback([&, cmd] {
      SynthCorpus c = generate_synth(synth);
      c.save(synth_out);
      json report = {{"config", effective_config(*cmd)},
                     {"entities", c.entities.size()},
                     {"documents", c.hyperlinks.documents.size()},
                     {"passages", c.passages.size()},
                     {"train_instances", c.train.size()},
                     {"eval_queries", c.eval.size()},
                     {"rare_eval_queries", c.rare_eval.size()}};
      write_json((fs::path(synth_out) / "synth_report.json").string(), report);
      out << "wrote " << c.entities.size() << " entities, " << c.hyperlinks.documents.size()
          << " documents to " << synth_out << "\n";
    });
  }

  // build-dict
  std::string corpus_path, tsv_out, trie_out;
  double lp_threshold = kLinkProbabilityThreshold, commonness_threshold = kCommonnessThreshold;
  {
    CLI::App *cmd = command("build-dict", "Build the anchor dictionary from a hyperlink corpus");
    cmd->add_option("--corpus", corpus_path, "Hyperlink corpus (JSON lines)")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--out-tsv", tsv_out, "Dictionary TSV")->required();
    cmd->add_option("--out-trie", trie_out, "Dictionary binary (KPRT)");
    cmd->add_option("--lp-threshold", lp_threshold);
    cmd->add_option("--commonness-threshold", commonness_threshold);
    cmd->callback([&] {
      AnchorDictionary dict =
          build_dictionary(HyperlinkCorpus::Load(corpus_path), lp_threshold, commonness_threshold);
      write_file_atomic(tsv_out, dict.to_tsv());
      if (!trie_out.empty()) write_file_atomic(trie_out, dict.to_binary());
      out << dict.size() << " names\n";
    });
  }

  // init
  std::string init_train, init_passages, init_out;
  EncoderConfig init_shape;
  init_shape.hidden = 32;
  init_shape.max_tokens = 32;
  double init_kpr_dropout = 0.1;
  size_t init_min_count = 1;
  uint64_t init_seed = 0;
  {
    CLI::App *cmd = command("init", "Build a vocabulary and a freshly initialized checkpoint");
    cmd->add_option("--train", init_train, "Training set; its questions and passages form the vocab")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--passages", init_passages)->required()->check(CLI::ExistingFile);
    cmd->add_option("--out", init_out, "Checkpoint directory")->required();
    cmd->add_option("--layers", init_shape.layers);
    cmd->add_option("--dim", init_shape.hidden);
    cmd->add_option("--heads", init_shape.heads);
    cmd->add_option("--max-tokens", init_shape.max_tokens);
    cmd->add_option("--ffn", init_shape.ffn, "Feed-forward width; 0 means 4 x dim");
    cmd->add_option("--dropout", init_shape.dropout_p);
    cmd->add_option("--kpr-dropout", init_kpr_dropout);
    cmd->add_option("--min-count", init_min_count);
    cmd->add_option("--seed", init_seed);
    cmd->callback([&, cmd] {
      const auto instances = load_training_set(init_train);
      const PassageCollection passages = PassageCollection::Load(init_passages);
      std::vector<std::string> texts;
      for (const auto &inst : instances) {
        texts.push_back(inst.question);
        texts.push_back(passage_input(passages.at(inst.positive)));
        for (PassageId id : inst.hard_negatives) texts.push_back(passage_input(passages.at(id)));
      }
      EncoderConfig cfg = init_shape;
      cfg.vocab = Vocab::Build(texts, init_min_count);
      Rng rng(init_seed);
      KprModel model = KprModel::Init(cfg, nullptr, nullptr, rng);
      model.kpr.dropout_p = init_kpr_dropout;
      KeyValues extra;
      extra["init.seed"] = std::to_string(init_seed);
      save_checkpoint(init_out, model, extra);
      out << "vocab " << cfg.vocab.size() << ", mean token norm "
          << format_double(model.encoder.mean_token_norm()) << "\n";
    });
  }

  // embed-entities
  std::string emb_entities, emb_checkpoint, emb_out;
  std::optional<size_t> emb_layer;
  size_t emb_cap = kEmbedderPassageCap;
  bool emb_random = false, emb_skip_uncovered = false;
  uint64_t emb_seed = 0;
  {
    CLI::App *cmd = command("embed-entities", "Compute the frozen entity embedding table");
    cmd->add_option("--corpus", corpus_path, "Hyperlink corpus supplying referring passages")
        ->check(CLI::ExistingFile);
    cmd->add_option("--entities", emb_entities, "Entity vocabulary TSV")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--checkpoint", emb_checkpoint)->required()->check(CLI::ExistingDirectory);
    cmd->add_option("--out", emb_out, "Embedding container")->required();
    cmd->add_option("--layer-index", emb_layer, "Encoder layer, 0 = embeddings; default last");
    cmd->add_option("--cap", emb_cap, "Passages sampled per entity");
    cmd->add_flag("--random", emb_random, "Random vectors instead of encoder states");
    cmd->add_flag("--skip-uncovered", emb_skip_uncovered,
                  "Leave out entities without usable passages instead of failing");
    cmd->add_option("--seed", emb_seed);
    cmd->callback([&, cmd] {
      const EntityVocabulary vocab = EntityVocabulary::Load(emb_entities);
      const KprModel model = load_checkpoint(emb_checkpoint);
      const auto &cfg = model.encoder_config;
      const double reference = model.encoder.mean_token_norm();
      Rng rng(emb_seed);
      EntityEmbeddingTable table;
      size_t skipped = 0;
      if (emb_random) {
        table = random_table(vocab, cfg.hidden, 1.0, reference, rng);
      } else {
        if (corpus_path.empty()) throw UsageError("--corpus is required unless --random");
        const HyperlinkCorpus corpus = HyperlinkCorpus::Load(corpus_path);
        std::map<EntityId, std::vector<ReferringPassage>> referring;
        for (const auto &doc : corpus.documents) {
          for (const auto &a : doc.anchors) referring[a.entity].push_back({doc.text, {a.start, a.end}});
        }
        const size_t layer = emb_layer.value_or(cfg.layers);
        EntityEmbeddingTable raw(cfg.hidden);
        for (EntityId id = 0; id < vocab.size(); ++id) {
          try {
            raw.upsert(id, embed_entity(id, referring[id], model.encoder, cfg, layer, emb_cap, rng));
          } catch (const CoverageError &) {
            if (!emb_skip_uncovered) throw;
            ++skipped;
          }
        }
        table = normalize_table(raw, reference);
      }
      table.Save(emb_out);
      json report = {{"config", effective_config(*cmd)},
                     {"entities", table.size()},
                     {"skipped", skipped},
                     {"reference_norm", reference}};
      write_json(emb_out + ".json", report);
      out << table.size() << " entity vectors, " << skipped << " skipped\n";
    });
  }

  // train
  TrainConfig tc;
  std::string train_path, passages_path, train_out, train_report;
  ModelFlags train_model;
  std::string activation = "sigmoid", similarity = "dot", length_bias = "rows";
  std::string instruction;
  {
    CLI::App *cmd = command("train", "Train the retriever with in-batch negatives");
    cmd->add_option("--train", train_path)->required()->check(CLI::ExistingFile);
    cmd->add_option("--passages", passages_path)->required()->check(CLI::ExistingFile);
    cmd->add_option("--checkpoint", train_model.checkpoint, "Starting checkpoint")
        ->required()
        ->check(CLI::ExistingDirectory);
    cmd->add_option("--dict", train_model.dictionary)->check(CLI::ExistingFile);
    cmd->add_option("--embeddings", train_model.embeddings)->check(CLI::ExistingFile);
    cmd->add_option("--out", train_out, "Output checkpoint directory")->required();
    cmd->add_option("--report", train_report, "Training report JSON");
    cmd->add_option("--batch-size", tc.batch_size);
    cmd->add_option("--learning-rate", tc.learning_rate);
    cmd->add_option("--epochs", tc.epochs);
    cmd->add_option("--similarity", similarity)->check(CLI::IsMember({"dot", "cosine"}));
    cmd->add_option("--temperature", tc.temperature);
    cmd->add_flag("--freeze-base", tc.freeze_base, "Train only the entity attention layer");
    cmd->add_option("--activation", activation)->check(CLI::IsMember({"sigmoid", "softmax"}));
    cmd->add_option("--length-bias", length_bias, "rows: N+1 rows incl. no-op; entities: N")
        ->check(CLI::IsMember({"rows", "entities"}));
    cmd->add_flag("--baseline", tc.baseline, "Plain bi-encoder without entity attention");
    cmd->add_option("--instruction", instruction, "Prefix prepended to queries");
    cmd->add_option("--seed", tc.seed);
    cmd->add_option("--max-steps", tc.max_steps, "0 = unlimited");
    cmd->add_option("--patience", tc.patience, "0 disables early stopping");
    cmd->add_option("--clip-norm", tc.clip_norm);
    cmd->callback([&, cmd] {
      tc.similarity = parse_similarity(similarity);
      tc.activation = parse_activation(activation);
      tc.length_bias = parse_length_bias(length_bias);
      if (!instruction.empty()) tc.instruction = instruction;
      tc.validate();
      train_model.baseline = tc.baseline;
      KprModel model = train_model.load();
      const auto instances = load_training_set(train_path);
      const PassageCollection passages = PassageCollection::Load(passages_path);
      const uint64_t before = model.entities ? model.entities->checksum() : 0;
      TrainResult result = train(model, instances, passages, tc);
      KeyValues extra = train_config_values(tc);
      save_checkpoint(train_out, model, extra);
      json report = {{"config", effective_config(*cmd)},
                     {"epoch_losses", result.epoch_losses},
                     {"steps", result.steps},
                     {"early_stopped", result.early_stopped},
                     {"entity_checksum_before", before},
                     {"entity_checksum_after", model.entities ? model.entities->checksum() : 0}};
      if (!train_report.empty()) write_json(train_report, report);
      out << result.steps << " steps, final loss "
          << format_double(result.epoch_losses.empty() ? 0.0 : result.epoch_losses.back()) << "\n";
    });
  }

  // index
  ModelFlags index_model;
  std::string index_out;
  {
    CLI::App *cmd = command("index", "Embed every passage into a brute-force index");
    index_model.add(cmd);
    cmd->add_option("--passages", passages_path)->required()->check(CLI::ExistingFile);
    cmd->add_option("--out", index_out, "Index container")->required();
    cmd->callback([&] {
      const KprModel model = index_model.load();
      const PassageIndex index = build_index(model, PassageCollection::Load(passages_path));
      TensorContainer c;
      c.dim = static_cast<uint32_t>(model.encoder_config.hidden);
      for (size_t i = 0; i < index.size(); ++i) {
        const auto row = index.embeddings.row(i);
        c.records.emplace_back(index.ids[i], std::vector<double>(row.begin(), row.end()));
      }
      write_container(index_out, c);
      out << index.size() << " passages indexed\n";
    });
  }

  // search
  ModelFlags search_model;
  std::string index_path, query, search_out;
  size_t search_k = 10;
  {
    CLI::App *cmd = command("search", "Top-k passages for one query");
    search_model.add(cmd);
    cmd->add_option("--index", index_path)->required()->check(CLI::ExistingFile);
    cmd->add_option("--query", query)->required();
    cmd->add_option("--k", search_k);
    cmd->add_option("--out", search_out, "Write the JSON result here instead of stdout");
    cmd->callback([&, cmd] {
      const KprModel model = search_model.load();
      const PassageIndex index = load_index(index_path, model);
      const auto hits = search(index, embed_query(model, query), search_k);
      json result = {{"config", effective_config(*cmd)}, {"query", query}, {"hits", hits_json(hits)}};
      if (search_out.empty()) {
        out << result.dump(2) << "\n";
      } else {
        write_json(search_out, result);
      }
    });
  }

  // eval
  ModelFlags eval_model;
  std::string eval_path, ks = "1,5,20", eval_report, bins_out;
  size_t bin_k = 1;
  {
    CLI::App *cmd = command("eval", "Top-k accuracy overall and by entity frequency");
    eval_model.add(cmd);
    cmd->add_option("--index", index_path)->required()->check(CLI::ExistingFile);
    cmd->add_option("--eval", eval_path, "Evaluation queries (JSON lines)")
        ->required()
        ->check(CLI::ExistingFile);
    cmd->add_option("--k", ks, "Comma-separated k values");
    cmd->add_option("--bin-k", bin_k, "k used for the frequency bins");
    cmd->add_option("--report", eval_report, "Report JSON")->required();
    cmd->add_option("--bins", bins_out, "Bin table TSV");
    cmd->callback([&, cmd] {
      const KprModel model = eval_model.load();
      const PassageIndex index = load_index(index_path, model);
      const EvalReport report =
          evaluate(model, index, load_eval_set(eval_path), parse_ks(ks), bin_k);
      json j = json::parse(report.to_json());
      j["config"] = effective_config(*cmd);
      write_json(eval_report, j);
      if (!bins_out.empty()) write_file_atomic(bins_out, report.bins_tsv());
      for (size_t i = 0; i < report.ks.size(); ++i) {
        out << "top-" << report.ks[i] << " " << format_double(report.accuracy[i]) << "\n";
      }
    });
  }

  // inspect-attention
  ModelFlags inspect_model;
  std::string inspect_out;
  bool per_mention = false;
  {
    CLI::App *cmd = command("inspect-attention", "Attention weights over the linked entities");
    inspect_model.add(cmd);
    cmd->add_option("--query", query)->required();
    cmd->add_option("--out", inspect_out, "Write JSON here instead of stdout");
    cmd->add_flag("--per-mention", per_mention,
                  "Also renormalize raw weights within each mention's candidates");
    cmd->callback([&, cmd] {
      const KprModel model = inspect_model.load();
      if (!model.options.use_kpr) throw UsageError("inspect-attention has nothing to show with --baseline");
      const auto &cfg = model.encoder_config;
      const TokenSequence tokens = tokenize(query_input(model, query), cfg.vocab, cfg.max_tokens);
      Rng rng(0);
      const EncoderOutput enc = encode(tokens, model.encoder, cfg, Mode::kEval, rng);
      const EntityInputs inputs =
          build_entity_inputs(model.dictionary->link(tokens), *model.entities, model.kpr);
      const AttentionWeights w = attention_weights(
          enc.cls(), inputs, model.kpr, {model.options.activation, model.options.length_bias});
      std::map<size_t, double> mention_sums;
      for (size_t i = 0; i < w.rows.size(); ++i) {
        if (!w.rows[i].noop) mention_sums[w.rows[i].mention_index] += w.raw[i];
      }
      json rows = json::array();
      for (size_t i = 0; i < w.rows.size(); ++i) {
        const EntityRow &r = w.rows[i];
        json row = {{"entity", r.noop ? json(nullptr) : json(r.entity)},
                    {"surface", r.noop ? "[no-op]" : r.surface},
                    {"raw_weight", w.raw[i]},
                    {"normalized_weight", w.normalized[i]}};
        if (per_mention) {
          const double sum = r.noop ? 0.0 : mention_sums[r.mention_index];
          row["mention_weight"] = sum > 0.0 ? json(w.raw[i] / sum) : json(nullptr);
        }
        rows.push_back(row);
      }
      json result = {{"config", effective_config(*cmd)},
                     {"query", query},
                     {"skipped_candidates", inputs.skipped},
                     {"rows", rows}};
      if (inspect_out.empty()) {
        out << result.dump(2) << "\n";
      } else {
        write_json(inspect_out, result);
      }
    });
  }

  // flops
  int64_t f_layers = 12, f_dim = 768, f_tokens = 128, f_entities = 16;
  std::string flops_out;
  {
    CLI::App *cmd = command("flops", "Analytical FLOPs of the encoder and the entity attention");
    cmd->add_option("--layers", f_layers);
    cmd->add_option("--dim", f_dim);
    cmd->add_option("--tokens", f_tokens);
    cmd->add_option("--entities", f_entities);
    cmd->add_option("--out", flops_out, "Also write the JSON report here");
    cmd->callback([&, cmd] {
      const FlopsReport r = overhead_report(f_layers, f_dim, f_tokens, f_entities);
      json j = json::parse(r.to_json());
      j["config"] = effective_config(*cmd);
      out << r.to_json() << "\n" << r.summary() << "\n";
      if (!flops_out.empty()) write_json(flops_out, j);
    });
  }

  try {
    std::vector<std::string> args = expand_config(argc, argv);
    std::reverse(args.begin(), args.end());
    args.pop_back();
    app.parse(std::move(args));
  } catch (const CLI::ParseError &e) {
    if (e.get_exit_code() == 0) {
      app.exit(e, out, err);
      return 0;
    }
    app.exit(e, out, err);
    return 1;
  } catch (const Error &e) {
    err << e.what() << "\n";
    return e.exit_code();
  } catch (const std::filesystem::filesystem_error &e) {
    err << "io error: " << e.what() << "\n";
    return 2;
  }
  return 0;
}

}  // namespace kpr
