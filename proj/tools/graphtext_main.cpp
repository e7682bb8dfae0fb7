// graphtext: dataset generation, cycle training, evaluation and generation
// for the graph<->text toolkit. Exit codes: 0 success, 1 usage, 2 data
// error, 3 training error.

#include <CLI11.hpp>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include "graphtext/checkpoint.hpp"
#include "graphtext/cycle.hpp"
#include "graphtext/data.hpp"
#include "graphtext/metrics.hpp"

namespace fs = std::filesystem;
using namespace graphtext;

namespace {

// Flat JSON config files, so a stored run config can be replayed directly
// via --config.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App* app, bool default_also, bool, std::string) const override {
    ojson j;
    for (const CLI::Option* opt : app->get_options({})) {
      if (opt->get_lnames().empty() || !opt->get_configurable()) continue;
      const std::string name = opt->get_lnames()[0];
      if (opt->count() == 1)
        j[name] = opt->results().at(0);
      else if (opt->count() > 1)
        j[name] = opt->results();
      else if (default_also && !opt->get_default_str().empty())
        j[name] = opt->get_default_str();
    }
    return j.dump(1) + "\n";
  }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    ojson j = ojson::parse(input);
    std::vector<CLI::ConfigItem> out;
    for (const auto& [key, value] : j.items()) {
      out.emplace_back();
      out.back().name = key;
      if (value.is_array())
        for (const auto& v : value) out.back().inputs.push_back(v.get<std::string>());
      else if (value.is_string())
        out.back().inputs.push_back(value.get<std::string>());
      else
        out.back().inputs.push_back(value.dump());
    }
    return out;
  }
};

struct GenDataOptions {
  std::string out_dir;
  SyntheticConfig cfg;
};

struct TrainOptions {
  std::string data_dir;
  std::string run_dir;
  std::string mode = "unsupervised";
  std::string cycle;  // ablate only: "text" or "graph"
  std::string device = "cpu";
  std::string alternation = "per_batch";
  std::uint64_t seed = 1;
  int epochs = 30;
  int batch_size = 16;
  double lr_g2t = 1e-3;
  double lr_t2g = 1e-3;
  int max_length = 64;
  int g2t_embed = 64;
  int g2t_hidden = 64;
  int g2t_layers = 1;
  int t2g_embed = 64;
  int t2g_hidden = 64;
  int t2g_layers = 1;
  int t2g_classifier = 128;
  bool keep_all_checkpoints = false;
};

struct EvalOptions {
  std::string data_dir;
  std::string split = "test";
  std::string checkpoint;
  std::string pred_texts;
  std::string pred_graphs;
  std::string out_path;
};

struct GenerateOptions {
  std::string data_dir;
  std::string checkpoint;
  std::string direction = "g2t";
  std::string input;
  std::string out_path;
  int max_length = 64;
};

void wire_config(CLI::App* cmd) {
  cmd->option_defaults()->always_capture_default();
  cmd->config_formatter(std::make_shared<JsonConfig>());
  cmd->set_config("--config", "", "JSON file with option overrides");
  cmd->allow_config_extras(true);
}

void add_train_options(CLI::App* cmd, TrainOptions& o, bool ablate) {
  cmd->add_option("--data", o.data_dir, "dataset directory (gen-data layout)")->required();
  cmd->add_option("--run-dir", o.run_dir, "run directory (default: run-<seed>-<confighash>)");
  if (!ablate)
    cmd->add_option("--mode", o.mode, "training mode")
        ->check(CLI::IsMember({"unsupervised", "supervised"}));
  else
    cmd->add_option("--cycle", o.cycle, "which single cycle to train")
        ->required()
        ->check(CLI::IsMember({"text", "graph"}));
  cmd->add_option("--seed", o.seed, "RNG seed");
  cmd->add_option("--epochs", o.epochs, "training epochs");
  cmd->add_option("--batch-size", o.batch_size, "batch size");
  cmd->add_option("--lr-g2t", o.lr_g2t, "G2T Adam learning rate");
  cmd->add_option("--lr-t2g", o.lr_t2g, "T2G Adam learning rate");
  cmd->add_option("--alternation", o.alternation, "cycle alternation granularity")
      ->check(CLI::IsMember({"per_batch", "per_epoch"}));
  cmd->add_option("--max-length", o.max_length, "greedy decode length limit");
  cmd->add_option("--device", o.device, "compute device (cpu only)");
  cmd->add_option("--g2t-embed", o.g2t_embed, "G2T embedding size");
  cmd->add_option("--g2t-hidden", o.g2t_hidden, "G2T hidden size per direction");
  cmd->add_option("--g2t-layers", o.g2t_layers, "G2T encoder layers");
  cmd->add_option("--t2g-embed", o.t2g_embed, "T2G embedding size");
  cmd->add_option("--t2g-hidden", o.t2g_hidden, "T2G hidden size per direction");
  cmd->add_option("--t2g-layers", o.t2g_layers, "T2G encoder layers");
  cmd->add_option("--t2g-classifier-hidden", o.t2g_classifier, "edge classifier hidden size");
  cmd->add_flag("--keep-all-checkpoints", o.keep_all_checkpoints,
                "keep one checkpoint per epoch instead of last+best");
}

int run_gen_data(const GenDataOptions& o) {
  SyntheticData data = gen_synthetic(o.cfg);
  write_dataset(o.out_dir, data, o.cfg);
  std::cout << "wrote dataset to " << o.out_dir << " (train " << data.train.texts.size() << "+"
            << data.train.graphs.size() << ", dev " << data.dev.size() << ", test "
            << data.test.size() << ", vocab " << data.vocab.size() << ")\n";
  return 0;
}

ojson metrics_line(const EpochMetrics& m, size_t dev_size) {
  ojson j;
  j["epoch"] = m.epoch;
  j["L_CycT_mean"] = m.l_cyct_mean;
  j["L_CycG_mean"] = m.l_cycg_mean;
  if (m.has_dev) {
    j["dev_bleu"] = m.text.bleu;
    j["dev_rouge_l"] = m.text.rouge_l;
    if (dev_size >= 2)
      j["dev_cider"] = m.text.cider;
    else
      j["dev_cider"] = nullptr;
    j["dev_micro_f1"] = m.graph.micro_f1;
    j["dev_macro_f1"] = m.graph.macro_f1;
  }
  return j;
}

// Training files must carry the train role; dev/test pairs are evaluation
// only.
void ensure_train_role(const std::string& filename) {
  if (fs::path(filename).filename().string().rfind("train.", 0) != 0)
    fail(ErrorCode::BAD_CONFIG, "refusing to train on non-train file " + filename);
}

int run_train(const TrainOptions& o, const ojson& run_config, bool ablate) {
  if (o.device != "cpu") fail(ErrorCode::BAD_CONFIG, "only --device cpu is supported");
  if (o.epochs < 0) fail(ErrorCode::BAD_CONFIG, "--epochs must be >= 0");
  ensure_train_role(layout::kTrainTexts);
  ensure_train_role(layout::kTrainGraphs);
  ensure_train_role(layout::kTrainPairs);

  DatasetDir data = load_dataset(o.data_dir);

  ModelConfig models;
  models.g2t = G2TConfig{o.g2t_embed, o.g2t_hidden, o.g2t_layers};
  models.t2g = T2GConfig{o.t2g_embed, o.t2g_hidden, o.t2g_layers, o.t2g_classifier};
  ScheduleConfig schedule;
  schedule.epochs = o.epochs;
  schedule.batch_size = o.batch_size;
  schedule.alternation =
      o.alternation == "per_epoch" ? Alternation::PER_EPOCH : Alternation::PER_BATCH;
  schedule.lr_g2t = o.lr_g2t;
  schedule.lr_t2g = o.lr_t2g;
  schedule.decode.max_length = o.max_length;

  std::string run_dir = o.run_dir;
  if (run_dir.empty()) {
    char hash[16];
    std::snprintf(hash, sizeof hash, "%08llx",
                  static_cast<unsigned long long>(fnv1a(run_config.dump()) & 0xffffffffull));
    run_dir = "run-" + std::to_string(o.seed) + "-" + hash;
  }
  fs::create_directories(run_dir);
  {
    std::ofstream cfg(fs::path(run_dir) / "config.json");
    cfg << run_config.dump(1) << "\n";
  }

  auto state = std::make_unique<TrainState>(data.vocab, data.relations, models, schedule, o.seed);

  std::ofstream metrics_out(fs::path(run_dir) / "metrics.jsonl", std::ios::binary);
  std::ofstream timings_out(fs::path(run_dir) / "timings.jsonl", std::ios::binary);
  const size_t dev_size = data.dev.size();
  MetricsSink on_metrics = [&](const EpochMetrics& m) {
    ojson line = metrics_line(m, dev_size);
    metrics_out << line.dump() << "\n";
    metrics_out.flush();
    line["wall_clock_s"] = m.wall_clock_s;
    timings_out << line.dump() << "\n";
    timings_out.flush();
    std::cout << line.dump() << "\n";
  };
  CheckpointSink on_checkpoint = [&](const TrainState& st, const std::string& tag, bool best) {
    const std::string name = o.keep_all_checkpoints ? "ckpt_" + tag + ".bin" : "last.bin";
    save_checkpoint((fs::path(run_dir) / name).string(), st, models);
    if (best) {
      save_checkpoint((fs::path(run_dir) / "best.bin").string(), st, models);
      std::ofstream marker(fs::path(run_dir) / "BEST");
      marker << tag << "\n";
    }
  };

  if (ablate) {
    train_one_cycle(data.train, *state, o.cycle == "text", &data.dev, on_metrics, on_checkpoint);
  } else if (o.mode == "supervised") {
    if (!data.train_pairs)
      fail(ErrorCode::CORRUPT_DATASET, "supervised mode needs " + std::string(layout::kTrainPairs));
    ensure_train_role(layout::kTrainPairs);
    train_supervised(*data.train_pairs, *state, &data.dev, on_metrics, on_checkpoint);
  } else {
    train(data.train, *state, &data.dev, on_metrics, on_checkpoint);
  }
  if (o.epochs == 0) {
    // Still provide a loadable artifact for downstream eval/generate.
    save_checkpoint((fs::path(run_dir) / "best.bin").string(), *state, models);
  }
  std::cout << "run directory: " << run_dir << "\n";
  return 0;
}

ojson text_report_json(const metrics::TextEvalReport& r, bool cider_defined) {
  ojson j;
  j["bleu"] = r.bleu;
  j["rouge_l"] = r.rouge_l;
  if (cider_defined)
    j["cider"] = r.cider;
  else
    j["cider"] = nullptr;
  j["params"] = {{"rouge_beta", metrics::kRougeBeta},
                 {"cider_sigma", metrics::kCiderSigma},
                 {"max_ngram", metrics::kMaxNgram}};
  return j;
}

ojson graph_report_json(const metrics::GraphEvalReport& r) {
  ojson j;
  j["micro_f1"] = r.micro_f1;
  j["macro_f1"] = r.macro_f1;
  j["micro_precision"] = r.micro_precision;
  j["micro_recall"] = r.micro_recall;
  j["tp"] = r.tp;
  j["fp"] = r.fp;
  j["fn"] = r.fn;
  j["per_relation"] = ojson::array();
  for (const auto& row : r.per_relation)
    j["per_relation"].push_back({{"label", row.label},
                                 {"tp", row.tp},
                                 {"fp", row.fp},
                                 {"fn", row.fn},
                                 {"precision", row.precision},
                                 {"recall", row.recall},
                                 {"f1", row.f1}});
  return j;
}

int run_eval(const EvalOptions& o) {
  DatasetDir data = load_dataset(o.data_dir);
  const ParallelDataset& split = o.split == "dev" ? data.dev : data.test;

  std::vector<metrics::Sentence> hyps;
  std::vector<KnowledgeGraph> preds;
  const bool need_model = o.pred_texts.empty() || o.pred_graphs.empty();
  std::unique_ptr<TrainState> state;
  if (need_model) {
    if (o.checkpoint.empty())
      fail(ErrorCode::BAD_CONFIG, "--checkpoint required unless both prediction files are given");
    state = load_checkpoint(o.checkpoint, data.vocab, data.relations).state;
  }
  if (!o.pred_texts.empty()) {
    for (const auto& t : load_texts_jsonl(o.pred_texts)) hyps.push_back(t.tokens);
    if (hyps.size() != split.size())
      fail(ErrorCode::LENGTH_MISMATCH, "--pred-texts count does not match the split");
  } else {
    for (const auto& [g, t] : split.pairs)
      hyps.push_back(state->g2t.generate(g, state->vocab, state->schedule.decode).tokens);
  }
  if (!o.pred_graphs.empty()) {
    preds = load_graphs_jsonl(o.pred_graphs);
    if (preds.size() != split.size())
      fail(ErrorCode::LENGTH_MISMATCH, "--pred-graphs count does not match the split");
  } else {
    for (const auto& [g, t] : split.pairs)
      preds.push_back(state->t2g.predict(t, state->vocab, state->relations));
  }

  std::vector<metrics::RefList> refs;
  std::vector<KnowledgeGraph> golds;
  for (const auto& [g, t] : split.pairs) {
    refs.push_back({t.tokens});
    golds.push_back(g);
  }
  metrics::TextEvalReport text_rep = metrics::evaluate_text(hyps, refs);
  metrics::GraphEvalReport graph_rep = metrics::edge_f1(preds, golds);

  ojson out{{"split", o.split},
            {"n_items", split.size()},
            {"text", text_report_json(text_rep, split.size() >= 2)},
            {"graph", graph_report_json(graph_rep)}};
  std::cout << out.dump(1) << "\n";
  if (!o.out_path.empty()) {
    std::ofstream f(o.out_path, std::ios::binary);
    f << out.dump(1) << "\n";
  }
  return 0;
}

int run_generate(const GenerateOptions& o) {
  DatasetDir data = load_dataset(o.data_dir);
  auto loaded = load_checkpoint(o.checkpoint, data.vocab, data.relations);
  TrainState& st = *loaded.state;
  DecodeConfig decode{o.max_length};

  std::vector<std::string> lines;
  if (o.direction == "g2t") {
    for (const auto& g : load_graphs_jsonl(o.input))
      lines.push_back(text_to_json(st.g2t.generate(g, st.vocab, decode)).dump());
  } else {
    for (const auto& t : load_texts_jsonl(o.input))
      lines.push_back(graph_to_json(st.t2g.predict(t, st.vocab, st.relations)).dump());
  }
  io::write_lines(o.out_path, lines);
  std::cout << "wrote " << lines.size() << " records to " << o.out_path << "\n";
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"graphtext: unsupervised graph-to-text / text-to-graph cycle training"};
  app.require_subcommand(1);

  GenDataOptions gen;
  auto* cmd_gen = app.add_subcommand("gen-data", "generate the synthetic benchmark dataset");
  wire_config(cmd_gen);
  cmd_gen->add_option("--out", gen.out_dir, "output directory")->required();
  cmd_gen->add_option("--entities", gen.cfg.n_entities, "number of entities");
  cmd_gen->add_option("--relations", gen.cfg.n_relations, "number of relations");
  cmd_gen->add_option("--min-triples", gen.cfg.min_triples, "min triples per graph");
  cmd_gen->add_option("--max-triples", gen.cfg.max_triples, "max triples per graph");
  cmd_gen->add_option("--templates-per-relation", gen.cfg.templates_per_relation,
                      "sentence templates per relation");
  cmd_gen->add_option("--train-size", gen.cfg.train_size, "non-parallel training size per side");
  cmd_gen->add_option("--dev-size", gen.cfg.dev_size, "dev pair count");
  cmd_gen->add_option("--test-size", gen.cfg.test_size, "test pair count");
  cmd_gen->add_option("--seed", gen.cfg.seed, "generator seed");

  TrainOptions train_opts;
  auto* cmd_train = app.add_subcommand("train", "train models (unsupervised IBT or supervised)");
  wire_config(cmd_train);
  add_train_options(cmd_train, train_opts, /*ablate=*/false);

  TrainOptions ablate_opts;
  auto* cmd_ablate = app.add_subcommand("ablate", "train with a single cycle only");
  wire_config(cmd_ablate);
  add_train_options(cmd_ablate, ablate_opts, /*ablate=*/true);

  EvalOptions eval_opts;
  auto* cmd_eval = app.add_subcommand("eval", "evaluate a checkpoint or prediction files");
  wire_config(cmd_eval);
  cmd_eval->add_option("--data", eval_opts.data_dir, "dataset directory")->required();
  cmd_eval->add_option("--split", eval_opts.split, "which parallel split")
      ->check(CLI::IsMember({"dev", "test"}));
  cmd_eval->add_option("--checkpoint", eval_opts.checkpoint, "checkpoint file");
  cmd_eval->add_option("--pred-texts", eval_opts.pred_texts, "JSONL text records to score");
  cmd_eval->add_option("--pred-graphs", eval_opts.pred_graphs, "JSONL graph records to score");
  cmd_eval->add_option("--out", eval_opts.out_path, "write the report JSON here");

  GenerateOptions gen_opts;
  auto* cmd_generate = app.add_subcommand("generate", "run a model over JSONL inputs");
  wire_config(cmd_generate);
  cmd_generate->add_option("--data", gen_opts.data_dir, "dataset directory (vocabularies)")
      ->required();
  cmd_generate->add_option("--checkpoint", gen_opts.checkpoint, "checkpoint file")->required();
  cmd_generate->add_option("--direction", gen_opts.direction, "g2t or t2g")
      ->check(CLI::IsMember({"g2t", "t2g"}));
  cmd_generate->add_option("--input", gen_opts.input, "input JSONL")->required();
  cmd_generate->add_option("--out", gen_opts.out_path, "output JSONL")->required();
  cmd_generate->add_option("--max-length", gen_opts.max_length, "decode length limit");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? 0 : 1;
  }

  auto collect_config = [](const CLI::App* cmd, const char* name) {
    ojson run_config = ojson::parse(JsonConfig{}.to_config(cmd, true, false, ""));
    run_config["subcommand"] = name;
    return run_config;
  };

  try {
    if (cmd_gen->parsed()) return run_gen_data(gen);
    if (cmd_train->parsed())
      return run_train(train_opts, collect_config(cmd_train, "train"), false);
    if (cmd_ablate->parsed())
      return run_train(ablate_opts, collect_config(cmd_ablate, "ablate"), true);
    if (cmd_eval->parsed()) return run_eval(eval_opts);
    if (cmd_generate->parsed()) return run_generate(gen_opts);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return e.code() == ErrorCode::NONFINITE_LOSS ? 3 : 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  }
  return 1;
}
