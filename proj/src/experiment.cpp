#include "raac/experiment.h"

#include <CLI11.hpp>
#include <algorithm>
#include <chrono>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <json.hpp>
#include <map>

#include "raac/errors.h"
#include "raac/prompting.h"
#include "raac/rng.h"
#include "raac/text.h"

namespace raac {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

json load_json_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InvalidArgument("cannot open config file: " + path);
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw InvalidArgument("config " + path + ": " + e.what());
  }
}

void check_keys(const json& j, const std::vector<std::string>& allowed, const std::string& where) {
  if (!j.is_object()) throw InvalidArgument(where + ": expected a JSON object");
  for (const auto& [key, value] : j.items()) {
    (void)value;
    if (std::find(allowed.begin(), allowed.end(), key) == allowed.end()) {
      throw InvalidArgument(where + ": unknown key '" + key + "'");
    }
  }
}

template <typename T>
T get_or(const json& j, const std::string& key, T fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  try {
    return j.at(key).get<T>();
  } catch (const json::exception& e) {
    throw InvalidArgument(where + "." + key + ": " + e.what());
  }
}

GenConfig parse_gen_config(const json& j, const std::string& where) {
  check_keys(j, {"seed", "samples_per_domain", "events_min", "events_max", "overlap_fraction"},
             where);
  GenConfig cfg;
  cfg.seed = get_or<std::uint64_t>(j, "seed", cfg.seed, where);
  cfg.samples_per_domain = get_or<int>(j, "samples_per_domain", cfg.samples_per_domain, where);
  cfg.events_min = get_or<int>(j, "events_min", cfg.events_min, where);
  cfg.events_max = get_or<int>(j, "events_max", cfg.events_max, where);
  cfg.overlap_fraction = get_or<double>(j, "overlap_fraction", cfg.overlap_fraction, where);
  return cfg;
}

EncoderConfig parse_encoder_config(const json& j, const std::string& where) {
  check_keys(j, {"dim", "seed", "alpha"}, where);
  EncoderConfig cfg;
  cfg.dim = get_or<int>(j, "dim", cfg.dim, where);
  cfg.seed = get_or<std::uint64_t>(j, "seed", cfg.seed, where);
  cfg.alpha = get_or<double>(j, "alpha", cfg.alpha, where);
  return cfg;
}

DecoderConfig parse_decoder_config(const json& j, const std::string& where) {
  check_keys(j,
             {"n_layers", "d_model", "n_heads", "d_ff", "max_len", "gate_init", "tie_output",
              "copy_init"},
             where);
  DecoderConfig cfg;
  cfg.n_layers = get_or<int>(j, "n_layers", cfg.n_layers, where);
  cfg.d_model = get_or<int>(j, "d_model", cfg.d_model, where);
  cfg.n_heads = get_or<int>(j, "n_heads", cfg.n_heads, where);
  cfg.d_ff = get_or<int>(j, "d_ff", cfg.d_ff, where);
  cfg.max_len = get_or<int>(j, "max_len", cfg.max_len, where);
  cfg.gate_init = get_or<double>(j, "gate_init", cfg.gate_init, where);
  cfg.tie_output = get_or<bool>(j, "tie_output", cfg.tie_output, where);
  cfg.copy_init = get_or<bool>(j, "copy_init", cfg.copy_init, where);
  return cfg;
}

TrainingConfig parse_training_config(const json& j, const std::string& where) {
  check_keys(j,
             {"lr", "epochs", "batch_size", "seed", "k", "min_count", "exclude_siblings",
              "refs_per_sample"},
             where);
  TrainingConfig cfg;
  cfg.lr = get_or<double>(j, "lr", cfg.lr, where);
  cfg.epochs = get_or<int>(j, "epochs", cfg.epochs, where);
  cfg.batch_size = get_or<int>(j, "batch_size", cfg.batch_size, where);
  cfg.seed = get_or<std::uint64_t>(j, "seed", cfg.seed, where);
  cfg.k = get_or<int>(j, "k", cfg.k, where);
  cfg.min_count = get_or<int>(j, "min_count", cfg.min_count, where);
  cfg.exclude_siblings = get_or<bool>(j, "exclude_siblings", cfg.exclude_siblings, where);
  cfg.refs_per_sample = get_or<int>(j, "refs_per_sample", cfg.refs_per_sample, where);
  return cfg;
}

std::vector<std::pair<std::string, std::string>> split_captions(const Dataset& dataset,
                                                                const std::string& split,
                                                                const std::string& domain,
                                                                const std::string& source) {
  std::vector<std::pair<std::string, std::string>> captions;
  for (const CorpusSample* sample : dataset.view(split, domain)) {
    for (const std::string& ref : sample->references) captions.emplace_back(ref, source);
  }
  return captions;
}

// Shared evaluation core: retrieve without exclusions, generate greedily,
// score against the five references, write report + generations.
MetricReport evaluate_dataset(const Checkpoint& checkpoint, const Dataset& dataset,
                              const Datastore& store, const std::string& split,
                              const std::string& domain, int k, int max_new,
                              const std::string& report_path,
                              const std::string& generations_path) {
  if (k < 1) throw InvalidArgument("evaluate: k must be >= 1");
  if (max_new < 0) throw InvalidArgument("evaluate: max_new must be >= 0");
  if (store.encoder_config() != checkpoint.encoder) {
    throw InvalidArgument("evaluate: datastore encoder config differs from checkpoint");
  }
  const auto samples = dataset.view(split, domain);
  if (samples.size() < 2) {
    throw InvalidArgument("evaluate: need at least 2 samples in split '" + split + "'");
  }

  std::ofstream gens(generations_path, std::ios::binary);
  if (!gens) throw InvalidArgument("cannot open for writing: " + generations_path);

  std::vector<EvalPair> pairs;
  pairs.reserve(samples.size());
  for (const CorpusSample* sample : samples) {
    const Embedding query = embed_audio(sample->audio, checkpoint.encoder);
    const auto hits = store.query_topk(query, static_cast<std::size_t>(k));
    std::vector<std::string> retrieved;
    std::vector<std::string> retrieved_ids;
    for (const RetrievalHit& hit : hits) {
      retrieved.push_back(hit.text);
      retrieved_ids.push_back(hit.entry_id);
    }
    const std::vector<int> prompt_ids = build_prompt_ids(
        checkpoint.vocab, retrieved, checkpoint.params.config.max_len, max_new);
    // Rebuild the prompt string from the captions that survived truncation.
    int kept = static_cast<int>(retrieved.size());
    while (kept > 0) {
      const std::vector<std::string> head(retrieved.begin(), retrieved.begin() + kept);
      if (checkpoint.vocab.encode(tokenize(build_prompt(head).text)) == prompt_ids) break;
      --kept;
    }
    retrieved.resize(static_cast<std::size_t>(kept));
    retrieved_ids.resize(static_cast<std::size_t>(kept));
    const PromptText prompt = build_prompt(retrieved);

    const HiddenStateSeq hidden = audio_hidden_states(sample->audio, checkpoint.encoder);
    const std::vector<int> out_ids =
        generate_tokens(prompt_ids, hidden, checkpoint.params, max_new);
    std::vector<std::string> words;
    for (int id : out_ids) words.push_back(checkpoint.vocab.word(id));
    const std::string output = join(words, " ");

    json record;
    record["id"] = sample->audio.id;
    record["retrieved"] = retrieved_ids;
    record["prompt"] = prompt.text;
    record["output"] = output;
    gens << record.dump() << "\n";

    pairs.push_back(make_eval_pair(
        output, std::vector<std::string>(sample->references.begin(), sample->references.end())));
  }
  if (!gens) throw Error("write failed: " + generations_path);
  gens.close();

  const MetricReport report = evaluate_corpus(pairs);
  std::ofstream out(report_path, std::ios::binary);
  if (!out) throw InvalidArgument("cannot open for writing: " + report_path);
  out << report_csv(report);
  if (!out) throw Error("write failed: " + report_path);
  return report;
}

std::string summary_row(const ExperimentRow& row) {
  std::string line = std::to_string(row.seed) + "," + row.regime + "," + row.variant;
  for (double v : {row.report.bleu1, row.report.bleu2, row.report.bleu3, row.report.bleu4,
                   row.report.rouge_l, row.report.cider_d}) {
    line += "," + format_fixed(v, 4);
  }
  line += "," + std::to_string(row.report.pair_count);
  return line;
}

}  // namespace

void cmd_gen_corpus(const GenCorpusOptions& options) {
  GenConfig cfg;
  if (options.config_path.has_value()) {
    cfg = parse_gen_config(load_json_file(*options.config_path), "corpus config");
  }
  if (options.seed.has_value()) cfg.seed = *options.seed;
  const auto domains = default_domain_pair(cfg.overlap_fraction);
  const Dataset dataset = generate(domains, cfg);
  save_jsonl(dataset, options.out_path);
  std::cout << "wrote " << dataset.samples.size() << " samples to " << options.out_path << "\n";
}

void cmd_build_datastore(const BuildDatastoreOptions& options) {
  if (!options.merge_paths.empty()) {
    Datastore merged = Datastore::load(options.merge_paths.front());
    for (std::size_t i = 1; i < options.merge_paths.size(); ++i) {
      merged = Datastore::merge(merged, Datastore::load(options.merge_paths[i]));
    }
    merged.save(options.out_path);
    std::cout << "merged " << options.merge_paths.size() << " datastores (" << merged.size()
              << " entries) into " << options.out_path << "\n";
    return;
  }
  EncoderConfig encoder;
  if (options.config_path.has_value()) {
    encoder = parse_encoder_config(load_json_file(*options.config_path), "encoder config");
  }
  if (options.seed.has_value()) encoder.seed = *options.seed;
  const Dataset dataset = load_jsonl(options.dataset_path);
  const std::string source = options.split + (options.domain.empty() ? "" : ":" + options.domain);
  const auto captions = split_captions(dataset, options.split, options.domain, source);
  if (captions.empty()) {
    throw InvalidArgument("no captions in split '" + options.split + "'" +
                          (options.domain.empty() ? "" : " for domain '" + options.domain + "'"));
  }
  const Datastore store = Datastore::build(captions, encoder, source);
  store.save(options.out_path);
  std::cout << "built datastore with " << store.size() << " entries at " << options.out_path
            << "\n";
}

void cmd_train(const TrainOptions& options) {
  DecoderConfig decoder;
  TrainingConfig training;
  if (options.config_path.has_value()) {
    const json j = load_json_file(*options.config_path);
    check_keys(j, {"decoder", "training"}, "train config");
    if (j.contains("decoder")) decoder = parse_decoder_config(j.at("decoder"), "decoder");
    if (j.contains("training")) training = parse_training_config(j.at("training"), "training");
  }
  if (options.seed.has_value()) training.seed = *options.seed;
  const Dataset dataset = load_jsonl(options.dataset_path);
  const Datastore store = Datastore::load(options.datastore_path);
  const TrainResult result =
      train_captioner(dataset, store, decoder, training, options.domains);
  save_checkpoint(result.checkpoint, options.out_path);
  write_loss_csv(result.epoch_loss, options.out_path + ".loss.csv");
  std::cout << "trained " << training.epochs << " epochs, final loss "
            << format_fixed(result.epoch_loss.back(), 6) << ", checkpoint at "
            << options.out_path << "\n";
}

MetricReport cmd_evaluate(const EvaluateOptions& options) {
  if (options.k < 1) throw InvalidArgument("evaluate: k must be >= 1");
  const Checkpoint checkpoint = load_checkpoint(options.checkpoint_path);
  const Dataset dataset = load_jsonl(options.dataset_path);
  const Datastore store = Datastore::load(options.datastore_path);
  const std::string generations = options.generations_path.empty()
                                      ? options.out_path + ".generations.jsonl"
                                      : options.generations_path;
  const MetricReport report =
      evaluate_dataset(checkpoint, dataset, store, options.split, options.domain, options.k,
                       options.max_new, options.out_path, generations);
  std::cout << report_table(report);
  return report;
}

std::vector<ExperimentRow> cmd_experiment(const ExperimentOptions& options) {
  const json plan = load_json_file(options.plan_path);
  check_keys(plan,
             {"seeds", "eval_domain", "corpus", "encoder", "decoder", "training", "k", "max_new",
              "regimes", "datastore_variants", "external_datastore"},
             "plan");
  std::vector<std::uint64_t> seeds =
      get_or<std::vector<std::uint64_t>>(plan, "seeds", {1}, "plan");
  if (options.seed.has_value()) {
    for (std::size_t i = 0; i < seeds.size(); ++i) {
      seeds[i] = hash_combine(*options.seed, static_cast<std::uint64_t>(i));
    }
  }
  const std::string eval_domain = get_or<std::string>(plan, "eval_domain", "nature", "plan");
  GenConfig gen_base;
  if (plan.contains("corpus")) gen_base = parse_gen_config(plan.at("corpus"), "plan.corpus");
  EncoderConfig enc_base;
  if (plan.contains("encoder")) enc_base = parse_encoder_config(plan.at("encoder"), "plan.encoder");
  DecoderConfig decoder;
  if (plan.contains("decoder")) decoder = parse_decoder_config(plan.at("decoder"), "plan.decoder");
  TrainingConfig train_base;
  if (plan.contains("training")) {
    train_base = parse_training_config(plan.at("training"), "plan.training");
  }
  const int k = get_or<int>(plan, "k", 4, "plan");
  const int max_new = get_or<int>(plan, "max_new", 24, "plan");
  if (k < 1) throw InvalidArgument("plan: k must be >= 1");
  const std::vector<std::string> regimes = get_or<std::vector<std::string>>(
      plan, "regimes", {"in_domain", "cross_domain", "combined"}, "plan");
  const std::vector<std::string> variants = get_or<std::vector<std::string>>(
      plan, "datastore_variants", {"train_set", "eval_set"}, "plan");
  const std::string external_path = get_or<std::string>(plan, "external_datastore", "", "plan");
  for (const std::string& regime : regimes) {
    if (regime != "in_domain" && regime != "cross_domain" && regime != "combined") {
      throw InvalidArgument("plan: unknown regime '" + regime + "'");
    }
  }
  for (const std::string& variant : variants) {
    if (variant != "train_set" && variant != "eval_set" && variant != "merged" &&
        variant != "external_file") {
      throw InvalidArgument("plan: unknown datastore variant '" + variant + "'");
    }
    if (variant == "external_file" && external_path.empty()) {
      throw InvalidArgument("plan: variant external_file requires external_datastore");
    }
  }

  fs::create_directories(options.out_dir);
  std::vector<ExperimentRow> rows;

  for (const std::uint64_t seed : seeds) {
    const fs::path seed_dir = fs::path(options.out_dir) / ("seed_" + std::to_string(seed));
    fs::create_directories(seed_dir);

    GenConfig gen = gen_base;
    gen.seed = hash_combine(gen_base.seed, seed);
    EncoderConfig encoder = enc_base;
    encoder.seed = hash_combine(enc_base.seed, seed);

    const auto domains = default_domain_pair(gen.overlap_fraction);
    const Dataset dataset = generate(domains, gen);
    save_jsonl(dataset, (seed_dir / "dataset.jsonl").string());

    const auto domain_names = dataset.domains();
    if (std::find(domain_names.begin(), domain_names.end(), eval_domain) == domain_names.end()) {
      throw InvalidArgument("plan: eval_domain '" + eval_domain + "' not in corpus");
    }

    // Per-domain train-split stores; the eval-domain store is the
    // "in-domain datastore" even when the model trained elsewhere.
    std::map<std::string, Datastore> stores;
    for (const std::string& domain : domain_names) {
      stores.emplace(domain, Datastore::build(
                                 split_captions(dataset, "train", domain, domain + ":train"),
                                 encoder, "ds_" + domain));
    }
    auto merge_all = [&](const std::vector<std::string>& names) {
      Datastore merged = stores.at(names.front());
      for (std::size_t i = 1; i < names.size(); ++i) {
        merged = Datastore::merge(merged, stores.at(names[i]));
      }
      return merged;
    };

    for (const std::string& regime : regimes) {
      std::vector<std::string> train_domains;
      if (regime == "in_domain") {
        train_domains = {eval_domain};
      } else if (regime == "cross_domain") {
        for (const std::string& d : domain_names) {
          if (d != eval_domain) train_domains.push_back(d);
        }
        if (train_domains.empty()) train_domains = {eval_domain};  // degenerate 1-domain plan
      } else {
        train_domains = domain_names;
      }

      const Datastore train_store = merge_all(train_domains);
      TrainingConfig training = train_base;
      training.seed = hash_combine(train_base.seed, seed);
      training.k = k;

      const auto t0 = std::chrono::steady_clock::now();
      const TrainResult trained =
          train_captioner(dataset, train_store, decoder, training, train_domains);
      const std::string ckpt_path = (seed_dir / (regime + ".rcpt")).string();
      save_checkpoint(trained.checkpoint, ckpt_path);
      write_loss_csv(trained.epoch_loss, ckpt_path + ".loss.csv");
      const double train_seconds =
          std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      std::cout << "seed " << seed << " regime " << regime << ": trained in "
                << format_fixed(train_seconds, 1) << "s, final loss "
                << format_fixed(trained.epoch_loss.back(), 4) << "\n";

      for (const std::string& variant : variants) {
        const auto e0 = std::chrono::steady_clock::now();
        const Datastore* eval_store = nullptr;
        Datastore scratch;
        if (variant == "train_set") {
          scratch = train_store;
          eval_store = &scratch;
        } else if (variant == "eval_set") {
          eval_store = &stores.at(eval_domain);
        } else if (variant == "merged") {
          scratch = merge_all(domain_names);
          eval_store = &scratch;
        } else {
          scratch = Datastore::load(external_path);
          eval_store = &scratch;
        }
        const std::string stem = regime + "_" + variant;
        ExperimentRow row;
        row.seed = seed;
        row.regime = regime;
        row.variant = variant;
        row.checkpoint_path = ckpt_path;
        row.report = evaluate_dataset(trained.checkpoint, dataset, *eval_store, "test",
                                      eval_domain, k, max_new,
                                      (seed_dir / (stem + ".csv")).string(),
                                      (seed_dir / (stem + ".generations.jsonl")).string());
        row.wall_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - e0).count();
        std::cout << "seed " << seed << " " << regime << " / " << variant << ": bleu1 "
                  << format_fixed(row.report.bleu1, 4) << " cider_d "
                  << format_fixed(row.report.cider_d, 4) << " ("
                  << format_fixed(row.wall_seconds, 1) << "s)\n";
        rows.push_back(std::move(row));
      }
    }
  }

  // Deterministic summary (no timing data).
  std::ofstream summary((fs::path(options.out_dir) / "summary.csv").string(), std::ios::binary);
  if (!summary) throw InvalidArgument("cannot write summary.csv");
  summary << "seed,regime,variant,bleu1,bleu2,bleu3,bleu4,rouge_l,cider_d,pair_count\n";
  for (const ExperimentRow& row : rows) summary << summary_row(row) << "\n";
  summary.close();

  // Paper-style comparison table: rows are (training regime, datastore).
  std::string table;
  table += "regime        variant        seed    bleu1   bleu2   bleu3   bleu4   rouge_l cider_d\n";
  for (const std::string& regime : regimes) {
    for (const std::string& variant : variants) {
      MetricReport mean;
      int n = 0;
      for (const ExperimentRow& row : rows) {
        if (row.regime != regime || row.variant != variant) continue;
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%-13s %-14s %-7llu %-7.4f %-7.4f %-7.4f %-7.4f %-7.4f %-7.4f\n",
                      regime.c_str(), variant.c_str(),
                      static_cast<unsigned long long>(row.seed), row.report.bleu1,
                      row.report.bleu2, row.report.bleu3, row.report.bleu4, row.report.rouge_l,
                      row.report.cider_d);
        table += buf;
        mean.bleu1 += row.report.bleu1;
        mean.bleu2 += row.report.bleu2;
        mean.bleu3 += row.report.bleu3;
        mean.bleu4 += row.report.bleu4;
        mean.rouge_l += row.report.rouge_l;
        mean.cider_d += row.report.cider_d;
        ++n;
      }
      if (n > 1) {
        char buf[160];
        std::snprintf(buf, sizeof(buf), "%-13s %-14s %-7s %-7.4f %-7.4f %-7.4f %-7.4f %-7.4f %-7.4f\n",
                      regime.c_str(), variant.c_str(), "mean", mean.bleu1 / n, mean.bleu2 / n,
                      mean.bleu3 / n, mean.bleu4 / n, mean.rouge_l / n, mean.cider_d / n);
        table += buf;
      }
    }
  }
  std::ofstream table_out((fs::path(options.out_dir) / "table.txt").string(), std::ios::binary);
  table_out << table;
  table_out.close();
  std::cout << table;
  return rows;
}

int run_cli(const std::vector<std::string>& args) {
  CLI::App app{"desk-scale retrieval-augmented audio captioning"};
  app.require_subcommand(1);

  GenCorpusOptions gen_options;
  std::string gen_config, gen_out;
  std::uint64_t seed_value = 0;
  auto* gen = app.add_subcommand("gen-corpus", "generate a synthetic two-domain dataset");
  gen->add_option("--config", gen_config, "corpus config JSON");
  auto* gen_seed = gen->add_option("--seed", seed_value, "override the corpus seed");
  gen->add_option("--out", gen_out, "output dataset (JSON Lines)")->required();

  BuildDatastoreOptions ds_options;
  std::string ds_config;
  auto* ds = app.add_subcommand("build-datastore", "embed captions into a datastore file");
  ds->add_option("--config", ds_config, "encoder config JSON");
  auto* ds_seed = ds->add_option("--seed", seed_value, "override the encoder seed");
  ds->add_option("--dataset", ds_options.dataset_path, "dataset JSONL");
  ds->add_option("--split", ds_options.split, "dataset split (train|dev|test)");
  ds->add_option("--domain", ds_options.domain, "restrict to one domain");
  ds->add_option("--merge", ds_options.merge_paths, "merge existing datastore files instead");
  ds->add_option("--out", ds_options.out_path, "output datastore file")->required();

  TrainOptions train_options;
  std::string train_config;
  auto* train = app.add_subcommand("train", "train the cross-attention layers");
  train->add_option("--config", train_config, "decoder+training config JSON");
  auto* train_seed = train->add_option("--seed", seed_value, "override the training seed");
  train->add_option("--dataset", train_options.dataset_path, "dataset JSONL")->required();
  train->add_option("--datastore", train_options.datastore_path, "datastore file")->required();
  train->add_option("--domain", train_options.domains, "training domain (repeatable)");
  train->add_option("--out", train_options.out_path, "output checkpoint")->required();

  EvaluateOptions eval_options;
  auto* eval = app.add_subcommand("evaluate", "generate captions and score them");
  eval->add_option("--checkpoint", eval_options.checkpoint_path, "checkpoint file")->required();
  eval->add_option("--dataset", eval_options.dataset_path, "dataset JSONL")->required();
  eval->add_option("--datastore", eval_options.datastore_path, "datastore file")->required();
  eval->add_option("--split", eval_options.split, "dataset split (default test)");
  eval->add_option("--domain", eval_options.domain, "restrict to one domain");
  eval->add_option("--k", eval_options.k, "retrieved captions per prompt");
  eval->add_option("--max-new", eval_options.max_new, "generation budget");
  eval->add_option("--out", eval_options.out_path, "report CSV path")->required();
  eval->add_option("--generations", eval_options.generations_path, "generations JSONL path");

  ExperimentOptions exp_options;
  auto* exp = app.add_subcommand("experiment", "run the regime x datastore matrix");
  exp->add_option("--config", exp_options.plan_path, "experiment plan JSON")->required();
  auto* exp_seed = exp->add_option("--seed", seed_value, "override the plan seeds");
  exp->add_option("--out", exp_options.out_dir, "output directory")->required();

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (gen->parsed()) {
      if (!gen_config.empty()) gen_options.config_path = gen_config;
      if (gen_seed->count() > 0) gen_options.seed = seed_value;
      gen_options.out_path = gen_out;
      cmd_gen_corpus(gen_options);
    } else if (ds->parsed()) {
      if (!ds_config.empty()) ds_options.config_path = ds_config;
      if (ds_seed->count() > 0) ds_options.seed = seed_value;
      if (ds_options.merge_paths.empty() && ds_options.dataset_path.empty()) {
        throw InvalidArgument("build-datastore requires --dataset or --merge");
      }
      cmd_build_datastore(ds_options);
    } else if (train->parsed()) {
      if (!train_config.empty()) train_options.config_path = train_config;
      if (train_seed->count() > 0) train_options.seed = seed_value;
      cmd_train(train_options);
    } else if (eval->parsed()) {
      cmd_evaluate(eval_options);
    } else if (exp->parsed()) {
      if (exp_seed->count() > 0) exp_options.seed = seed_value;
      cmd_experiment(exp_options);
    }
  } catch (const InvalidArgument& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const DataFormatError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  } catch (const NumericError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}

}  // namespace raac
