#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "raac/corpus.h"
#include "raac/datastore.h"
#include "raac/decoder.h"
#include "raac/metrics.h"
#include "raac/trainer.h"

namespace raac {

// Command-level orchestration shared by the CLI binary and the tests.

struct GenCorpusOptions {
  std::optional<std::string> config_path;
  std::optional<std::uint64_t> seed;
  std::string out_path;
};
void cmd_gen_corpus(const GenCorpusOptions& options);

struct BuildDatastoreOptions {
  std::optional<std::string> config_path;  // encoder settings
  std::optional<std::uint64_t> seed;       // overrides the encoder seed
  std::string dataset_path;                // unused in merge mode
  std::string split = "train";
  std::string domain;                      // empty = all domains
  std::vector<std::string> merge_paths;    // merge mode when non-empty
  std::string out_path;
};
void cmd_build_datastore(const BuildDatastoreOptions& options);

struct TrainOptions {
  std::optional<std::string> config_path;
  std::optional<std::uint64_t> seed;
  std::string dataset_path;
  std::string datastore_path;
  std::vector<std::string> domains;  // training domains, empty = all
  std::string out_path;              // checkpoint; loss CSV gets ".loss.csv"
};
void cmd_train(const TrainOptions& options);

struct EvaluateOptions {
  std::string checkpoint_path;
  std::string dataset_path;
  std::string datastore_path;
  std::string split = "test";
  std::string domain;  // empty = all domains
  int k = 4;
  int max_new = 24;
  std::string out_path;          // report CSV
  std::string generations_path;  // defaults to out_path + ".generations.jsonl"
};
MetricReport cmd_evaluate(const EvaluateOptions& options);

struct ExperimentOptions {
  std::string plan_path;
  std::optional<std::uint64_t> seed;  // overrides the plan's base seed
  std::string out_dir;
};

struct ExperimentRow {
  std::uint64_t seed = 0;
  std::string regime;   // in_domain | cross_domain | combined
  std::string variant;  // train_set | eval_set | merged | external_file
  MetricReport report;
  std::string checkpoint_path;
  double wall_seconds = 0.0;
};
std::vector<ExperimentRow> cmd_experiment(const ExperimentOptions& options);

// Full argv-style dispatch used by main(); maps errors to exit codes
// (0 ok, 2 usage/config, 3 data format, 4 numerical failure).
int run_cli(const std::vector<std::string>& args);

}  // namespace raac
