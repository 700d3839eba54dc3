#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "raac/corpus.h"
#include "raac/datastore.h"
#include "raac/decoder.h"
#include "raac/encoder.h"
#include "raac/prompting.h"
#include "raac/vocab.h"

namespace raac {

struct TrainingConfig {
  double lr = 5e-5;
  int epochs = 100;
  int batch_size = 32;
  std::uint64_t seed = 1;
  int k = 4;             // retrieved captions per prompt
  int min_count = 1;     // vocabulary threshold
  // Exclude every reference caption of the current audio from retrieval
  // (references are near-duplicates, so leaking a sibling trivializes the
  // task); false narrows the exclusion to the target caption only.
  bool exclude_siblings = true;
  int refs_per_sample = 5;  // how many of the 5 references become examples
};

struct Checkpoint {
  DecoderParams params;
  Vocabulary vocab;
  EncoderConfig encoder;
};

struct TrainResult {
  Checkpoint checkpoint;
  std::vector<double> epoch_loss;
};

// Adam (beta1 0.9, beta2 0.999, eps 1e-8) on the cross-attention group
// only. Prompts are retrieved per sample with ground-truth exclusion and
// sequences are [BOS] prompt caption [EOS] with loss on the caption.
// Deterministic for a fixed seed.
TrainResult train_captioner(const Dataset& dataset, const Datastore& store,
                            DecoderConfig decoder_config, const TrainingConfig& config,
                            const std::vector<std::string>& train_domains = {});

// Drops captions from the end of the retrieved list until the sequence
// fits max_len; fails only if the caption alone does not fit.
TokenSeq build_example_sequence(const Vocabulary& vocab, const std::vector<std::string>& retrieved,
                                const std::string& caption, int max_len, int reserve = 0);

// Prompt token ids for generation, truncated the same way.
std::vector<int> build_prompt_ids(const Vocabulary& vocab, const std::vector<std::string>& retrieved,
                                  int max_len, int reserve);

std::string generate_caption(const Checkpoint& checkpoint, const PromptText& prompt,
                             const HiddenStateSeq& hidden, int max_new,
                             const GenOptions& options = {});

void save_checkpoint(const Checkpoint& checkpoint, const std::string& path);
Checkpoint load_checkpoint(const std::string& path);

void write_loss_csv(const std::vector<double>& epoch_loss, const std::string& path);

// ids of store entries whose text equals any of the given captions.
std::unordered_set<std::string> matching_entry_ids(const Datastore& store,
                                                   const std::vector<std::string>& captions);

}  // namespace raac
