#pragma once

#include <optional>
#include <string>
#include <unordered_set>
#include <vector>

#include "raac/datastore.h"
#include "raac/encoder.h"

namespace raac {

struct RetrievalConfig {
  int k = 4;
};

struct PromptText {
  std::string text;
  std::vector<std::string> retrieved_ids;  // rank order
  int k_used = 0;
};

// Wraps the captions verbatim in the fixed conditioning template:
//   "Audios similar to this audio sounds like: c1, c2, ..., ck. This audio sounds like:"
// An empty list degenerates to "This audio sounds like:".
PromptText build_prompt(const std::vector<std::string>& captions);

// Exact inverse of build_prompt; nullopt if the text does not match the
// template. Lossless as long as no caption contains ", ".
std::optional<std::vector<std::string>> parse_prompt_captions(const std::string& text);

// Embed the audio, query the store (minus excluded ids) and build the
// prompt from the hit texts in rank order.
PromptText retrieve_and_prompt(const AudioSample& sample, const Datastore& store,
                               const RetrievalConfig& config,
                               const std::unordered_set<std::string>& exclude = {});

}  // namespace raac
