#include "raac/prompting.h"

#include "raac/errors.h"
#include "raac/text.h"

namespace raac {

namespace {

const std::string kPrefix = "Audios similar to this audio sounds like: ";
const std::string kSuffix = "This audio sounds like:";
const std::string kJoiner = ", ";

}  // namespace

PromptText build_prompt(const std::vector<std::string>& captions) {
  PromptText prompt;
  prompt.k_used = static_cast<int>(captions.size());
  if (captions.empty()) {
    prompt.text = kSuffix;
    return prompt;
  }
  for (const std::string& c : captions) {
    if (is_blank(c)) throw InvalidArgument("prompt caption is blank");
  }
  prompt.text = kPrefix + join(captions, kJoiner) + ". " + kSuffix;
  return prompt;
}

std::optional<std::vector<std::string>> parse_prompt_captions(const std::string& text) {
  if (text == kSuffix) return std::vector<std::string>{};
  if (!text.starts_with(kPrefix)) return std::nullopt;
  const std::string tail = ". " + kSuffix;
  if (!text.ends_with(tail)) return std::nullopt;
  const std::size_t begin = kPrefix.size();
  const std::size_t end = text.size() - tail.size();
  if (end < begin) return std::nullopt;
  const std::string middle = text.substr(begin, end - begin);
  std::vector<std::string> captions;
  std::size_t pos = 0;
  while (true) {
    const std::size_t next = middle.find(kJoiner, pos);
    if (next == std::string::npos) {
      captions.push_back(middle.substr(pos));
      break;
    }
    captions.push_back(middle.substr(pos, next - pos));
    pos = next + kJoiner.size();
  }
  return captions;
}

PromptText retrieve_and_prompt(const AudioSample& sample, const Datastore& store,
                               const RetrievalConfig& config,
                               const std::unordered_set<std::string>& exclude) {
  if (config.k < 1) throw InvalidArgument("retrieval k must be >= 1");
  const Embedding query = embed_audio(sample, store.encoder_config());
  const std::vector<RetrievalHit> hits =
      store.query_topk(query, static_cast<std::size_t>(config.k), exclude);
  std::vector<std::string> captions;
  captions.reserve(hits.size());
  PromptText prompt;
  for (const RetrievalHit& hit : hits) {
    captions.push_back(hit.text);
    prompt.retrieved_ids.push_back(hit.entry_id);
  }
  PromptText built = build_prompt(captions);
  built.retrieved_ids = std::move(prompt.retrieved_ids);
  return built;
}

}  // namespace raac
