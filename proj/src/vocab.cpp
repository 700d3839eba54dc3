#include "raac/vocab.h"

#include <algorithm>
#include <map>

#include "raac/errors.h"
#include "raac/text.h"

namespace raac {

namespace {

const std::vector<std::string> kSpecials = {"<bos>", "<eos>", "<pad>", "<unk>"};

}  // namespace

Vocabulary Vocabulary::build(const std::vector<std::string>& captions, int min_count) {
  if (captions.empty()) throw InvalidArgument("build_vocab: empty corpus");
  if (min_count < 1) throw InvalidArgument("build_vocab: min_count must be >= 1");
  std::map<std::string, int> counts;  // ordered map keeps ties deterministic
  for (const std::string& caption : captions) {
    for (const std::string& word : tokenize(caption)) ++counts[word];
  }
  std::vector<std::pair<std::string, int>> kept;
  for (const auto& [word, count] : counts) {
    if (count >= min_count) kept.emplace_back(word, count);
  }
  std::stable_sort(kept.begin(), kept.end(), [](const auto& a, const auto& b) {
    if (a.second != b.second) return a.second > b.second;
    return a.first < b.first;
  });

  Vocabulary vocab;
  vocab.words_ = kSpecials;
  for (const auto& [word, count] : kept) {
    (void)count;
    vocab.words_.push_back(word);
  }
  for (std::size_t i = 0; i < vocab.words_.size(); ++i) {
    vocab.index_[vocab.words_[i]] = static_cast<int>(i);
  }
  return vocab;
}

Vocabulary Vocabulary::from_words(const std::vector<std::string>& words) {
  if (words.size() < kSpecials.size()) {
    throw DataFormatError("vocabulary word list is missing special tokens");
  }
  for (std::size_t i = 0; i < kSpecials.size(); ++i) {
    if (words[i] != kSpecials[i]) {
      throw DataFormatError("vocabulary special tokens are not at ids 0-3");
    }
  }
  Vocabulary vocab;
  vocab.words_ = words;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (!vocab.index_.emplace(words[i], static_cast<int>(i)).second) {
      throw DataFormatError("duplicate word in vocabulary: " + words[i]);
    }
  }
  return vocab;
}

int Vocabulary::id(const std::string& word) const {
  const auto it = index_.find(word);
  return it == index_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::word(int id) const {
  if (id < 0 || id >= size()) throw InvalidArgument("token id out of range");
  return words_[static_cast<std::size_t>(id)];
}

std::vector<int> Vocabulary::encode(const std::vector<std::string>& tokens) const {
  std::vector<int> ids;
  ids.reserve(tokens.size());
  for (const std::string& t : tokens) ids.push_back(id(t));
  return ids;
}

}  // namespace raac
