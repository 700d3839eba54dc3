#pragma once

#include <string>
#include <unordered_map>
#include <vector>

namespace raac {

// Word-level id<->word bijection with reserved specials at fixed ids.
class Vocabulary {
 public:
  static constexpr int kBos = 0;
  static constexpr int kEos = 1;
  static constexpr int kPad = 2;
  static constexpr int kUnk = 3;

  // Words with count >= min_count get ids ordered by descending frequency,
  // then lexicographically; everything else maps to UNK.
  static Vocabulary build(const std::vector<std::string>& captions, int min_count);

  // Reconstructs from the full id-ordered word list (checkpoint loading).
  static Vocabulary from_words(const std::vector<std::string>& words);

  int id(const std::string& word) const;
  const std::string& word(int id) const;
  int size() const { return static_cast<int>(words_.size()); }
  const std::vector<std::string>& words() const { return words_; }

  std::vector<int> encode(const std::vector<std::string>& tokens) const;

  static bool is_special(int id) { return id >= 0 && id <= kUnk; }

 private:
  std::vector<std::string> words_;
  std::unordered_map<std::string, int> index_;
};

}  // namespace raac
