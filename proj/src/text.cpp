#include "raac/text.h"

#include <cctype>
#include <cstdio>

namespace raac {

namespace {

bool word_char(unsigned char c) {
  if (c >= 0x80) return true;  // keep UTF-8 continuation/lead bytes
  return std::isalnum(c) != 0 || c == '_';
}

}  // namespace

std::vector<std::string> tokenize(const std::string& text) {
  std::vector<std::string> words;
  std::string current;
  for (unsigned char c : text) {
    if (word_char(c)) {
      current.push_back(static_cast<char>(std::tolower(c)));
    } else if (!current.empty()) {
      words.push_back(current);
      current.clear();
    }
  }
  if (!current.empty()) words.push_back(current);
  return words;
}

std::string join(const std::vector<std::string>& words, const std::string& sep) {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i > 0) out += sep;
    out += words[i];
  }
  return out;
}

bool is_blank(const std::string& s) {
  for (unsigned char c : s) {
    if (std::isspace(c) == 0) return false;
  }
  return true;
}

std::string format_fixed(double value, int decimals) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.*f", decimals, value);
  return buf;
}

}  // namespace raac
