#pragma once

#include <string>
#include <vector>

namespace raac {

// Shared tokenizer used by the encoder, the decoder vocabulary and the
// metrics: ASCII-lowercase, strip punctuation, split on whitespace.
// Underscore is kept as a word character so compound event names like
// "dog_bark" survive as single tokens; non-ASCII bytes pass through.
std::vector<std::string> tokenize(const std::string& text);

std::string join(const std::vector<std::string>& words, const std::string& sep);

bool is_blank(const std::string& s);

// Fixed-point decimal formatting for reports ("0.7165" style).
std::string format_fixed(double value, int decimals);

}  // namespace raac
