#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

namespace raac {

// Deterministic dual encoder: audio samples (event-token sequences) and
// text captions map into one shared unit-norm embedding space, so paired
// audio and captions land close in cosine similarity without any learned
// weights. Audio additionally exposes a per-event hidden-state sequence
// for decoder conditioning.

bool valid_event_name(const std::string& name);  // [a-z0-9_]+

struct AudioSample {
  std::string id;
  std::vector<std::string> events;  // ordered, length >= 1
  std::string domain;
};

struct EncoderConfig {
  int dim = 64;
  std::uint64_t seed = 0;
  double alpha = 0.1;  // weight of non-event caption words

  bool operator==(const EncoderConfig&) const = default;
};

struct Embedding {
  std::vector<double> values;

  int dim() const { return static_cast<int>(values.size()); }
};

double dot(const Embedding& a, const Embedding& b);
double cosine(const Embedding& a, const Embedding& b);

// Unit vector for one token, fully determined by (config.seed, token).
Embedding base_vector(const std::string& token, const EncoderConfig& config);

// Positional perturbation for hidden-state row i, already scaled to norm 0.1.
Embedding positional_vector(int index, const EncoderConfig& config);

// L2-normalized sum of the sample's event vectors (repeats counted).
Embedding embed_audio(const AudioSample& sample, const EncoderConfig& config);

// L2-normalized weighted bag of words; words containing '_' count as event
// tokens with weight 1, every other word contributes with weight alpha.
Embedding embed_text(const std::string& caption, const EncoderConfig& config);

struct HiddenStateSeq {
  Eigen::MatrixXd values;  // n x dim, rows not normalized

  int rows() const { return static_cast<int>(values.rows()); }
  int dim() const { return static_cast<int>(values.cols()); }
};

// Row i = base_vector(event_i) + positional_vector(i).
HiddenStateSeq audio_hidden_states(const AudioSample& sample, const EncoderConfig& config);

}  // namespace raac
