#include "raac/encoder.h"

#include <cmath>

#include "raac/errors.h"
#include "raac/rng.h"
#include "raac/text.h"

namespace raac {

namespace {

void validate_config(const EncoderConfig& config) {
  if (config.dim < 2) throw InvalidArgument("encoder dim must be >= 2");
  if (config.alpha < 0.0 || config.alpha > 1.0) {
    throw InvalidArgument("encoder alpha must be in [0, 1]");
  }
}

Embedding sample_unit_vector(std::uint64_t seed, int dim) {
  NormalSampler sampler(seed);
  Embedding e;
  e.values.resize(static_cast<std::size_t>(dim));
  double norm_sq = 0.0;
  for (double& v : e.values) {
    v = sampler.next();
    norm_sq += v * v;
  }
  const double norm = std::sqrt(norm_sq);
  for (double& v : e.values) v /= norm;
  return e;
}

void normalize(Embedding& e) {
  double norm_sq = 0.0;
  for (double v : e.values) norm_sq += v * v;
  const double norm = std::sqrt(norm_sq);
  if (norm < 1e-12) throw InvalidArgument("embedding has no weighted content");
  for (double& v : e.values) v /= norm;
}

bool is_event_word(const std::string& word) {
  return word.find('_') != std::string::npos;
}

}  // namespace

bool valid_event_name(const std::string& name) {
  if (name.empty()) return false;
  for (char c : name) {
    const bool ok = (c >= 'a' && c <= 'z') || (c >= '0' && c <= '9') || c == '_';
    if (!ok) return false;
  }
  return true;
}

double dot(const Embedding& a, const Embedding& b) {
  if (a.dim() != b.dim()) throw InvalidArgument("embedding dimension mismatch");
  double s = 0.0;
  for (int i = 0; i < a.dim(); ++i) s += a.values[i] * b.values[i];
  return s;
}

double cosine(const Embedding& a, const Embedding& b) {
  double na = 0.0, nb = 0.0;
  for (double v : a.values) na += v * v;
  for (double v : b.values) nb += v * v;
  if (na == 0.0 || nb == 0.0) throw InvalidArgument("cosine of zero vector");
  return dot(a, b) / std::sqrt(na * nb);
}

Embedding base_vector(const std::string& token, const EncoderConfig& config) {
  validate_config(config);
  if (token.empty()) throw InvalidArgument("empty token");
  return sample_unit_vector(hash_combine(config.seed, token), config.dim);
}

Embedding positional_vector(int index, const EncoderConfig& config) {
  validate_config(config);
  if (index < 0) throw InvalidArgument("negative position");
  const std::uint64_t seed =
      hash_combine(hash_combine(config.seed, "pos"), static_cast<std::uint64_t>(index));
  Embedding e = sample_unit_vector(seed, config.dim);
  for (double& v : e.values) v *= 0.1;
  return e;
}

Embedding embed_audio(const AudioSample& sample, const EncoderConfig& config) {
  validate_config(config);
  if (sample.events.empty()) throw InvalidArgument("empty audio");
  Embedding sum;
  sum.values.assign(static_cast<std::size_t>(config.dim), 0.0);
  for (const std::string& event : sample.events) {
    const Embedding b = base_vector(event, config);
    for (int i = 0; i < config.dim; ++i) sum.values[i] += b.values[i];
  }
  normalize(sum);
  return sum;
}

Embedding embed_text(const std::string& caption, const EncoderConfig& config) {
  validate_config(config);
  const std::vector<std::string> words = tokenize(caption);
  if (words.empty()) throw InvalidArgument("empty text");
  Embedding sum;
  sum.values.assign(static_cast<std::size_t>(config.dim), 0.0);
  for (const std::string& word : words) {
    const double weight = is_event_word(word) ? 1.0 : config.alpha;
    if (weight == 0.0) continue;
    const Embedding b = base_vector(word, config);
    for (int i = 0; i < config.dim; ++i) sum.values[i] += weight * b.values[i];
  }
  normalize(sum);
  return sum;
}

HiddenStateSeq audio_hidden_states(const AudioSample& sample, const EncoderConfig& config) {
  validate_config(config);
  if (sample.events.empty()) throw InvalidArgument("empty audio");
  HiddenStateSeq seq;
  seq.values.resize(static_cast<Eigen::Index>(sample.events.size()), config.dim);
  for (std::size_t i = 0; i < sample.events.size(); ++i) {
    const Embedding b = base_vector(sample.events[i], config);
    const Embedding p = positional_vector(static_cast<int>(i), config);
    for (int j = 0; j < config.dim; ++j) {
      seq.values(static_cast<Eigen::Index>(i), j) = b.values[j] + p.values[j];
    }
  }
  return seq;
}

}  // namespace raac
