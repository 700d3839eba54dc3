#pragma once

#include <cstddef>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

#include "raac/encoder.h"

namespace raac {

struct CaptionEntry {
  std::string entry_id;
  std::string text;
  std::string source;
  Embedding embedding;  // unit norm, f32-representable components
};

struct RetrievalHit {
  std::string entry_id;
  std::string text;
  double score;  // cosine similarity, clamped to [-1, 1]
};

// Immutable collection of captions with precomputed embeddings. Queries are
// exact top-k cosine scans; mutation means building or merging a new store.
class Datastore {
 public:
  // One entry per (text, source) pair; ids are sequential and zero-padded.
  static Datastore build(const std::vector<std::pair<std::string, std::string>>& captions,
                         const EncoderConfig& config, const std::string& name = "datastore");

  // Highest-cosine entries, score-descending, ties broken by ascending
  // entry id; excluded ids never appear.
  std::vector<RetrievalHit> query_topk(const Embedding& query, std::size_t k,
                                       const std::unordered_set<std::string>& exclude = {}) const;

  // Union of entries; ids are prefixed with the source store's name.
  static Datastore merge(const Datastore& a, const Datastore& b);

  void save(const std::string& path) const;
  static Datastore load(const std::string& path);

  const std::vector<CaptionEntry>& entries() const { return entries_; }
  const EncoderConfig& encoder_config() const { return config_; }
  int dim() const { return config_.dim; }
  const std::string& name() const { return name_; }
  std::size_t size() const { return entries_.size(); }

 private:
  std::vector<CaptionEntry> entries_;
  EncoderConfig config_;
  std::string name_;
};

}  // namespace raac
