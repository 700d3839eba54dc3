#include "raac/datastore.h"

#include <algorithm>
#include <cstdio>
#include <unordered_set>

#include "raac/binio.h"
#include "raac/errors.h"

namespace raac {

namespace {

constexpr char kMagic[4] = {'R', 'C', 'D', 'S'};
constexpr std::uint16_t kVersion = 1;

std::string sequential_id(std::size_t index) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "%08zu", index);
  return buf;
}

// Store components at f32 precision so save/load round-trips bit-for-bit.
void quantize_f32(Embedding& e) {
  for (double& v : e.values) v = static_cast<double>(static_cast<float>(v));
}

void check_unique_ids(const std::vector<CaptionEntry>& entries) {
  std::unordered_set<std::string> seen;
  seen.reserve(entries.size());
  for (const CaptionEntry& e : entries) {
    if (!seen.insert(e.entry_id).second) {
      throw InvalidArgument("duplicate entry id: " + e.entry_id);
    }
  }
}

}  // namespace

Datastore Datastore::build(const std::vector<std::pair<std::string, std::string>>& captions,
                           const EncoderConfig& config, const std::string& name) {
  if (captions.empty()) throw InvalidArgument("datastore build: empty caption list");
  for (std::size_t i = 0; i < captions.size(); ++i) {
    if (captions[i].first.empty()) {
      throw InvalidArgument("datastore build: empty caption text at index " + std::to_string(i));
    }
  }
  Datastore store;
  store.config_ = config;
  store.name_ = name;
  store.entries_.reserve(captions.size());
  for (std::size_t i = 0; i < captions.size(); ++i) {
    CaptionEntry entry;
    entry.entry_id = sequential_id(i);
    entry.text = captions[i].first;
    entry.source = captions[i].second;
    entry.embedding = embed_text(entry.text, config);
    quantize_f32(entry.embedding);
    store.entries_.push_back(std::move(entry));
  }
  return store;
}

std::vector<RetrievalHit> Datastore::query_topk(
    const Embedding& query, std::size_t k,
    const std::unordered_set<std::string>& exclude) const {
  if (k == 0) throw InvalidArgument("query_topk: k must be positive");
  if (query.dim() != config_.dim) {
    throw InvalidArgument("query_topk: query dim " + std::to_string(query.dim()) +
                          " does not match datastore dim " + std::to_string(config_.dim));
  }
  std::vector<RetrievalHit> hits;
  hits.reserve(entries_.size());
  for (const CaptionEntry& entry : entries_) {
    if (exclude.contains(entry.entry_id)) continue;
    double score = dot(query, entry.embedding);
    score = std::clamp(score, -1.0, 1.0);
    hits.push_back({entry.entry_id, entry.text, score});
  }
  std::sort(hits.begin(), hits.end(), [](const RetrievalHit& a, const RetrievalHit& b) {
    if (a.score != b.score) return a.score > b.score;
    return a.entry_id < b.entry_id;
  });
  if (hits.size() > k) hits.resize(k);
  return hits;
}

Datastore Datastore::merge(const Datastore& a, const Datastore& b) {
  if (!(a.config_ == b.config_)) {
    throw InvalidArgument("merge: encoder config mismatch, embeddings not comparable");
  }
  Datastore merged;
  merged.config_ = a.config_;
  merged.name_ = a.name_ + "+" + b.name_;
  merged.entries_.reserve(a.entries_.size() + b.entries_.size());
  for (const CaptionEntry& e : a.entries_) {
    CaptionEntry copy = e;
    copy.entry_id = a.name_ + "/" + e.entry_id;
    merged.entries_.push_back(std::move(copy));
  }
  for (const CaptionEntry& e : b.entries_) {
    CaptionEntry copy = e;
    copy.entry_id = b.name_ + "/" + e.entry_id;
    merged.entries_.push_back(std::move(copy));
  }
  check_unique_ids(merged.entries_);
  return merged;
}

void Datastore::save(const std::string& path) const {
  BinWriter w(path);
  w.bytes(kMagic, 4);
  w.u16(kVersion);
  w.u32(static_cast<std::uint32_t>(config_.dim));
  w.u64(entries_.size());
  w.u64(config_.seed);
  w.f64(config_.alpha);
  w.u32(static_cast<std::uint32_t>(config_.dim));
  for (const CaptionEntry& e : entries_) {
    w.str(e.entry_id);
    w.str(e.text);
    w.str(e.source);
    for (double v : e.embedding.values) w.f32(static_cast<float>(v));
  }
  w.close();
}

Datastore Datastore::load(const std::string& path) {
  BinReader r(path);
  char magic[4];
  r.bytes(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) {
    throw BadMagicError("bad magic bytes in " + path);
  }
  const std::uint16_t version = r.u16();
  if (version != kVersion) {
    throw BadVersionError("unsupported datastore version " + std::to_string(version));
  }
  const std::uint32_t dim = r.u32();
  const std::uint64_t count = r.u64();
  Datastore store;
  store.config_.seed = r.u64();
  store.config_.alpha = r.f64();
  store.config_.dim = static_cast<int>(r.u32());
  if (static_cast<int>(dim) != store.config_.dim) {
    throw DataFormatError("datastore dim disagrees with encoder config dim");
  }
  // The on-disk format carries no display name; derive one from the path.
  const std::size_t slash = path.find_last_of("/\\");
  const std::string base = slash == std::string::npos ? path : path.substr(slash + 1);
  const std::size_t dot = base.find_last_of('.');
  store.name_ = dot == std::string::npos ? base : base.substr(0, dot);
  store.entries_.reserve(count);
  for (std::uint64_t i = 0; i < count; ++i) {
    CaptionEntry e;
    e.entry_id = r.str();
    e.text = r.str();
    e.source = r.str();
    e.embedding.values.resize(dim);
    for (std::uint32_t j = 0; j < dim; ++j) {
      e.embedding.values[j] = static_cast<double>(r.f32());
    }
    store.entries_.push_back(std::move(e));
  }
  if (!r.at_eof()) throw DataFormatError("trailing bytes after last entry in " + path);
  return store;
}

}  // namespace raac
