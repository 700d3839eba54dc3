#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "raac/encoder.h"

namespace raac {

struct DomainSpec {
  std::string name;
  std::vector<std::string> events;          // >= 5, names match [a-z0-9_]+
  std::vector<std::string> templates;       // >= 2, each with a {event} slot
  std::vector<std::string> overlap_events;  // subset shared with other domains
};

struct CorpusSample {
  AudioSample audio;
  std::array<std::string, 5> references;
  std::string split;  // "train" | "dev" | "test"
};

struct Dataset {
  std::vector<CorpusSample> samples;

  // Samples matching split (and domain, when non-empty), in corpus order.
  std::vector<const CorpusSample*> view(const std::string& split,
                                        const std::string& domain = "") const;
  std::vector<std::string> domains() const;
};

struct GenConfig {
  std::uint64_t seed = 42;
  int samples_per_domain = 100;
  int events_min = 1;
  int events_max = 4;
  double overlap_fraction = 0.2;
};

// Built-in two-domain pair (urban/nature soundscapes) sharing
// round(overlap_fraction * 20) events out of 20 per domain.
std::vector<DomainSpec> default_domain_pair(double overlap_fraction);

// Deterministic generation: seeded event draws, 5 distinct references per
// sample (each mentioning every event), 70/15/15 splits per domain.
Dataset generate(const std::vector<DomainSpec>& domains, const GenConfig& config);

void save_jsonl(const Dataset& dataset, const std::string& path);
Dataset load_jsonl(const std::string& path);

}  // namespace raac
