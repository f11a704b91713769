#pragma once

// Double k-uniform sampling: cap how many instances share one
// (category, count) pair so that neither the answer distribution nor the
// category distribution is dominated by a few frequent values.

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "countvqa/coco_ingest.hpp"
#include "countvqa/errors.hpp"
#include "countvqa/hashing.hpp"
#include "countvqa/rng.hpp"

namespace countvqa {

/// `prose` keeps at most k per pair. `pseudocode` follows the published loop
/// literally (skip only once the tally already exceeds k), which keeps k + 1.
enum class CapSemantics { prose, pseudocode };

inline std::string_view to_string(CapSemantics c) {
  return c == CapSemantics::prose ? "prose" : "pseudocode";
}

inline CapSemantics cap_semantics_from_string(std::string_view s) {
  if (s == "prose") return CapSemantics::prose;
  if (s == "pseudocode") return CapSemantics::pseudocode;
  throw ConfigError("unknown cap semantics \"" + std::string(s) + "\" (expected prose|pseudocode)");
}

struct SamplerConfig {
  int k = 50;
  std::uint64_t seed = 0;
  CapSemantics cap_semantics = CapSemantics::prose;

  void validate() const {
    if (k < 1) throw ConfigError("sampler k must be >= 1, got " + std::to_string(k));
  }
  std::size_t cap() const {
    return static_cast<std::size_t>(k) + (cap_semantics == CapSemantics::pseudocode ? 1 : 0);
  }
};

using PairKey = std::pair<std::string, int>;  // (category, count)
using SamplerTally = std::map<PairKey, std::size_t>;

struct SampleManifest {
  std::uint64_t seed = 0;
  int k = 0;
  CapSemantics cap_semantics = CapSemantics::prose;
  std::string input_sha256;
  std::size_t output_size = 0;
  std::string generator_name{kGeneratorName};

  json to_json() const {
    return json{{"seed", seed},
                {"k", k},
                {"cap_semantics", to_string(cap_semantics)},
                {"input_sha256", input_sha256},
                {"output_size", output_size},
                {"generator_name", generator_name}};
  }
};

struct SampleResult {
  std::vector<CountInstance> instances;
  SamplerTally tally;
  SampleManifest manifest;
};

/// SHA-256 of the canonical (sorted) JSONL form, so it identifies the input
/// multiset regardless of list order.
inline std::string dataset_sha256(std::span<const CountInstance> s) {
  std::vector<CountInstance> sorted(s.begin(), s.end());
  sort_instances(sorted);
  Sha256 h;
  for (const auto& ci : sorted) h.update(to_json(ci).dump()).update("\n");
  return h.hex();
}

inline SampleResult double_k_uniform_sample(std::span<const CountInstance> s,
                                            const SamplerConfig& cfg) {
  cfg.validate();
  // Canonical order first: the selection must depend only on the multiset.
  std::vector<CountInstance> pool(s.begin(), s.end());
  sort_instances(pool);
  Rng rng(cfg.seed);
  rng.shuffle(std::span<CountInstance>(pool));

  SampleResult r;
  const std::size_t k = static_cast<std::size_t>(cfg.k);
  for (auto& ci : pool) {
    auto& m = r.tally[{ci.category, ci.count}];
    const bool full = cfg.cap_semantics == CapSemantics::prose ? m >= k : m > k;
    if (full) continue;
    r.instances.push_back(std::move(ci));
    ++m;
  }
  sort_instances(r.instances);

  r.manifest.seed = cfg.seed;
  r.manifest.k = cfg.k;
  r.manifest.cap_semantics = cfg.cap_semantics;
  r.manifest.input_sha256 = dataset_sha256(s);
  r.manifest.output_size = r.instances.size();
  return r;
}

/// Closed form of |double_k_uniform_sample(s, cfg)|: sum over pairs of
/// min(occurrences, cap).
inline std::size_t expected_output_size(std::span<const CountInstance> s, const SamplerConfig& cfg) {
  cfg.validate();
  std::map<PairKey, std::size_t> occ;
  for (const auto& ci : s) ++occ[{ci.category, ci.count}];
  std::size_t total = 0;
  for (const auto& [_, n] : occ) total += std::min(n, cfg.cap());
  return total;
}

}  // namespace countvqa
