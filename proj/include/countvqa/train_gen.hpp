#pragma once

// Finetuning data for the counting task: the direct question alone, or the
// counting answer paired with a claim check (I) or a comparison (II).

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "countvqa/coco_ingest.hpp"
#include "countvqa/jsonl.hpp"
#include "countvqa/question_gen.hpp"
#include "countvqa/response_parse.hpp"
#include "countvqa/rng.hpp"
#include "countvqa/templates.hpp"

namespace countvqa {

enum class TrainMethod { direct, cons_I, cons_II };

inline std::string_view to_string(TrainMethod m) {
  switch (m) {
    case TrainMethod::direct: return "direct";
    case TrainMethod::cons_I: return "cons_I";
    case TrainMethod::cons_II: return "cons_II";
  }
  return "?";
}

inline constexpr std::size_t kDefaultComparisonTarget = 100000;

struct TrainSample {
  std::string id;
  std::string image;
  std::string prompt;
  std::string answer;
  TrainMethod method = TrainMethod::direct;
  std::vector<std::string> categories;
  std::vector<int> counts;

  friend bool operator==(const TrainSample&, const TrainSample&) = default;
};

inline TrainMethod method_of(Family f) {
  switch (f) {
    case Family::train_direct: return TrainMethod::direct;
    case Family::train_cons_I: return TrainMethod::cons_I;
    case Family::train_cons_II: return TrainMethod::cons_II;
    default: throw DataError("not a training family: " + std::string(to_string(f)));
  }
}

inline TrainSample to_sample(const QuestionRecord& q) {
  return TrainSample{q.question_id, q.image_ref,  q.prompt, render_answer(q), method_of(q.family),
                     q.categories,  q.counts};
}

inline std::vector<TrainSample> to_samples(std::span<const QuestionRecord> qs) {
  std::vector<TrainSample> out;
  out.reserve(qs.size());
  for (const auto& q : qs) out.push_back(to_sample(q));
  return out;
}

// ---------------------------------------------------------------------------
// Record-level generators. The gold of each record is the full answer, so
// render_answer() yields the training target and parse_response() inverts it.

inline std::vector<QuestionRecord> train_direct_records(std::span<const CountInstance> s) {
  std::vector<QuestionRecord> out;
  out.reserve(s.size());
  for (const auto& ci : s) {
    QuestionRecord q;
    q.family = Family::train_direct;
    q.image_id = ci.image_id;
    q.image_ref = ci.image_ref;
    q.prompt = primal_prompt(ci.category);
    q.categories = {ci.category};
    q.counts = {ci.count};
    q.gold = GoldAnswer::of_compound({GoldAnswer::of_number(ci.count)});
    assign_id(q);
    out.push_back(std::move(q));
  }
  return out;
}

inline std::vector<QuestionRecord> train_claim_records(std::span<const CountInstance> s, std::uint64_t seed) {
  std::vector<QuestionRecord> out;
  out.reserve(s.size());
  for (const auto& ci : s) {
    Rng rng(derive_seed(seed, "cons_I/" + ci.image_ref + "/" + ci.category));
    const int m = draw_claimed_count(rng, ci.count);
    QuestionRecord q;
    q.family = Family::train_cons_I;
    q.image_id = ci.image_id;
    q.image_ref = ci.image_ref;
    q.prompt = train_claim_prompt(m, ci.category);
    q.categories = {ci.category};
    q.counts = {ci.count};
    q.queried_count = m;
    q.gold = GoldAnswer::of_compound({GoldAnswer::of_yes_no(m == ci.count), GoldAnswer::of_number(ci.count)});
    assign_id(q);
    out.push_back(std::move(q));
  }
  return out;
}

struct ComparisonRecords {
  std::vector<QuestionRecord> records;
  std::size_t available = 0;  // candidate pairs before the target cut
  bool short_of_target = false;
};

/// Selects up to `target` category pairs (same image) at random. Each pair's
/// order is a seeded coin flip so neither position is favoured.
inline ComparisonRecords train_compare_records(std::span<const CountInstance> s, std::size_t target,
                                               std::uint64_t seed) {
  struct Candidate {
    const detail::ImageGroup* image;
    std::size_t i, j;
  };
  const auto groups = detail::group_by_image(s);
  std::vector<Candidate> cands;
  for (const auto& g : groups) {
    for (const auto& [i, j] : detail::all_pairs(g.present.size())) cands.push_back({&g, i, j});
  }

  ComparisonRecords r;
  r.available = cands.size();
  r.short_of_target = cands.size() < target;
  if (cands.size() > target) {
    std::vector<std::size_t> order(cands.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    Rng rng(derive_seed(seed, "cons_II/select"));
    rng.shuffle(std::span(order));
    order.resize(target);
    std::sort(order.begin(), order.end());
    std::vector<Candidate> kept;
    kept.reserve(target);
    for (auto k : order) kept.push_back(cands[k]);
    cands = std::move(kept);
  }

  r.records.reserve(cands.size());
  for (const auto& c : cands) {
    auto first = c.image->present[c.i];
    auto second = c.image->present[c.j];
    Rng coin(derive_seed(seed, "cons_II/order/" + c.image->image_ref + "/" + first.first + "/" + second.first));
    if (coin.coin()) std::swap(first, second);

    QuestionRecord q;
    q.family = Family::train_cons_II;
    q.image_id = c.image->image_id;
    q.image_ref = c.image->image_ref;
    q.prompt = train_compare_prompt(first.first, second.first);
    q.categories = {first.first, second.first};
    q.counts = {first.second, second.second};
    q.gold = GoldAnswer::of_compound({GoldAnswer::of_verdict(verdict_for(first.second, second.second)),
                                      GoldAnswer::of_number(first.second), GoldAnswer::of_number(second.second)});
    assign_id(q);
    r.records.push_back(std::move(q));
  }
  return r;
}

// ---------------------------------------------------------------------------
// Sample-level entry points

inline std::vector<TrainSample> gen_direct(std::span<const CountInstance> s) {
  return to_samples(train_direct_records(s));
}

inline std::vector<TrainSample> gen_cons_I(std::span<const CountInstance> s, std::uint64_t seed) {
  return to_samples(train_claim_records(s, seed));
}

struct ComparisonSamples {
  std::vector<TrainSample> samples;
  std::size_t available = 0;
  bool short_of_target = false;
};

inline ComparisonSamples gen_cons_II(std::span<const CountInstance> s, std::size_t target, std::uint64_t seed) {
  auto r = train_compare_records(s, target, seed);
  return {to_samples(r.records), r.available, r.short_of_target};
}

/// Both consistency sets concatenated and shuffled together.
inline ComparisonSamples gen_cons_I_II(std::span<const CountInstance> s, std::uint64_t seed,
                                       std::size_t target = kDefaultComparisonTarget) {
  auto claims = gen_cons_I(s, seed);
  auto cmp = gen_cons_II(s, target, seed);
  ComparisonSamples out{std::move(claims), cmp.available, cmp.short_of_target};
  out.samples.insert(out.samples.end(), std::make_move_iterator(cmp.samples.begin()),
                     std::make_move_iterator(cmp.samples.end()));
  Rng rng(derive_seed(seed, "cons_I_II/shuffle"));
  rng.shuffle(std::span(out.samples));
  return out;
}

/// Images of `samples` that appear in `heldout`, sorted and unique.
inline std::vector<std::string> find_leaks(std::span<const TrainSample> samples,
                                           const std::set<std::string>& heldout) {
  std::set<std::string> leaks;
  for (const auto& s : samples) {
    if (heldout.contains(s.image)) leaks.insert(s.image);
  }
  return {leaks.begin(), leaks.end()};
}

inline void check_no_leakage(std::span<const TrainSample> samples, const std::set<std::string>& heldout) {
  auto leaks = find_leaks(samples, heldout);
  if (!leaks.empty()) {
    throw DataError(std::to_string(leaks.size()) + " training image(s) overlap the held-out set, first: " +
                    leaks.front());
  }
}

// ---------------------------------------------------------------------------
// Serialization

inline constexpr std::string_view kTrainSchema = "ts/1";
inline constexpr std::string_view kImagePlaceholder = "<image>\n";

inline json to_json(const TrainSample& s) {
  return json{{"schema", kTrainSchema},
              {"id", s.id},
              {"image", s.image},
              {"method", to_string(s.method)},
              {"conversations",
               json::array({json{{"role", "user"}, {"text", std::string(kImagePlaceholder) + s.prompt}},
                            json{{"role", "assistant"}, {"text", s.answer}}})},
              {"meta", {{"categories", s.categories}, {"counts", s.counts}}}};
}

inline void write_samples(const std::filesystem::path& path, std::span<const TrainSample> samples) {
  AtomicFile f(path);
  for (const auto& s : samples) f.write_line(to_json(s));
  f.commit();
}

}  // namespace countvqa
