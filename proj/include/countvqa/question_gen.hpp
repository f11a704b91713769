#pragma once

#include <array>
#include <algorithm>
#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "countvqa/coco_ingest.hpp"
#include "countvqa/errors.hpp"
#include "countvqa/hashing.hpp"
#include "countvqa/jsonl.hpp"
#include "countvqa/rng.hpp"
#include "countvqa/templates.hpp"

namespace countvqa {

enum class Family {
  primal,
  binary_I,
  binary_II,
  binary_III,
  compare_I,
  compare_II,
  train_direct,
  train_cons_I,
  train_cons_II,
};

inline constexpr std::array<std::pair<Family, std::string_view>, 9> kFamilyNames{{
    {Family::primal, "primal"},
    {Family::binary_I, "binary_I"},
    {Family::binary_II, "binary_II"},
    {Family::binary_III, "binary_III"},
    {Family::compare_I, "compare_I"},
    {Family::compare_II, "compare_II"},
    {Family::train_direct, "train_direct"},
    {Family::train_cons_I, "train_cons_I"},
    {Family::train_cons_II, "train_cons_II"},
}};

inline std::string_view to_string(Family f) {
  for (const auto& [fam, name] : kFamilyNames) {
    if (fam == f) return name;
  }
  return "?";
}

inline Family family_from_string(std::string_view s) {
  for (const auto& [fam, name] : kFamilyNames) {
    if (name == s) return fam;
  }
  throw DataError("unknown question family \"" + std::string(s) + "\"");
}

inline bool is_binary(Family f) {
  return f == Family::binary_I || f == Family::binary_II || f == Family::binary_III;
}
inline bool is_compare(Family f) { return f == Family::compare_I || f == Family::compare_II; }

enum class Verdict { first_greater, second_greater, same };
enum class Option { A, B, C };

inline std::string_view to_string(Verdict v) {
  switch (v) {
    case Verdict::first_greater: return "first_greater";
    case Verdict::second_greater: return "second_greater";
    case Verdict::same: return "same";
  }
  return "?";
}

inline Verdict verdict_from_string(std::string_view s) {
  if (s == "first_greater") return Verdict::first_greater;
  if (s == "second_greater") return Verdict::second_greater;
  if (s == "same") return Verdict::same;
  throw DataError("unknown verdict \"" + std::string(s) + "\"");
}

inline std::string_view to_string(Option o) {
  switch (o) {
    case Option::A: return "A";
    case Option::B: return "B";
    case Option::C: return "C";
  }
  return "?";
}

inline Option option_from_string(std::string_view s) {
  if (s == "A") return Option::A;
  if (s == "B") return Option::B;
  if (s == "C") return Option::C;
  throw DataError("unknown option \"" + std::string(s) + "\"");
}

/// Verdict for counts in the given order.
inline Verdict verdict_for(int first, int second) {
  if (first > second) return Verdict::first_greater;
  if (first < second) return Verdict::second_greater;
  return Verdict::same;
}

/// The same judgement expressed with the two categories swapped.
inline Verdict mirror(Verdict v) {
  switch (v) {
    case Verdict::first_greater: return Verdict::second_greater;
    case Verdict::second_greater: return Verdict::first_greater;
    case Verdict::same: return Verdict::same;
  }
  return v;
}

// A: first > second, B: second > first, C: same (in the record's order).
inline Option option_for(Verdict v) {
  switch (v) {
    case Verdict::first_greater: return Option::A;
    case Verdict::second_greater: return Option::B;
    case Verdict::same: return Option::C;
  }
  return Option::C;
}

inline Verdict verdict_for(Option o) {
  switch (o) {
    case Option::A: return Verdict::first_greater;
    case Option::B: return Verdict::second_greater;
    case Option::C: return Verdict::same;
  }
  return Verdict::same;
}

struct GoldAnswer {
  enum class Kind { number, yes_no, verdict, option, compound };

  Kind kind = Kind::number;
  std::optional<int> number;
  std::optional<bool> yes_no;
  std::optional<Verdict> verdict;
  std::optional<Option> option;
  std::optional<std::vector<GoldAnswer>> compound;

  static GoldAnswer of_number(int n) {
    GoldAnswer g;
    g.kind = Kind::number;
    g.number = n;
    return g;
  }
  static GoldAnswer of_yes_no(bool b) {
    GoldAnswer g;
    g.kind = Kind::yes_no;
    g.yes_no = b;
    return g;
  }
  static GoldAnswer of_verdict(Verdict v) {
    GoldAnswer g;
    g.kind = Kind::verdict;
    g.verdict = v;
    return g;
  }
  static GoldAnswer of_option(Option o) {
    GoldAnswer g;
    g.kind = Kind::option;
    g.option = o;
    return g;
  }
  static GoldAnswer of_compound(std::vector<GoldAnswer> parts) {
    GoldAnswer g;
    g.kind = Kind::compound;
    g.compound = std::move(parts);
    return g;
  }

  friend bool operator==(const GoldAnswer&, const GoldAnswer&) = default;
};

inline std::string_view to_string(GoldAnswer::Kind k) {
  switch (k) {
    case GoldAnswer::Kind::number: return "number";
    case GoldAnswer::Kind::yes_no: return "yes_no";
    case GoldAnswer::Kind::verdict: return "verdict";
    case GoldAnswer::Kind::option: return "option";
    case GoldAnswer::Kind::compound: return "compound";
  }
  return "?";
}

inline json to_json(const GoldAnswer& g) {
  json j{{"kind", to_string(g.kind)}};
  switch (g.kind) {
    case GoldAnswer::Kind::number: j["number"] = *g.number; break;
    case GoldAnswer::Kind::yes_no: j["yes_no"] = *g.yes_no; break;
    case GoldAnswer::Kind::verdict: j["verdict"] = to_string(*g.verdict); break;
    case GoldAnswer::Kind::option: j["option"] = to_string(*g.option); break;
    case GoldAnswer::Kind::compound: {
      json parts = json::array();
      for (const auto& p : *g.compound) parts.push_back(to_json(p));
      j["compound"] = std::move(parts);
      break;
    }
  }
  return j;
}

inline GoldAnswer gold_from_json(const json& j) {
  const auto kind = j.at("kind").get<std::string>();
  if (kind == "number") return GoldAnswer::of_number(j.at("number").get<int>());
  if (kind == "yes_no") return GoldAnswer::of_yes_no(j.at("yes_no").get<bool>());
  if (kind == "verdict") return GoldAnswer::of_verdict(verdict_from_string(j.at("verdict").get<std::string>()));
  if (kind == "option") return GoldAnswer::of_option(option_from_string(j.at("option").get<std::string>()));
  if (kind == "compound") {
    std::vector<GoldAnswer> parts;
    for (const auto& p : j.at("compound")) parts.push_back(gold_from_json(p));
    return GoldAnswer::of_compound(std::move(parts));
  }
  throw DataError("unknown gold kind \"" + kind + "\"");
}

struct QuestionRecord {
  std::string question_id;
  Family family = Family::primal;
  std::int64_t image_id = 0;
  std::string image_ref;
  std::string prompt;
  std::vector<std::string> categories;  // prompt order
  std::vector<int> counts;              // ground truth, parallel to categories
  std::optional<int> queried_count;     // the claimed count in binary prompts
  std::optional<std::string> flip_group;
  bool flipped = false;  // second member of a flip group
  GoldAnswer gold;

  friend bool operator==(const QuestionRecord&, const QuestionRecord&) = default;
};

/// Content hash over (family, image_ref, categories, queried count, prompt),
/// truncated to 16 hex digits.
inline std::string make_question_id(Family family, std::string_view image_ref,
                                    const std::vector<std::string>& categories,
                                    std::optional<int> queried_count, std::string_view prompt) {
  json key = json::array({to_string(family), image_ref, categories,
                          queried_count ? json(*queried_count) : json(nullptr), prompt});
  return sha256_hex(key.dump()).substr(0, 16);
}

inline void assign_id(QuestionRecord& q) {
  q.question_id = make_question_id(q.family, q.image_ref, q.categories, q.queried_count, q.prompt);
}

/// Id of the primal question generated for an instance.
inline std::string primal_question_id(const CountInstance& ci) {
  return make_question_id(Family::primal, ci.image_ref, {ci.category}, std::nullopt,
                          primal_prompt(ci.category));
}

/// Checks the structural invariants of a record; throws DataError.
inline void validate(const QuestionRecord& q) {
  const auto fail = [&](const std::string& why) {
    throw DataError("question " + q.question_id + ": " + why);
  };
  if (q.counts.size() != q.categories.size()) fail("counts and categories differ in length");
  if (is_binary(q.family) && (!q.queried_count || *q.queried_count < 1)) fail("binary question needs m >= 1");
  if (is_compare(q.family)) {
    if (q.categories.size() != 2 || q.categories[0] == q.categories[1]) {
      fail("comparison needs two distinct categories");
    }
    if (!q.flip_group) fail("comparison without flip group");
  }
  if (q.family == Family::primal && q.categories.size() != 1) fail("primal needs one category");
  using K = GoldAnswer::Kind;
  const K expected = q.family == Family::primal      ? K::number
                     : is_binary(q.family)           ? K::yes_no
                     : q.family == Family::compare_I ? K::verdict
                     : q.family == Family::compare_II ? K::option
                                                      : K::compound;
  if (q.gold.kind != expected) fail("gold kind does not match family");
}

// ---------------------------------------------------------------------------
// Generators

inline std::vector<QuestionRecord> gen_primal(std::span<const CountInstance> d) {
  std::vector<QuestionRecord> out;
  out.reserve(d.size());
  for (const auto& ci : d) {
    QuestionRecord q;
    q.family = Family::primal;
    q.image_id = ci.image_id;
    q.image_ref = ci.image_ref;
    q.prompt = primal_prompt(ci.category);
    q.categories = {ci.category};
    q.counts = {ci.count};
    q.gold = GoldAnswer::of_number(ci.count);
    assign_id(q);
    out.push_back(std::move(q));
  }
  return out;
}

enum class BinarySetting { I, II, III };

inline Family family_of(BinarySetting s) {
  switch (s) {
    case BinarySetting::I: return Family::binary_I;
    case BinarySetting::II: return Family::binary_II;
    case BinarySetting::III: return Family::binary_III;
  }
  return Family::binary_I;
}

/// Model answers to primal questions, keyed by primal question id.
using PriorAnswers = std::map<std::string, int>;

/// Setting I claims the truth, II claims the model's own primal answer, III
/// claims the truth half of the time and a nearby distractor otherwise.
inline std::vector<QuestionRecord> gen_binary(std::span<const CountInstance> d, BinarySetting setting,
                                              const PriorAnswers* prior_answers, std::uint64_t seed) {
  if (setting == BinarySetting::II && prior_answers == nullptr) {
    throw DataError("binary setting II requires the model's primal answers");
  }
  std::vector<QuestionRecord> out;
  out.reserve(d.size());
  for (const auto& ci : d) {
    int m = ci.count;
    if (setting == BinarySetting::II) {
      const auto id = primal_question_id(ci);
      auto it = prior_answers->find(id);
      if (it == prior_answers->end()) {
        throw DataError("no prior primal answer for instance (" + ci.image_ref + ", " + ci.category +
                        "), primal question " + id);
      }
      if (it->second < 1) {
        throw DataError("prior answer " + std::to_string(it->second) + " for (" + ci.image_ref + ", " +
                        ci.category + ") is not a positive count");
      }
      m = it->second;
    } else if (setting == BinarySetting::III) {
      Rng rng(derive_seed(seed, "binary_III/" + ci.image_ref + "/" + ci.category));
      m = draw_claimed_count(rng, ci.count);
    }
    QuestionRecord q;
    q.family = family_of(setting);
    q.image_id = ci.image_id;
    q.image_ref = ci.image_ref;
    q.prompt = binary_prompt(m, ci.category);
    q.categories = {ci.category};
    q.counts = {ci.count};
    q.queried_count = m;
    q.gold = GoldAnswer::of_yes_no(m == ci.count);
    assign_id(q);
    out.push_back(std::move(q));
  }
  return out;
}

enum class CompareStyle { I, II };

struct PairingConfig {
  int max_pairs_per_image = 3;

  void validate() const {
    if (max_pairs_per_image < 1) throw ConfigError("max_pairs_per_image must be >= 1");
  }
};

namespace detail {

struct ImageGroup {
  std::int64_t image_id = 0;
  std::string image_ref;
  std::vector<std::pair<std::string, int>> present;  // sorted by category
};

inline std::vector<ImageGroup> group_by_image(std::span<const CountInstance> d) {
  std::map<std::int64_t, ImageGroup> groups;
  for (const auto& ci : d) {
    auto& g = groups[ci.image_id];
    g.image_id = ci.image_id;
    g.image_ref = ci.image_ref;
    if (ci.count >= 1) g.present.emplace_back(ci.category, ci.count);
  }
  std::vector<ImageGroup> out;
  for (auto& [_, g] : groups) {
    std::sort(g.present.begin(), g.present.end());
    g.present.erase(std::unique(g.present.begin(), g.present.end(),
                                [](const auto& a, const auto& b) { return a.first == b.first; }),
                    g.present.end());
    out.push_back(std::move(g));
  }
  return out;
}

/// All unordered index pairs (i < j) over `n` categories.
inline std::vector<std::pair<std::size_t, std::size_t>> all_pairs(std::size_t n) {
  std::vector<std::pair<std::size_t, std::size_t>> out;
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) out.emplace_back(i, j);
  }
  return out;
}

}  // namespace detail

inline QuestionRecord make_compare_record(CompareStyle style, std::int64_t image_id,
                                          const std::string& image_ref, const std::string& first,
                                          int n_first, const std::string& second, int n_second,
                                          const std::string& flip_group, bool flipped) {
  QuestionRecord q;
  q.family = style == CompareStyle::I ? Family::compare_I : Family::compare_II;
  q.image_id = image_id;
  q.image_ref = image_ref;
  q.categories = {first, second};
  q.counts = {n_first, n_second};
  q.flip_group = flip_group;
  q.flipped = flipped;
  const Verdict v = verdict_for(n_first, n_second);
  if (style == CompareStyle::I) {
    q.prompt = compare_free_prompt(first, second);
    q.gold = GoldAnswer::of_verdict(v);
  } else {
    q.prompt = compare_option_prompt(first, second);
    q.gold = GoldAnswer::of_option(option_for(v));
  }
  assign_id(q);
  return q;
}

/// Pairs of categories present on the same image, at most
/// `pairing.max_pairs_per_image` per image (seed-selected when more exist).
/// Every pair yields the record in alphabetical order followed by its
/// flipped twin.
inline std::vector<QuestionRecord> gen_compare(std::span<const CountInstance> d, CompareStyle style,
                                               const PairingConfig& pairing, std::uint64_t seed) {
  pairing.validate();
  const std::string_view tag = style == CompareStyle::I ? "compare_I" : "compare_II";
  std::vector<QuestionRecord> out;
  for (const auto& g : detail::group_by_image(d)) {
    if (g.present.size() < 2) continue;
    auto pairs = detail::all_pairs(g.present.size());
    const auto cap = static_cast<std::size_t>(pairing.max_pairs_per_image);
    if (pairs.size() > cap) {
      Rng rng(derive_seed(seed, "pairs/" + g.image_ref));
      rng.shuffle(std::span(pairs));
      pairs.resize(cap);
      std::sort(pairs.begin(), pairs.end());
    }
    for (const auto& [i, j] : pairs) {
      const auto& [c1, n1] = g.present[i];
      const auto& [c2, n2] = g.present[j];
      const std::string group =
          "fg-" + sha256_hex(json::array({tag, g.image_ref, c1, c2}).dump()).substr(0, 16);
      out.push_back(make_compare_record(style, g.image_id, g.image_ref, c1, n1, c2, n2, group, false));
      out.push_back(make_compare_record(style, g.image_id, g.image_ref, c2, n2, c1, n1, group, true));
    }
  }
  return out;
}

// ---------------------------------------------------------------------------
// Serialization

inline constexpr std::string_view kQuestionSchema = "qr/1";

inline json to_json(const QuestionRecord& q) {
  return json{{"schema", kQuestionSchema},
              {"question_id", q.question_id},
              {"family", to_string(q.family)},
              {"image_id", q.image_id},
              {"image_ref", q.image_ref},
              {"prompt", q.prompt},
              {"categories", q.categories},
              {"counts", q.counts},
              {"queried_count", q.queried_count ? json(*q.queried_count) : json(nullptr)},
              {"flip_group", q.flip_group ? json(*q.flip_group) : json(nullptr)},
              {"flipped", q.flipped},
              {"gold", to_json(q.gold)}};
}

inline QuestionRecord question_from_json(const json& j, const std::string& where) {
  require_schema(j, kQuestionSchema, where);
  QuestionRecord q;
  try {
    q.question_id = j.at("question_id").get<std::string>();
    q.family = family_from_string(j.at("family").get<std::string>());
    q.image_id = j.at("image_id").get<std::int64_t>();
    q.image_ref = j.at("image_ref").get<std::string>();
    q.prompt = j.at("prompt").get<std::string>();
    q.categories = j.at("categories").get<std::vector<std::string>>();
    q.counts = j.at("counts").get<std::vector<int>>();
    if (const auto& m = j.at("queried_count"); !m.is_null()) q.queried_count = m.get<int>();
    if (const auto& f = j.at("flip_group"); !f.is_null()) q.flip_group = f.get<std::string>();
    q.flipped = j.value("flipped", false);
    q.gold = gold_from_json(j.at("gold"));
  } catch (const json::exception& e) {
    throw DataError(where + ": " + e.what());
  }
  validate(q);
  return q;
}

inline void write_questions(const std::filesystem::path& path, std::span<const QuestionRecord> qs) {
  AtomicFile f(path);
  for (const auto& q : qs) f.write_line(to_json(q));
  f.commit();
}

inline std::vector<QuestionRecord> read_questions(const std::filesystem::path& path) {
  std::vector<QuestionRecord> out;
  for_each_jsonl(path, [&](const json& obj, std::size_t line) {
    out.push_back(question_from_json(obj, path.string() + ":" + std::to_string(line)));
  });
  return out;
}

}  // namespace countvqa
