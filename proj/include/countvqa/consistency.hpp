#pragma once

// Inner consistency: agreement of answers within one question family
// (assenting to two different counts, or changing the comparison verdict
// when the category order is flipped).
// Outer consistency: agreement of a family's answers with the model's own
// answers to the direct counting question.

#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <tuple>
#include <unordered_map>
#include <vector>

#include "countvqa/jsonl.hpp"
#include "countvqa/metrics.hpp"
#include "countvqa/question_gen.hpp"
#include "countvqa/response_parse.hpp"

namespace countvqa {

/// A rate with the counts behind it. Items that could not be scored are
/// never dropped silently: each exclusion reason has its own counter.
struct RateResult {
  std::size_t numerator = 0;
  std::size_t denominator = 0;
  std::size_t excluded_unparseable = 0;
  std::size_t excluded_not_applicable = 0;  // e.g. both claims equal
  std::size_t unpaired = 0;                 // partner question or answer missing

  bool defined() const { return denominator > 0; }
  double rate() const {
    return denominator > 0 ? static_cast<double>(numerator) / static_cast<double>(denominator) : 0.0;
  }

  RateResult& operator+=(const RateResult& o) {
    numerator += o.numerator;
    denominator += o.denominator;
    excluded_unparseable += o.excluded_unparseable;
    excluded_not_applicable += o.excluded_not_applicable;
    unpaired += o.unpaired;
    return *this;
  }
};

struct BinaryPairItem {
  int claimed_truth = 0;        // n in setting I (ground truth)
  int claimed_own_answer = 0;   // n in setting II (model's primal answer)
  std::optional<bool> answer_truth;
  std::optional<bool> answer_own;
};

/// Share of pairs with different claims where the model said yes to both.
inline RateResult binary_inner(std::span<const BinaryPairItem> items) {
  RateResult r;
  for (const auto& it : items) {
    if (it.claimed_truth == it.claimed_own_answer) {
      ++r.excluded_not_applicable;
      continue;
    }
    if (!it.answer_truth || !it.answer_own) {
      ++r.excluded_unparseable;
      continue;
    }
    ++r.denominator;
    if (*it.answer_truth && *it.answer_own) ++r.numerator;
  }
  return r;
}

/// Share of "no" answers to claims that restate the model's own count.
inline RateResult binary_outer(std::span<const std::optional<bool>> own_claim_answers) {
  RateResult r;
  for (const auto& a : own_claim_answers) {
    if (!a) {
      ++r.excluded_unparseable;
      continue;
    }
    ++r.denominator;
    if (!*a) ++r.numerator;
  }
  return r;
}

/// Verdicts of a flip group, each relative to its own record's category order.
struct FlipPairItem {
  std::optional<Verdict> original;
  std::optional<Verdict> flipped;
};

/// Express a verdict given for the flipped order in the original order.
inline Verdict normalize_flipped(Verdict v) { return mirror(v); }

/// Share of flip pairs whose normalized verdicts disagree.
inline RateResult compare_inner(std::span<const FlipPairItem> pairs) {
  RateResult r;
  for (const auto& p : pairs) {
    if (!p.original || !p.flipped) {
      ++r.excluded_unparseable;
      continue;
    }
    ++r.denominator;
    if (*p.original != normalize_flipped(*p.flipped)) ++r.numerator;
  }
  return r;
}

struct CompareOuterItem {
  std::optional<int> own_count_first;
  std::optional<int> own_count_second;
  std::optional<Verdict> verdict;  // in the same order as the counts
};

/// Share of comparison verdicts that agree with the order implied by the
/// model's own two counts. Note this is a consistency rate, not an
/// inconsistency rate.
inline RateResult compare_outer(std::span<const CompareOuterItem> items) {
  RateResult r;
  for (const auto& it : items) {
    if (!it.own_count_first || !it.own_count_second) {
      ++r.unpaired;
      continue;
    }
    if (!it.verdict) {
      ++r.excluded_unparseable;
      continue;
    }
    ++r.denominator;
    if (*it.verdict == verdict_for(*it.own_count_first, *it.own_count_second)) ++r.numerator;
  }
  return r;
}

// ---------------------------------------------------------------------------
// Joining questions and answers

struct ConsistencyReport {
  RateResult binary_inner;
  RateResult binary_outer;
  RateResult compare_inner_I;
  RateResult compare_inner_II;
  RateResult compare_outer_I;
  RateResult compare_outer_II;

  RateResult compare_outer_pooled() const {
    RateResult r = compare_outer_I;
    r += compare_outer_II;
    return r;
  }
};

using AnswerIndex = std::unordered_map<std::string, ParsedAnswer>;

namespace detail {

inline const ParsedAnswer* find_answer(const AnswerIndex& answers, const std::string& id) {
  auto it = answers.find(id);
  return it == answers.end() ? nullptr : &it->second;
}

inline std::optional<bool> yes_no_of(const ParsedAnswer* a) {
  if (!a || !a->ok() || a->value->kind != GoldAnswer::Kind::yes_no) return std::nullopt;
  return a->value->yes_no;
}

inline std::optional<int> number_of(const ParsedAnswer* a) {
  if (!a || !a->ok() || a->value->kind != GoldAnswer::Kind::number) return std::nullopt;
  return a->value->number;
}

inline std::optional<Verdict> verdict_of(const ParsedAnswer* a) {
  if (!a || !a->ok()) return std::nullopt;
  if (a->value->kind == GoldAnswer::Kind::verdict) return a->value->verdict;
  if (a->value->kind == GoldAnswer::Kind::option) return verdict_for(*a->value->option);
  return std::nullopt;
}

using InstanceKey = std::pair<std::string, std::string>;  // (image_ref, category)

}  // namespace detail

/// Computes every consistency rate that the given questions support.
/// Questions without an answer count as unparseable.
inline ConsistencyReport analyze_consistency(std::span<const QuestionRecord> questions,
                                             const AnswerIndex& answers) {
  ConsistencyReport rep;

  std::map<detail::InstanceKey, std::optional<int>> primal;
  std::map<detail::InstanceKey, const QuestionRecord*> bin_truth, bin_own;
  std::map<std::string, std::pair<const QuestionRecord*, const QuestionRecord*>> flips;
  std::vector<const QuestionRecord*> compares;

  for (const auto& q : questions) {
    switch (q.family) {
      case Family::primal:
        primal[{q.image_ref, q.categories.at(0)}] = detail::number_of(detail::find_answer(answers, q.question_id));
        break;
      case Family::binary_I: bin_truth[{q.image_ref, q.categories.at(0)}] = &q; break;
      case Family::binary_II: bin_own[{q.image_ref, q.categories.at(0)}] = &q; break;
      case Family::compare_I:
      case Family::compare_II: {
        auto& slot = flips[*q.flip_group];
        (q.flipped ? slot.second : slot.first) = &q;
        compares.push_back(&q);
        break;
      }
      default: break;
    }
  }

  // Binary, inner: setting I vs setting II on the same instance.
  std::vector<BinaryPairItem> pairs;
  std::size_t unpaired = 0;
  for (const auto& [key, qt] : bin_truth) {
    auto it = bin_own.find(key);
    if (it == bin_own.end()) {
      ++unpaired;
      continue;
    }
    pairs.push_back({*qt->queried_count, *it->second->queried_count,
                     detail::yes_no_of(detail::find_answer(answers, qt->question_id)),
                     detail::yes_no_of(detail::find_answer(answers, it->second->question_id))});
  }
  for (const auto& [key, _] : bin_own) {
    if (!bin_truth.contains(key)) ++unpaired;
  }
  rep.binary_inner = binary_inner(pairs);
  rep.binary_inner.unpaired = unpaired;

  // Binary, outer: answers to the model's own count.
  std::vector<std::optional<bool>> own;
  for (const auto& [_, q] : bin_own) own.push_back(detail::yes_no_of(detail::find_answer(answers, q->question_id)));
  rep.binary_outer = binary_outer(own);

  // Comparison, inner: flip groups, per style.
  std::vector<FlipPairItem> flip_I, flip_II;
  std::size_t unpaired_I = 0, unpaired_II = 0;
  for (const auto& [_, slot] : flips) {
    const QuestionRecord* any = slot.first ? slot.first : slot.second;
    const bool style_I = any->family == Family::compare_I;
    if (!slot.first || !slot.second) {
      ++(style_I ? unpaired_I : unpaired_II);
      continue;
    }
    FlipPairItem item{detail::verdict_of(detail::find_answer(answers, slot.first->question_id)),
                      detail::verdict_of(detail::find_answer(answers, slot.second->question_id))};
    (style_I ? flip_I : flip_II).push_back(item);
  }
  rep.compare_inner_I = compare_inner(flip_I);
  rep.compare_inner_I.unpaired = unpaired_I;
  rep.compare_inner_II = compare_inner(flip_II);
  rep.compare_inner_II.unpaired = unpaired_II;

  // Comparison, outer: every comparison record against its own primal counts.
  std::vector<CompareOuterItem> outer_I, outer_II;
  for (const QuestionRecord* q : compares) {
    const auto lookup = [&](const std::string& cat) -> std::optional<int> {
      auto it = primal.find({q->image_ref, cat});
      return it == primal.end() ? std::nullopt : it->second;
    };
    CompareOuterItem item{lookup(q->categories[0]), lookup(q->categories[1]),
                          detail::verdict_of(detail::find_answer(answers, q->question_id))};
    (q->family == Family::compare_I ? outer_I : outer_II).push_back(item);
  }
  rep.compare_outer_I = compare_outer(outer_I);
  rep.compare_outer_II = compare_outer(outer_II);
  return rep;
}

// ---------------------------------------------------------------------------
// Output

inline json to_json(const RateResult& r) {
  return json{{"rate", round3(r.rate())},
              {"defined", r.defined()},
              {"numerator", r.numerator},
              {"denominator", r.denominator},
              {"excluded_unparseable", r.excluded_unparseable},
              {"excluded_not_applicable", r.excluded_not_applicable},
              {"unpaired", r.unpaired}};
}

inline json to_json(const ConsistencyReport& c) {
  return json{{"binary_inner_inconsistency", to_json(c.binary_inner)},
              {"binary_outer_inconsistency", to_json(c.binary_outer)},
              {"compare_inner_inconsistency", {{"I", to_json(c.compare_inner_I)}, {"II", to_json(c.compare_inner_II)}}},
              {"compare_outer_consistency",
               {{"I", to_json(c.compare_outer_I)},
                {"II", to_json(c.compare_outer_II)},
                {"pooled", to_json(c.compare_outer_pooled())}}}};
}

inline std::string to_markdown(const ConsistencyReport& c) {
  std::ostringstream md;
  md << "| Measure | Rate | Numerator | Evaluable | Excluded (unparseable) | Excluded (n/a) | Unpaired |\n"
     << "|---|---|---|---|---|---|---|\n";
  const auto row = [&](const char* name, const RateResult& r) {
    md << "| " << name << " | " << (r.defined() ? fmt3(r.rate()) : std::string("undefined")) << " | "
       << r.numerator << " | " << r.denominator << " | " << r.excluded_unparseable << " | "
       << r.excluded_not_applicable << " | " << r.unpaired << " |\n";
  };
  row("Binary inner inconsistency (yes to both I and II)", c.binary_inner);
  row("Binary outer inconsistency (no to own count)", c.binary_outer);
  row("Comparison inner inconsistency, free form", c.compare_inner_I);
  row("Comparison inner inconsistency, options", c.compare_inner_II);
  row("Comparison outer consistency, free form", c.compare_outer_I);
  row("Comparison outer consistency, options", c.compare_outer_II);
  row("Comparison outer consistency, pooled", c.compare_outer_pooled());
  return md.str();
}

}  // namespace countvqa
