#pragma once

// Raw model text -> semantic answers. Every parser is total: text that does
// not carry a usable answer maps to std::nullopt ("unparseable"), never to an
// exception.

#include <array>
#include <cctype>
#include <charconv>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "countvqa/question_gen.hpp"
#include "countvqa/templates.hpp"

namespace countvqa {

enum class ParseStatus { parsed, unparseable };

struct ParsedAnswer {
  std::string question_id;
  ParseStatus status = ParseStatus::unparseable;
  std::optional<GoldAnswer> value;

  bool ok() const { return status == ParseStatus::parsed; }
};

namespace detail {

inline constexpr std::array<std::string_view, 21> kNumberWords{
    "zero", "one",    "two",    "three",    "four",     "five",    "six",
    "seven", "eight", "nine",   "ten",      "eleven",   "twelve",  "thirteen",
    "fourteen", "fifteen", "sixteen", "seventeen", "eighteen", "nineteen", "twenty"};

inline bool is_digit(char c) { return c >= '0' && c <= '9'; }
inline bool is_alnum(char c) { return std::isalnum(static_cast<unsigned char>(c)) != 0; }

/// Lower-cased alphanumeric tokens; everything else separates.
inline std::vector<std::string> tokens(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (is_alnum(c)) {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

/// Alphabetic-only tokens, so "4dogs" yields "dogs".
inline std::vector<std::string> words(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (std::isalpha(static_cast<unsigned char>(c))) {
      cur.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
    } else if (!cur.empty()) {
      out.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) out.push_back(std::move(cur));
  return out;
}

/// Every maximal digit run, in order. Runs that overflow int are skipped.
inline std::vector<int> digit_runs(std::string_view s) {
  std::vector<int> out;
  std::size_t i = 0;
  while (i < s.size()) {
    if (!is_digit(s[i])) {
      ++i;
      continue;
    }
    std::size_t j = i;
    while (j < s.size() && is_digit(s[j])) ++j;
    int v = 0;
    auto [ptr, ec] = std::from_chars(s.data() + i, s.data() + j, v);
    if (ec == std::errc{}) out.push_back(v);
    i = j;
  }
  return out;
}

inline bool starts_with_tokens(const std::vector<std::string>& toks, std::size_t at,
                               const std::vector<std::string>& phrase) {
  if (phrase.empty() || at + phrase.size() > toks.size()) return false;
  for (std::size_t k = 0; k < phrase.size(); ++k) {
    if (toks[at + k] != phrase[k]) return false;
  }
  return true;
}

}  // namespace detail

/// First integer literal; failing that, the first number word zero..twenty.
inline std::optional<int> parse_number(std::string_view raw) {
  if (auto runs = detail::digit_runs(raw); !runs.empty()) return runs.front();
  for (const auto& w : detail::words(raw)) {
    for (std::size_t n = 0; n < detail::kNumberWords.size(); ++n) {
      if (w == detail::kNumberWords[n]) return static_cast<int>(n);
    }
  }
  return std::nullopt;
}

inline std::optional<bool> parse_yes_no(std::string_view raw) {
  const auto w = detail::words(raw);
  if (w.empty()) return std::nullopt;
  if (w.front() == "yes") return true;
  if (w.front() == "no") return false;
  return std::nullopt;
}

/// Leading "A"/"B"/"C", optionally introduced by "option" or "answer".
inline std::optional<Option> parse_option(std::string_view raw) {
  const auto t = detail::tokens(raw);
  std::size_t at = 0;
  while (at < t.size() && (t[at] == "option" || t[at] == "answer")) ++at;
  if (at >= t.size()) return std::nullopt;
  if (t[at] == "a") return Option::A;
  if (t[at] == "b") return Option::B;
  if (t[at] == "c") return Option::C;
  return std::nullopt;
}

/// Free-form comparison answer, relative to the prompt's category order.
/// A leading category name (singular or plural, optional "the") or
/// "same"/"equal" decides. Otherwise the answer must mention exactly one of
/// the candidates; mentioning both categories is unparseable.
inline std::optional<Verdict> parse_compare(std::string_view raw, std::string_view first,
                                            std::string_view second) {
  auto toks = detail::tokens(raw);
  if (toks.empty()) return std::nullopt;

  struct Candidate {
    std::vector<std::string> phrase;
    Verdict verdict;
  };
  std::vector<Candidate> cands;
  for (auto [name, v] : {std::pair{first, Verdict::first_greater},
                         std::pair{second, Verdict::second_greater}}) {
    cands.push_back({detail::tokens(name), v});
    cands.push_back({detail::tokens(pluralize(name)), v});
  }
  cands.push_back({{"same"}, Verdict::same});
  cands.push_back({{"equal"}, Verdict::same});
  // Longer phrases first so "teddy bear" is not read as "bear".
  std::stable_sort(cands.begin(), cands.end(),
                   [](const Candidate& a, const Candidate& b) { return a.phrase.size() > b.phrase.size(); });

  std::size_t lead = 0;
  if (toks.size() > 1 && toks[0] == "the") lead = 1;
  for (const auto& c : cands) {
    if (detail::starts_with_tokens(toks, lead, c.phrase)) return c.verdict;
  }

  std::array<bool, 3> seen{};
  for (const auto& c : cands) {
    for (std::size_t i = 0; i < toks.size(); ++i) {
      if (detail::starts_with_tokens(toks, i, c.phrase)) {
        seen[static_cast<std::size_t>(c.verdict)] = true;
        for (std::size_t k = 0; k < c.phrase.size(); ++k) toks[i + k].clear();
      }
    }
  }
  int hits = 0;
  std::optional<Verdict> found;
  for (std::size_t v = 0; v < seen.size(); ++v) {
    if (seen[v]) {
      ++hits;
      found = static_cast<Verdict>(v);
    }
  }
  if (hits != 1) return std::nullopt;
  return found;
}

/// All integer literals in order (used for the counts that close training
/// answers).
inline std::vector<int> parse_numbers(std::string_view raw) { return detail::digit_runs(raw); }

namespace detail {

inline std::optional<GoldAnswer> parse_training_answer(const QuestionRecord& q, std::string_view raw) {
  switch (q.family) {
    case Family::train_direct: {
      auto n = parse_number(raw);
      if (!n) return std::nullopt;
      return GoldAnswer::of_compound({GoldAnswer::of_number(*n)});
    }
    case Family::train_cons_I: {
      auto yn = parse_yes_no(raw);
      auto nums = parse_numbers(raw);
      if (!yn || nums.empty()) return std::nullopt;
      return GoldAnswer::of_compound({GoldAnswer::of_yes_no(*yn), GoldAnswer::of_number(nums.back())});
    }
    case Family::train_cons_II: {
      if (q.categories.size() != 2) return std::nullopt;
      const auto stop = raw.find('.');
      const auto head = raw.substr(0, stop);
      std::optional<Verdict> v;
      if (head.find("are the same") != std::string_view::npos) {
        v = Verdict::same;
      } else {
        v = parse_compare(head, q.categories[0], q.categories[1]);
      }
      auto nums = parse_numbers(stop == std::string_view::npos ? std::string_view{} : raw.substr(stop));
      if (!v || nums.size() < 2) return std::nullopt;
      return GoldAnswer::of_compound({GoldAnswer::of_verdict(*v),
                                      GoldAnswer::of_number(nums[nums.size() - 2]),
                                      GoldAnswer::of_number(nums.back())});
    }
    default:
      return std::nullopt;
  }
}

}  // namespace detail

/// Parses `raw` according to the family of `q`.
inline ParsedAnswer parse_response(const QuestionRecord& q, std::string_view raw) {
  std::optional<GoldAnswer> value;
  switch (q.family) {
    case Family::primal:
      if (auto n = parse_number(raw)) value = GoldAnswer::of_number(*n);
      break;
    case Family::binary_I:
    case Family::binary_II:
    case Family::binary_III:
      if (auto b = parse_yes_no(raw)) value = GoldAnswer::of_yes_no(*b);
      break;
    case Family::compare_I:
      if (q.categories.size() == 2) {
        if (auto v = parse_compare(raw, q.categories[0], q.categories[1])) value = GoldAnswer::of_verdict(*v);
      }
      break;
    case Family::compare_II:
      if (auto o = parse_option(raw)) value = GoldAnswer::of_option(*o);
      break;
    case Family::train_direct:
    case Family::train_cons_I:
    case Family::train_cons_II:
      value = detail::parse_training_answer(q, raw);
      break;
  }
  ParsedAnswer p;
  p.question_id = q.question_id;
  p.status = value ? ParseStatus::parsed : ParseStatus::unparseable;
  p.value = std::move(value);
  return p;
}

/// Shortest text that states `q.gold`: "4", "Yes", a category name or "same",
/// "B", or the full training answer for compound golds.
inline std::string render_answer(const QuestionRecord& q, const GoldAnswer& g) {
  switch (g.kind) {
    case GoldAnswer::Kind::number: return std::to_string(*g.number);
    case GoldAnswer::Kind::yes_no: return *g.yes_no ? "Yes" : "No";
    case GoldAnswer::Kind::verdict:
      switch (*g.verdict) {
        case Verdict::first_greater: return q.categories.at(0);
        case Verdict::second_greater: return q.categories.at(1);
        case Verdict::same: return "same";
      }
      break;
    case GoldAnswer::Kind::option: return std::string(to_string(*g.option));
    case GoldAnswer::Kind::compound: {
      const auto& parts = *g.compound;
      if (q.family == Family::train_direct) return std::to_string(*parts.at(0).number);
      if (q.family == Family::train_cons_I) {
        return train_claim_answer(*parts.at(0).yes_no, *parts.at(1).number);
      }
      if (q.family == Family::train_cons_II) {
        return train_compare_answer(q.categories.at(0), *parts.at(1).number, q.categories.at(1),
                                    *parts.at(2).number);
      }
      break;
    }
  }
  throw DataError("cannot render gold answer for question " + q.question_id);
}

inline std::string render_answer(const QuestionRecord& q) { return render_answer(q, q.gold); }

/// True when a parsed value states the gold answer. Counting compares raw
/// numbers; callers that bucket do so themselves.
inline bool answer_matches(const GoldAnswer& gold, const std::optional<GoldAnswer>& value) {
  return value && *value == gold;
}

}  // namespace countvqa
