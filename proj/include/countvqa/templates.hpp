#pragma once

// Prompt and answer wording. Every string the benchmark sends to a model or
// writes into training data is produced here.

#include <algorithm>
#include <array>
#include <cctype>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "countvqa/rng.hpp"

namespace countvqa {

namespace detail {

struct Irregular {
  std::string_view singular;
  std::string_view plural;
};

// Keyed on the final word of a category name.
inline constexpr std::array<Irregular, 16> kIrregularPlurals{{
    {"person", "persons"},
    {"scissors", "scissors"},
    {"skis", "skis"},
    {"sheep", "sheep"},
    {"broccoli", "broccoli"},
    {"fish", "fish"},
    {"deer", "deer"},
    {"series", "series"},
    {"knife", "knives"},
    {"mouse", "mice"},
    {"man", "men"},
    {"woman", "women"},
    {"child", "children"},
    {"foot", "feet"},
    {"leaf", "leaves"},
    {"shelf", "shelves"},
}};

inline bool ends_with(std::string_view s, std::string_view suffix) {
  return s.size() >= suffix.size() && s.substr(s.size() - suffix.size()) == suffix;
}

inline bool is_vowel(char c) {
  c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return c == 'a' || c == 'e' || c == 'i' || c == 'o' || c == 'u';
}

inline std::string pluralize_word(std::string_view w) {
  for (const auto& irr : kIrregularPlurals) {
    if (w == irr.singular) return std::string(irr.plural);
  }
  if (ends_with(w, "s") || ends_with(w, "x") || ends_with(w, "z") || ends_with(w, "ch") ||
      ends_with(w, "sh")) {
    return std::string(w) + "es";
  }
  if (w.size() >= 2 && w.back() == 'y' && !is_vowel(w[w.size() - 2])) {
    return std::string(w.substr(0, w.size() - 1)) + "ies";
  }
  return std::string(w) + "s";
}

}  // namespace detail

/// English plural of a category name. Multi-word names inflect the last word
/// ("traffic light" -> "traffic lights").
inline std::string pluralize(std::string_view name) {
  const auto space = name.find_last_of(' ');
  if (space == std::string_view::npos) return detail::pluralize_word(name);
  return std::string(name.substr(0, space + 1)) + detail::pluralize_word(name.substr(space + 1));
}

/// "is 1 dog" / "are 3 dogs"
inline std::string count_phrase(int n, std::string_view category) {
  if (n == 1) return "is 1 " + std::string(category);
  return "are " + std::to_string(n) + " " + pluralize(category);
}

inline std::string primal_prompt(std::string_view category) {
  return "How many " + pluralize(category) + " are there in this picture? Answer in a single number.";
}

inline std::string count_claim(int n, std::string_view category) {
  return "There " + count_phrase(n, category) + " in this picture, is that correct?";
}

inline std::string binary_prompt(int n, std::string_view category) {
  return count_claim(n, category) + " Answer yes or no.";
}

inline std::string compare_free_prompt(std::string_view first, std::string_view second) {
  return "Which object has a larger number in this picture, " + std::string(first) + " or " +
         std::string(second) + "? If they have the same number, answer same.";
}

inline std::string compare_option_prompt(std::string_view first, std::string_view second) {
  const std::string a = pluralize(first);
  const std::string b = pluralize(second);
  return "Please select the correct option according to the given picture. A. There are more " + a +
         " than " + b + " in this picture. B. There are more " + b + " than " + a +
         " in this picture. C. The number of " + a + " and " + b + " are the same in this picture.";
}

inline std::string train_claim_prompt(int m, std::string_view category) {
  return count_claim(m, category) + " How many " + pluralize(category) + " are there in this picture?";
}

inline std::string train_claim_answer(bool claim_holds, int truth) {
  return std::string(claim_holds ? "Yes" : "No") + ". " + std::to_string(truth) + ".";
}

inline std::string train_compare_prompt(std::string_view first, std::string_view second) {
  return "Which object is more in this picture, " + std::string(first) + " or " + std::string(second) +
         "? How many " + pluralize(first) + " are there in this picture? How many " +
         pluralize(second) + " are there in this picture?";
}

inline std::string train_compare_answer(std::string_view first, int n_first, std::string_view second,
                                        int n_second) {
  std::string head;
  if (n_first == n_second) {
    head = "The number of " + std::string(first) + " and " + std::string(second) +
           " are the same in this picture";
  } else {
    head = std::string(n_first > n_second ? first : second);
  }
  return head + ". " + std::to_string(n_first) + ". " + std::to_string(n_second) + ".";
}

/// Candidate wrong counts for a claim about `truth` objects:
/// {max(1, truth - 3), ..., truth + 3} without truth itself.
inline std::vector<int> distractor_window(int truth) {
  std::vector<int> out;
  for (int n = std::max(1, truth - 3); n <= truth + 3; ++n) {
    if (n != truth) out.push_back(n);
  }
  return out;
}

inline int draw_distractor(Rng& rng, int truth) {
  const auto window = distractor_window(truth);
  return window[rng.uniform_below(window.size())];
}

/// Claimed count for the mixed setting: the truth with probability 1/2,
/// otherwise a uniform distractor.
inline int draw_claimed_count(Rng& rng, int truth) {
  return rng.coin() ? truth : draw_distractor(rng, truth);
}

}  // namespace countvqa
