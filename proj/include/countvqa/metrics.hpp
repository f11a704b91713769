#pragma once

#include <cmath>
#include <cstdio>
#include <map>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include "countvqa/errors.hpp"
#include "countvqa/jsonl.hpp"
#include "countvqa/response_parse.hpp"

namespace countvqa {

/// Count classes for F-scores: "1".."9", and "10+" for everything from 10 up.
inline std::string bucket_class(int n) {
  if (n < 1) throw std::invalid_argument("bucket_class: count must be >= 1, got " + std::to_string(n));
  return n >= 10 ? "10+" : std::to_string(n);
}

/// Class of a predicted count. A prediction of 0 gets its own class, which
/// never has gold support.
inline std::string predicted_class(int n) { return n < 1 ? "0" : bucket_class(n); }

/// Orders "1" < "2" < ... < "9" < "10+" and falls back to plain string order.
struct ClassLabelLess {
  bool operator()(const std::string& a, const std::string& b) const {
    const bool da = !a.empty() && detail::is_digit(a[0]);
    const bool db = !b.empty() && detail::is_digit(b[0]);
    if (da && db) {
      const int na = std::stoi(a);
      const int nb = std::stoi(b);
      if (na != nb) return na < nb;
    } else if (da != db) {
      return da;
    }
    return a < b;
  }
};

struct ClassScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  std::size_t support = 0;    // gold occurrences
  std::size_t predicted = 0;  // parsed predictions of this class
};

struct EvalReport {
  double macro_f1 = 0.0;
  double weighted_f1 = 0.0;
  std::optional<double> mae;  // counting only
  double accuracy = 0.0;
  std::optional<double> yes_ratio;  // binary only
  std::map<std::string, ClassScore, ClassLabelLess> per_class;
  double unparseable_rate = 0.0;
  std::size_t n_questions = 0;
  std::size_t n_unparseable = 0;
};

/// Per-class precision/recall/F1 with unparseable predictions (nullopt)
/// acting as a sink class: they add a false negative to their gold class and
/// nothing else. Macro-F1 averages over classes with gold support only.
inline EvalReport score_labels(std::span<const std::string> gold,
                               std::span<const std::optional<std::string>> pred) {
  if (gold.size() != pred.size()) {
    throw std::invalid_argument("gold/prediction length mismatch: " + std::to_string(gold.size()) +
                                " vs " + std::to_string(pred.size()));
  }
  EvalReport r;
  r.n_questions = gold.size();
  struct Counts {
    std::size_t tp = 0, fp = 0, fn = 0, support = 0, predicted = 0;
  };
  std::map<std::string, Counts, ClassLabelLess> counts;
  std::size_t correct = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    auto& g = counts[gold[i]];
    ++g.support;
    if (!pred[i]) {
      ++r.n_unparseable;
      ++g.fn;
      continue;
    }
    auto& p = counts[*pred[i]];
    ++p.predicted;
    if (*pred[i] == gold[i]) {
      ++p.tp;
      ++correct;
    } else {
      ++p.fp;
      ++counts[gold[i]].fn;
    }
  }

  double macro_sum = 0.0;
  double weighted_sum = 0.0;
  std::size_t support_classes = 0;
  for (const auto& [label, c] : counts) {
    ClassScore s;
    s.support = c.support;
    s.predicted = c.predicted;
    s.precision = c.tp + c.fp > 0 ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fp) : 0.0;
    s.recall = c.tp + c.fn > 0 ? static_cast<double>(c.tp) / static_cast<double>(c.tp + c.fn) : 0.0;
    s.f1 = s.precision + s.recall > 0 ? 2.0 * s.precision * s.recall / (s.precision + s.recall) : 0.0;
    if (c.support > 0) {
      macro_sum += s.f1;
      weighted_sum += s.f1 * static_cast<double>(c.support);
      ++support_classes;
    }
    r.per_class.emplace(label, s);
  }
  if (!gold.empty()) {
    const auto n = static_cast<double>(gold.size());
    r.macro_f1 = macro_sum / static_cast<double>(support_classes);
    r.weighted_f1 = weighted_sum / n;
    r.accuracy = static_cast<double>(correct) / n;
    r.unparseable_rate = static_cast<double>(r.n_unparseable) / n;
  }
  return r;
}

namespace detail {

template <typename Pred>
void require_same_length(std::size_t gold, std::span<const Pred> pred) {
  if (gold != pred.size()) {
    throw std::invalid_argument("gold/prediction length mismatch: " + std::to_string(gold) + " vs " +
                                std::to_string(pred.size()));
  }
}

}  // namespace detail

/// Counting evaluation. F-scores use bucketed classes; MAE uses the raw
/// numbers of parsed predictions only.
inline EvalReport eval_counting(std::span<const int> gold, std::span<const ParsedAnswer> pred) {
  detail::require_same_length(gold.size(), pred);
  std::vector<std::string> gold_labels;
  std::vector<std::optional<std::string>> pred_labels;
  gold_labels.reserve(gold.size());
  pred_labels.reserve(gold.size());
  double abs_err = 0.0;
  std::size_t n_mae = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    gold_labels.push_back(bucket_class(gold[i]));
    const auto& v = pred[i].value;
    if (pred[i].ok() && v && v->kind == GoldAnswer::Kind::number) {
      pred_labels.emplace_back(predicted_class(*v->number));
      abs_err += std::abs(static_cast<double>(*v->number) - static_cast<double>(gold[i]));
      ++n_mae;
    } else {
      pred_labels.emplace_back(std::nullopt);
    }
  }
  EvalReport r = score_labels(gold_labels, pred_labels);
  r.mae = n_mae > 0 ? abs_err / static_cast<double>(n_mae) : 0.0;
  return r;
}

inline EvalReport eval_binary(const std::vector<bool>& gold, std::span<const ParsedAnswer> pred) {
  detail::require_same_length(gold.size(), pred);
  std::vector<std::string> gold_labels;
  std::vector<std::optional<std::string>> pred_labels;
  std::size_t yes = 0;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    gold_labels.emplace_back(gold[i] ? "yes" : "no");
    const auto& v = pred[i].value;
    if (pred[i].ok() && v && v->kind == GoldAnswer::Kind::yes_no) {
      pred_labels.emplace_back(*v->yes_no ? "yes" : "no");
      if (*v->yes_no) ++yes;
    } else {
      pred_labels.emplace_back(std::nullopt);
    }
  }
  EvalReport r = score_labels(gold_labels, pred_labels);
  r.yes_ratio = gold.empty() ? 0.0 : static_cast<double>(yes) / static_cast<double>(gold.size());
  return r;
}

namespace detail {

inline std::optional<std::string> choice_label(const GoldAnswer& g) {
  if (g.kind == GoldAnswer::Kind::verdict) return std::string(to_string(*g.verdict));
  if (g.kind == GoldAnswer::Kind::option) return std::string(to_string(*g.option));
  return std::nullopt;
}

}  // namespace detail

/// Comparison evaluation over verdicts (free form) or options (A/B/C).
inline EvalReport eval_compare(std::span<const GoldAnswer> gold, std::span<const ParsedAnswer> pred) {
  detail::require_same_length(gold.size(), pred);
  std::vector<std::string> gold_labels;
  std::vector<std::optional<std::string>> pred_labels;
  for (std::size_t i = 0; i < gold.size(); ++i) {
    auto g = detail::choice_label(gold[i]);
    if (!g) throw DataError("comparison gold must be a verdict or an option");
    gold_labels.push_back(*g);
    if (pred[i].ok() && pred[i].value && pred[i].value->kind == gold[i].kind) {
      pred_labels.push_back(detail::choice_label(*pred[i].value));
    } else {
      pred_labels.emplace_back(std::nullopt);
    }
  }
  return score_labels(gold_labels, pred_labels);
}

// ---------------------------------------------------------------------------
// Serialization. Values are rounded to 3 decimals on output only.

inline double round3(double x) { return std::round(x * 1000.0) / 1000.0; }

inline json to_json(const EvalReport& r) {
  json per_class = json::array();
  for (const auto& [label, s] : r.per_class) {
    per_class.push_back({{"class", label},
                         {"precision", round3(s.precision)},
                         {"recall", round3(s.recall)},
                         {"f1", round3(s.f1)},
                         {"support", s.support},
                         {"predicted", s.predicted}});
  }
  json j{{"macro_f1", round3(r.macro_f1)},
         {"weighted_f1", round3(r.weighted_f1)},
         {"mae", r.mae ? json(round3(*r.mae)) : json(nullptr)},
         {"accuracy", round3(r.accuracy)},
         {"yes_ratio", r.yes_ratio ? json(round3(*r.yes_ratio)) : json(nullptr)},
         {"unparseable_rate", round3(r.unparseable_rate)},
         {"n_questions", r.n_questions},
         {"n_unparseable", r.n_unparseable},
         {"per_class", std::move(per_class)}};
  return j;
}

inline std::string fmt3(double x) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.3f", round3(x));
  return buf;
}

/// Counting scores in the column order model, macro_f1, weighted_f1, mae.
inline std::string counting_csv(const std::string& model, const EvalReport& r) {
  return "model,macro_f1,weighted_f1,mae\n" + model + "," + fmt3(r.macro_f1) + "," + fmt3(r.weighted_f1) +
         "," + (r.mae ? fmt3(*r.mae) : std::string()) + "\n";
}

}  // namespace countvqa
