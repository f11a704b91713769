#pragma once

// Joins questions with responses and produces the per-family scores and the
// consistency rates.

#include <map>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "countvqa/consistency.hpp"
#include "countvqa/metrics.hpp"
#include "countvqa/model_adapter.hpp"
#include "countvqa/question_gen.hpp"
#include "countvqa/response_parse.hpp"

namespace countvqa {

struct AnalysisResult {
  std::map<Family, EvalReport> by_family;
  ConsistencyReport consistency;
  std::size_t missing_responses = 0;
};

inline AnswerIndex parse_all(std::span<const QuestionRecord> questions, std::span<const ResponseRecord> responses) {
  std::unordered_map<std::string, const ResponseRecord*> by_id;
  for (const auto& r : responses) by_id[r.question_id] = &r;
  AnswerIndex out;
  for (const auto& q : questions) {
    auto it = by_id.find(q.question_id);
    if (it == by_id.end()) continue;
    out.emplace(q.question_id, parse_response(q, it->second->raw_text));
  }
  return out;
}

inline AnalysisResult analyze(std::span<const QuestionRecord> questions, std::span<const ResponseRecord> responses) {
  AnalysisResult res;
  const AnswerIndex answers = parse_all(questions, responses);

  struct Bucket {
    std::vector<int> counts;
    std::vector<bool> yes_no;
    std::vector<GoldAnswer> choices;
    std::vector<ParsedAnswer> parsed;
  };
  std::map<Family, Bucket> buckets;
  for (const auto& q : questions) {
    if (!is_binary(q.family) && !is_compare(q.family) && q.family != Family::primal) continue;
    auto& b = buckets[q.family];
    auto it = answers.find(q.question_id);
    if (it == answers.end()) {
      ++res.missing_responses;
      b.parsed.push_back(ParsedAnswer{q.question_id, ParseStatus::unparseable, std::nullopt});
    } else {
      b.parsed.push_back(it->second);
    }
    if (q.family == Family::primal) {
      b.counts.push_back(*q.gold.number);
    } else if (is_binary(q.family)) {
      b.yes_no.push_back(*q.gold.yes_no);
    } else {
      b.choices.push_back(q.gold);
    }
  }
  for (auto& [family, b] : buckets) {
    if (family == Family::primal) {
      res.by_family[family] = eval_counting(b.counts, b.parsed);
    } else if (is_binary(family)) {
      res.by_family[family] = eval_binary(b.yes_no, b.parsed);
    } else {
      res.by_family[family] = eval_compare(b.choices, b.parsed);
    }
  }
  res.consistency = analyze_consistency(questions, answers);
  return res;
}

inline json to_json(const AnalysisResult& a) {
  json families = json::object();
  for (const auto& [f, r] : a.by_family) families[std::string(to_string(f))] = to_json(r);
  return json{{"families", std::move(families)}, {"missing_responses", a.missing_responses}};
}

/// One row per family: accuracy, F-scores, MAE, yes ratio, unparseable rate.
inline std::string families_csv(const std::string& model, const AnalysisResult& a) {
  std::ostringstream csv;
  csv << "model,family,n_questions,accuracy,macro_f1,weighted_f1,mae,yes_ratio,unparseable_rate\n";
  for (const auto& [f, r] : a.by_family) {
    csv << model << ',' << to_string(f) << ',' << r.n_questions << ',' << fmt3(r.accuracy) << ','
        << fmt3(r.macro_f1) << ',' << fmt3(r.weighted_f1) << ',' << (r.mae ? fmt3(*r.mae) : "") << ','
        << (r.yes_ratio ? fmt3(*r.yes_ratio) : "") << ',' << fmt3(r.unparseable_rate) << '\n';
  }
  return csv.str();
}

inline std::string to_markdown(const std::string& model, const AnalysisResult& a) {
  std::ostringstream md;
  md << "# Evaluation report: " << model << "\n\n";
  if (auto it = a.by_family.find(Family::primal); it != a.by_family.end()) {
    const auto& r = it->second;
    md << "## Counting\n\n| Model | Macro-F1 | Weighted-F1 | MAE | Unparseable |\n|---|---|---|---|---|\n"
       << "| " << model << " | " << fmt3(r.macro_f1) << " | " << fmt3(r.weighted_f1) << " | "
       << (r.mae ? fmt3(*r.mae) : "-") << " | " << fmt3(r.unparseable_rate) << " |\n\n";
  }
  bool header = false;
  for (const auto& [f, r] : a.by_family) {
    if (!is_binary(f)) continue;
    if (!header) {
      md << "## Count claims (yes/no)\n\n| Setting | Accuracy | Yes ratio | Unparseable |\n|---|---|---|---|\n";
      header = true;
    }
    md << "| " << to_string(f) << " | " << fmt3(r.accuracy) << " | " << fmt3(r.yes_ratio.value_or(0)) << " | "
       << fmt3(r.unparseable_rate) << " |\n";
  }
  if (header) md << '\n';
  header = false;
  for (const auto& [f, r] : a.by_family) {
    if (!is_compare(f)) continue;
    if (!header) {
      md << "## Comparisons\n\n| Style | Accuracy | Unparseable |\n|---|---|---|\n";
      header = true;
    }
    md << "| " << to_string(f) << " | " << fmt3(r.accuracy) << " | " << fmt3(r.unparseable_rate) << " |\n";
  }
  if (header) md << '\n';
  md << "## Consistency\n\n" << to_markdown(a.consistency);
  if (a.missing_responses > 0) {
    md << "\n" << a.missing_responses << " question(s) had no response and were scored as unparseable.\n";
  }
  return md.str();
}

}  // namespace countvqa
