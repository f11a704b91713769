#include <gtest/gtest.h>

#include <random>

#include "countvqa/response_parse.hpp"
#include "countvqa/train_gen.hpp"
#include "support/test_support.hpp"

namespace countvqa {
namespace {

QuestionRecord compare_record(Family f, const std::string& a, int na, const std::string& b, int nb) {
  return make_compare_record(f == Family::compare_I ? CompareStyle::I : CompareStyle::II, 1, "a.jpg", a, na, b,
                             nb, "fg-test", false);
}

TEST(ParseNumber, DocumentedExamples) {
  EXPECT_EQ(parse_number("3"), 3);
  EXPECT_EQ(parse_number("There are four dogs."), 4);
  EXPECT_EQ(parse_number("I cannot tell."), std::nullopt);
  EXPECT_EQ(parse_number("zero"), 0);
  EXPECT_EQ(parse_number("Twelve."), 12);
  EXPECT_EQ(parse_number(""), std::nullopt);
}

TEST(ParseNumber, DigitsBeatWords) {
  EXPECT_EQ(parse_number("I see two, no wait, 3 cats"), 3);
  EXPECT_EQ(parse_number("one of them: 7"), 7);
  EXPECT_EQ(parse_number("there are 12 birds"), 12);
}

TEST(ParseNumber, WordsAreWholeTokens) {
  EXPECT_EQ(parse_number("Someone is there"), std::nullopt);
  EXPECT_EQ(parse_number("often"), std::nullopt);
}

TEST(ParseYesNo, FirstDecisiveWord) {
  EXPECT_EQ(parse_yes_no("Yes, that is correct."), true);
  EXPECT_EQ(parse_yes_no("no"), false);
  EXPECT_EQ(parse_yes_no("  YES"), true);
  EXPECT_EQ(parse_yes_no("No, there are 3."), false);
  EXPECT_EQ(parse_yes_no("Maybe."), std::nullopt);
  EXPECT_EQ(parse_yes_no("Nothing to say"), std::nullopt);
  EXPECT_EQ(parse_yes_no("Yesterday"), std::nullopt);
}

TEST(ParseOption, LeadingLetter) {
  EXPECT_EQ(parse_option("B"), Option::B);
  EXPECT_EQ(parse_option("b."), Option::B);
  EXPECT_EQ(parse_option("A. There are more dogs"), Option::A);
  EXPECT_EQ(parse_option("Option C"), Option::C);
  EXPECT_EQ(parse_option("Answer: C"), Option::C);
  EXPECT_EQ(parse_option("D"), std::nullopt);
  EXPECT_EQ(parse_option("Apple"), std::nullopt);
  EXPECT_EQ(parse_option(""), std::nullopt);
}

TEST(ParseCompare, DocumentedExamples) {
  EXPECT_EQ(parse_compare("Dog", "backpack", "dog"), Verdict::second_greater);
  EXPECT_EQ(parse_compare("Backpack", "backpack", "dog"), Verdict::first_greater);
  EXPECT_EQ(parse_compare("same", "backpack", "dog"), Verdict::same);
  EXPECT_EQ(parse_compare("They are equal.", "backpack", "dog"), Verdict::same);
  EXPECT_EQ(parse_compare("There are more dogs.", "backpack", "dog"), Verdict::second_greater);
}

TEST(ParseCompare, LeadingMentionWins) {
  EXPECT_EQ(parse_compare("The dog, there are more dogs than backpacks", "backpack", "dog"),
            Verdict::second_greater);
}

TEST(ParseCompare, AmbiguousIsUnparseable) {
  EXPECT_EQ(parse_compare("More dogs than backpacks, I think", "backpack", "dog"), std::nullopt);
  EXPECT_EQ(parse_compare("I think backpacks or dogs", "backpack", "dog"), std::nullopt);
  EXPECT_EQ(parse_compare("I cannot tell.", "backpack", "dog"), std::nullopt);
}

TEST(ParseCompare, MultiWordNamesAreNotSplit) {
  EXPECT_EQ(parse_compare("teddy bear", "bear", "teddy bear"), Verdict::second_greater);
  EXPECT_EQ(parse_compare("bear", "bear", "teddy bear"), Verdict::first_greater);
  EXPECT_EQ(parse_compare("I count more teddy bears", "bear", "teddy bear"), Verdict::second_greater);
}

TEST(ParseResponse, DispatchesOnFamily) {
  const std::vector<CountInstance> d{{1, "a.jpg", "dog", 4}};
  const auto primal = gen_primal(d).at(0);
  EXPECT_EQ(parse_response(primal, "There are four dogs.").value, GoldAnswer::of_number(4));
  EXPECT_FALSE(parse_response(primal, "I cannot tell.").ok());
  EXPECT_EQ(parse_response(primal, "x").question_id, primal.question_id);

  const auto bin = gen_binary(d, BinarySetting::I, nullptr, 0).at(0);
  EXPECT_EQ(parse_response(bin, "Yes, that is correct.").value, GoldAnswer::of_yes_no(true));

  const auto c1 = compare_record(Family::compare_I, "backpack", 1, "dog", 2);
  EXPECT_EQ(parse_response(c1, "Dog").value, GoldAnswer::of_verdict(Verdict::second_greater));
  const auto c2 = compare_record(Family::compare_II, "dog", 1, "bicycle", 5);
  EXPECT_EQ(parse_response(c2, "B").value, GoldAnswer::of_option(Option::B));
}

TEST(ParseResponse, TotalOnArbitraryInput) {
  const auto d = testing::synthetic_instances(5, 5, 3, 5, 0.9);
  std::vector<QuestionRecord> qs = gen_primal(d);
  for (auto&& extra : {gen_binary(d, BinarySetting::I, nullptr, 0), gen_compare(d, CompareStyle::I, {}, 0),
                       gen_compare(d, CompareStyle::II, {}, 0), train_direct_records(d), train_claim_records(d, 0),
                       train_compare_records(d, 100, 0).records}) {
    qs.insert(qs.end(), extra.begin(), extra.end());
  }
  std::mt19937_64 gen(99);
  std::uniform_int_distribution<int> len(0, 40);
  std::uniform_int_distribution<int> byte(0, 255);
  const std::string vocab[] = {"yes", "no", "same", "A", "B", "C", "3", "four", "cat0", "cat1", ".", " ", "the"};
  for (int i = 0; i < 4000; ++i) {
    std::string s;
    const int n = len(gen);
    for (int j = 0; j < n; ++j) {
      if (i % 2 == 0) {
        s.push_back(static_cast<char>(byte(gen)));
      } else {
        s += vocab[static_cast<std::size_t>(byte(gen)) % std::size(vocab)];
        s.push_back(' ');
      }
    }
    for (const auto& q : qs) {
      ParsedAnswer p;
      ASSERT_NO_THROW(p = parse_response(q, s)) << s;
      EXPECT_EQ(p.ok(), p.value.has_value());
    }
  }
  // Huge digit runs must not overflow into an exception.
  EXPECT_NO_THROW(parse_number(std::string(500, '9')));
}

TEST(ParseResponse, OracleRenderingRoundTrips) {
  const auto d = testing::synthetic_instances(8, 40, 6, 14, 0.6);
  std::vector<QuestionRecord> qs = gen_primal(d);
  for (auto&& extra : {gen_binary(d, BinarySetting::III, nullptr, 3), gen_compare(d, CompareStyle::I, {}, 3),
                       gen_compare(d, CompareStyle::II, {}, 3), train_direct_records(d), train_claim_records(d, 3),
                       train_compare_records(d, 1000, 3).records}) {
    qs.insert(qs.end(), extra.begin(), extra.end());
  }
  ASSERT_GT(qs.size(), 200u);
  for (const auto& q : qs) {
    const auto text = render_answer(q);
    const auto p = parse_response(q, text);
    ASSERT_TRUE(p.ok()) << to_string(q.family) << ": " << text;
    EXPECT_TRUE(answer_matches(q.gold, p.value)) << to_string(q.family) << ": " << text;
  }
}

TEST(ParseTraining, DocumentedAnswers) {
  const std::vector<CountInstance> d{{1, "a.jpg", "dog", 3}, {1, "a.jpg", "cat", 1}};
  auto claim = train_claim_records(std::span(d).first(1), 0).at(0);
  EXPECT_EQ(parse_response(claim, "No. 3.").value,
            GoldAnswer::of_compound({GoldAnswer::of_yes_no(false), GoldAnswer::of_number(3)}));
  QuestionRecord cmp = train_compare_records(d, 10, 0).records.at(0);
  const auto p = parse_response(cmp, "The number of dog and cat are the same in this picture. 2. 2.");
  ASSERT_TRUE(p.ok());
  EXPECT_EQ(p.value->compound->at(0), GoldAnswer::of_verdict(Verdict::same));
}

}  // namespace
}  // namespace countvqa
