#include <doctest.h>

#include <cmath>

#include "qalign/decision.hpp"

using namespace qalign;

namespace {

std::vector<Sequence> seqs(std::initializer_list<const char*> texts) {
  std::vector<Sequence> out;
  for (const char* t : texts) out.push_back(Sequence::parse(t, UnitKind::word));
  return out;
}

}  // namespace

TEST_SUITE("decision") {
  TEST_CASE("answer extraction") {
    CHECK(extract_answer(AnswerExtractor::boxed_latex, "so \\boxed{\\frac{1}{2}} done") == "\\frac{1}{2}");
    CHECK(extract_answer(AnswerExtractor::boxed_latex, "\\boxed{3} then \\boxed{ 4. }") == "4");
    CHECK(extract_answer(AnswerExtractor::boxed_latex, "no box") == "<no-answer>");
    CHECK(extract_answer(AnswerExtractor::last_number, "3 apples, then 1,200.50 total") == "1200.5");
    CHECK(extract_answer(AnswerExtractor::last_number, "answer: -07") == "-7");
    CHECK(extract_answer(AnswerExtractor::last_number, "none") == "<no-answer>");
    CHECK(extract_answer(AnswerExtractor::choice_letter, "I think (B), final answer C") == "C");
    CHECK(extract_answer(AnswerExtractor::choice_letter, "answer is b)") == "B");
    CHECK(extract_answer(AnswerExtractor::choice_letter, "ABCD") == "<no-answer>");
    CHECK(extract_answer(AnswerExtractor::identity, "  a   b ") == "a b");
    CHECK(normalize_answer(" $72$. ") == "72");
    CHECK(normalize_answer("1,000.0") == "1000");
  }

  TEST_CASE("ROUGE-1 F1 by hand") {
    // overlap {the, cat}: p = 2/3, r = 2/4, F1 = 4/7
    CHECK(rouge1_f1("the cat sat", "The cat, a dog!") == doctest::Approx(4.0 / 7.0));
    CHECK(rouge1_f1("a b", "a b") == 1.0);
    CHECK(rouge1_f1("a", "b") == 0.0);
    CHECK(rouge1_f1("", "") == 1.0);
  }

  TEST_CASE("self-normalized weights against direct computation") {
    std::vector<double> r{0.5, 2.0, -1.0};
    const double beta = 0.5;
    ISWeights w = is_weights(r, beta);
    double z = 0.0;
    for (double x : r) z += std::exp(x / beta);
    double h = 0.0;
    for (std::size_t i = 0; i < r.size(); ++i) {
      double p = std::exp(r[i] / beta) / z;
      CHECK(w.values()[i] == doctest::Approx(p).epsilon(1e-14));
      h -= p * std::log(p);
    }
    CHECK(w.entropy() == doctest::Approx(h));
    std::vector<double> huge{1000.0, 1000.0};
    CHECK(is_weights(huge, 1e-3).values()[0] == doctest::Approx(0.5));
    CHECK_THROWS_AS(ISWeights({0.5, 0.6}), Error);
  }

  TEST_CASE("majority vote over extracted answers, ties to the lowest index") {
    auto s = seqs({"so 4", "maybe 5", "it is 5", "4 again", "7"});
    Utility u(UtilityKind::exact_match, AnswerExtractor::last_number);
    MbrResult m = mbr_select(s, std::nullopt, u);
    CHECK(m.index == 0);  // 4 and 5 both have two votes; 4 appears first
    CHECK(m.expected_utility == doctest::Approx(0.4));
    ISWeights w({0.1, 0.3, 0.3, 0.1, 0.2});
    MbrResult mw = mbr_select(s, w, u);
    CHECK(mw.index == 1);
    CHECK(mw.expected_utility == doctest::Approx(0.6));
  }

  TEST_CASE("MBR with ROUGE matches the brute-force argmax") {
    auto s = seqs({"the cat sat", "a cat sat down", "dogs run", "the cat sat down"});
    Utility u(UtilityKind::rouge1_f1, AnswerExtractor::identity);
    std::size_t best = 0;
    double best_score = -1.0;
    for (std::size_t i = 0; i < s.size(); ++i) {
      double score = 0.0;
      for (const auto& t : s) score += rouge1_f1(s[i], t) / 4.0;
      if (score > best_score + 1e-15) {
        best_score = score;
        best = i;
      }
    }
    MbrResult m = mbr_select(s, std::nullopt, u);
    CHECK(m.index == best);
    CHECK(m.expected_utility == doctest::Approx(best_score));
  }

  TEST_CASE("argmax reward ties to the earliest index") {
    std::vector<double> r{0.1, 0.9, 0.9, 0.3};
    CHECK(argmax_reward(r) == 1);
  }

  TEST_CASE("decision report JSON") {
    DecisionReport d{"wmv", 4, "so 4", "4", 0.75, 0.5};
    auto j = d.to_json();
    CHECK(j["method"] == "wmv");
    CHECK(j["n_samples"] == 4);
    CHECK(j["selected_answer"] == "4");
    CHECK(j.begin().key() == "method");
  }

  TEST_CASE("name parsing") {
    CHECK(parse_utility("rouge1_f1") == UtilityKind::rouge1_f1);
    CHECK(parse_answer_extractor("boxed_latex") == AnswerExtractor::boxed_latex);
    CHECK_THROWS_AS(parse_utility("bleu"), Error);
  }
}
