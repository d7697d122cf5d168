#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "json.hpp"

#include "contrasum/corpus.hpp"
#include "contrasum/errors.hpp"
#include "contrasum/eval.hpp"
#include "contrasum/rng.hpp"
#include "contrasum/vocab.hpp"
#include "support/oracles.hpp"
#include "support/testutil.hpp"

using namespace contrasum;
using namespace contrasum::eval;
using corpus::DefectPolarity;
using corpus::EntityType;
using corpus::LabeledExample;

namespace {

LabeledExample mouse_example() {
  LabeledExample ex;
  ex.id = "m1";
  ex.source =
      "I ordered this mouse for my new laptop. However, when I received it, I could see many "
      "scratches on the product. It looks like it has been used before.";
  ex.reference = "The mouse delivered has many scratches.";
  ex.primary_entity = "mouse";
  ex.entity_type = EntityType::kProduct;
  ex.distractors = {{"laptop", EntityType::kProduct}};
  ex.defect_phrase = "scratched";
  ex.defect_polarity = DefectPolarity::kAffirmed;
  return ex;
}

Gazetteer mouse_gazetteer() {
  Gazetteer g;
  g.add("mouse", EntityType::kProduct);
  g.add("laptop", EntityType::kProduct);
  g.add("phone", EntityType::kProduct);
  return g;
}

DefectLexicon default_lexicon() {
  return DefectLexicon::from_defect_pool(corpus::default_defect_pool());
}

ExampleEval row(const std::string& id, Label baseline_label) {
  ExampleEval r;
  r.id = id;
  r.generated = "x";
  r.reference = "x";
  r.verdict = ConsistencyVerdict{baseline_label, ""};
  return r;
}

}  // namespace

TEST_CASE("rouge_n on identical and disjoint strings") {
  const RougeScore same = rouge_n("the mouse is broken", "The mouse is broken", 1);
  CHECK(same.precision == 1.0);
  CHECK(same.recall == 1.0);
  CHECK(same.f1 == 1.0);

  const RougeScore none = rouge_n("alpha beta", "gamma delta", 1);
  CHECK(none.precision == 0.0);
  CHECK(none.recall == 0.0);
  CHECK(none.f1 == 0.0);
}

TEST_CASE("rouge_n worked example") {
  const RougeScore uni = rouge_n("the cat sat", "the cat ran", 1);
  CHECK(uni.precision == doctest::Approx(2.0 / 3.0));
  CHECK(uni.recall == doctest::Approx(2.0 / 3.0));
  CHECK(uni.f1 == doctest::Approx(2.0 / 3.0));

  const RougeScore bi = rouge_n("the cat sat", "the cat ran", 2);
  CHECK(bi.precision == doctest::Approx(0.5));
  CHECK(bi.recall == doctest::Approx(0.5));
  CHECK(bi.f1 == doctest::Approx(0.5));
}

TEST_CASE("clipping caps repeated n-grams") {
  // candidate repeats "the" three times; reference has it once
  const RougeScore s = rouge_n("the the the", "the end", 1);
  CHECK(s.precision == doctest::Approx(1.0 / 3.0));
  CHECK(s.recall == doctest::Approx(0.5));
}

TEST_CASE("rouge_l worked examples") {
  CHECK(rouge_l("a b c d", "a b c d").f1 == 1.0);
  const RougeScore s = rouge_l("a b c d", "a c b d");  // LCS = 3
  CHECK(s.precision == doctest::Approx(0.75));
  CHECK(s.recall == doctest::Approx(0.75));
  CHECK(s.f1 == doctest::Approx(0.75));
  const RougeScore empty = rouge_l("", "a b");
  CHECK(empty.precision == 0.0);
  CHECK(empty.recall == 0.0);
  CHECK(empty.f1 == 0.0);
}

TEST_CASE("rouge matches the brute-force oracles on random pairs") {
  const std::vector<std::string> alphabet = {"a", "b", "c", "d", "e", "the", "cat", "."};
  Rng rng(123);
  for (int trial = 0; trial < 60; ++trial) {
    auto make_text = [&]() {
      const std::size_t len = rng.index_below(21);
      std::string text;
      for (std::size_t i = 0; i < len; ++i) {
        if (!text.empty()) text += ' ';
        text += alphabet[rng.index_below(alphabet.size())];
      }
      return text;
    };
    const std::string cand = make_text();
    const std::string ref = make_text();
    const auto cand_toks = s2s::word_tokenize(cand);
    const auto ref_toks = s2s::word_tokenize(ref);

    for (int n = 1; n <= 3; ++n) {
      const RougeScore got = rouge_n(cand, ref, n);
      const auto want = oracles::rouge_n_bruteforce(cand_toks, ref_toks, n);
      CHECK(got.precision == want.precision);
      CHECK(got.recall == want.recall);
      CHECK(got.f1 == want.f1);
    }
    const RougeScore got_l = rouge_l(cand, ref);
    const auto want_l = oracles::rouge_l_recursive(cand_toks, ref_toks);
    CHECK(got_l.precision == want_l.precision);
    CHECK(got_l.recall == want_l.recall);
    CHECK(got_l.f1 == want_l.f1);
  }
}

TEST_CASE("rouge_l swaps precision and recall under argument swap") {
  Rng rng(7);
  const std::vector<std::string> alphabet = {"u", "v", "w", "x"};
  for (int trial = 0; trial < 40; ++trial) {
    std::string a, b;
    for (std::size_t i = 0; i < rng.index_below(10); ++i) {
      a += alphabet[rng.index_below(4)] + " ";
    }
    for (std::size_t i = 0; i < rng.index_below(10); ++i) {
      b += alphabet[rng.index_below(4)] + " ";
    }
    const RougeScore ab = rouge_l(a, b);
    const RougeScore ba = rouge_l(b, a);
    CHECK(ab.precision == ba.recall);
    CHECK(ab.recall == ba.precision);
    CHECK(ab.f1 == doctest::Approx(ba.f1));
    for (const RougeScore& s : {ab, ba}) {
      CHECK(s.precision >= 0.0);
      CHECK(s.precision <= 1.0);
      CHECK(s.f1 <= 1.0);
    }
  }
}

TEST_CASE("classify: naming the distractor as subject is WED") {
  const auto verdict = classify_consistency("The laptop came with many scratches",
                                            mouse_example(), mouse_gazetteer(), default_lexicon());
  CHECK(verdict.label == Label::kWed);
  CHECK(verdict.evidence.find("laptop") != std::string::npos);
}

TEST_CASE("classify: contradicting defect polarity is IPD") {
  LabeledExample ex;
  ex.id = "p1";
  ex.source =
      "I checked the serial number and found it doesn't match the one on the website. "
      "This phone is not defective. I question the source of this product.";
  ex.reference = "The phone serial number doesn't match the one on the website but the phone is "
                 "not defective.";
  ex.primary_entity = "phone";
  ex.entity_type = EntityType::kProduct;
  ex.distractors = {{"laptop", EntityType::kProduct}};
  ex.defect_phrase = "defective";
  ex.defect_polarity = DefectPolarity::kNegated;

  const auto verdict =
      classify_consistency("This phone is defective and the serial number doesn't match the one "
                           "on the website",
                           ex, mouse_gazetteer(), default_lexicon());
  CHECK(verdict.label == Label::kIpd);
}

TEST_CASE("classify: antonym of the gold phrase flips the asserted polarity") {
  LabeledExample ex;
  ex.id = "e1";
  ex.source = "The eggs I purchased have bad smells.";
  ex.reference = "Eggs have bad smells.";
  ex.primary_entity = "eggs";
  ex.entity_type = EntityType::kProduct;
  ex.distractors = {{"milk", EntityType::kProduct}};
  ex.defect_phrase = "bad";
  ex.defect_polarity = DefectPolarity::kAffirmed;

  Gazetteer g;
  g.add("eggs", EntityType::kProduct);
  g.add("milk", EntityType::kProduct);

  const auto verdict =
      classify_consistency("Eggs have good smells.", ex, g, default_lexicon());
  CHECK(verdict.label == Label::kIpd);

  // negated antonym asserts the gold polarity again
  const auto ok = classify_consistency("Eggs have not good smells.", ex, g, default_lexicon());
  CHECK(ok.label == Label::kConsistent);
}

TEST_CASE("classify: matching summary is CONSISTENT, vacuous summary is OTHER") {
  const auto ex = mouse_example();
  const auto good = classify_consistency("The mouse delivered is scratched.", ex,
                                         mouse_gazetteer(), default_lexicon());
  CHECK(good.label == Label::kConsistent);

  const auto vague =
      classify_consistency("Arrived late, nothing else.", ex, mouse_gazetteer(), default_lexicon());
  CHECK(vague.label == Label::kOther);
}

TEST_CASE("classify: WED takes precedence over IPD") {
  const auto ex = mouse_example();
  // wrong subject AND wrong polarity
  const auto verdict = classify_consistency("The laptop is not scratched.", ex, mouse_gazetteer(),
                                            default_lexicon());
  CHECK(verdict.label == Label::kWed);
}

TEST_CASE("every gold reference classifies as CONSISTENT") {
  corpus::CorpusSpec spec = corpus::CorpusSpec::defaults();
  spec.n_examples = 200;
  spec.seed = 77;
  const auto examples = corpus::generate_corpus(spec);
  const Gazetteer g = Gazetteer::from_corpus(examples);
  const DefectLexicon lex = default_lexicon();
  for (const auto& ex : examples) {
    const auto verdict = classify_consistency(ex.reference, ex, g, lex);
    CHECK(verdict.label == Label::kConsistent);
  }
}

TEST_CASE("compare_models computes the correction percentages") {
  std::vector<ExampleEval> baseline;
  std::vector<ExampleEval> treated;
  int id = 0;
  auto push = [&](Label b, Label t) {
    const std::string name = "ex" + std::to_string(id++);
    baseline.push_back(row(name, b));
    treated.push_back(row(name, t));
  };
  // 10 baseline WED, 6 corrected
  for (int i = 0; i < 6; ++i) push(Label::kWed, Label::kConsistent);
  for (int i = 0; i < 4; ++i) push(Label::kWed, Label::kWed);
  // 4 baseline IPD, 1 corrected
  push(Label::kIpd, Label::kConsistent);
  for (int i = 0; i < 3; ++i) push(Label::kIpd, Label::kIpd);
  // 20 baseline consistent, 2 regress
  for (int i = 0; i < 18; ++i) push(Label::kConsistent, Label::kConsistent);
  push(Label::kConsistent, Label::kWed);
  push(Label::kConsistent, Label::kIpd);

  const EvalReport report = compare_models(baseline, treated);
  CHECK(report.has_verdicts);
  CHECK(report.pct_corrected_by_type.at("WED") == doctest::Approx(60.0));
  CHECK(report.pct_corrected_by_type.at("IPD") == doctest::Approx(25.0));
  CHECK(report.pct_consistent_to_inconsistent == doctest::Approx(10.0));
  // baseline inconsistent 14, treated inconsistent 4+3+2=9
  CHECK(report.baseline_inconsistent == 14);
  CHECK(report.treated_inconsistent == 9);
  CHECK(report.overall_inconsistency_reduction == doctest::Approx(100.0 * 5.0 / 14.0));
  // counts reconcile: corrected + uncorrected = baseline errors per type
  for (const std::string type : {"WED", "IPD"}) {
    CHECK(report.corrected_by_type.at(type) <= report.baseline_errors_by_type.at(type));
  }
  CHECK(report.baseline_errors_by_type.at("WED") == 10);
  CHECK(report.baseline_errors_by_type.at("IPD") == 4);
}

TEST_CASE("compare_models mirrors the 44 percent reduction example") {
  std::vector<ExampleEval> baseline;
  std::vector<ExampleEval> treated;
  for (int i = 0; i < 50; ++i) {
    const std::string name = "r" + std::to_string(i);
    baseline.push_back(row(name, Label::kWed));
    treated.push_back(row(name, i < 28 ? Label::kWed : Label::kConsistent));
  }
  const EvalReport report = compare_models(baseline, treated);
  CHECK(report.baseline_inconsistent == 50);
  CHECK(report.treated_inconsistent == 28);
  CHECK(report.overall_inconsistency_reduction == doctest::Approx(44.0));
}

TEST_CASE("comparing a model against itself gives zero deltas") {
  std::vector<ExampleEval> rows;
  rows.push_back(row("a", Label::kWed));
  rows.push_back(row("b", Label::kConsistent));
  const EvalReport report = compare_models(rows, rows);
  CHECK(report.pct_corrected_by_type.at("WED") == 0.0);
  CHECK(report.pct_consistent_to_inconsistent == 0.0);
  CHECK(report.overall_inconsistency_reduction == 0.0);
}

TEST_CASE("misaligned ids raise a contract error naming them") {
  std::vector<ExampleEval> baseline = {row("a", Label::kWed)};
  std::vector<ExampleEval> treated = {row("b", Label::kWed)};
  try {
    compare_models(baseline, treated);
    FAIL("expected ContractError");
  } catch (const ContractError& e) {
    const std::string message = e.what();
    CHECK(message.find("a") != std::string::npos);
    CHECK(message.find("b") != std::string::npos);
  }
}

TEST_CASE("reports without verdicts still carry ROUGE") {
  std::vector<ExampleEval> baseline = {ExampleEval{"a", "x y", "x y", std::nullopt,
                                                   rouge_n("x y", "x y", 1),
                                                   rouge_n("x y", "x y", 2), rouge_l("x y", "x y")}};
  const EvalReport report = compare_models(baseline, baseline);
  CHECK_FALSE(report.has_verdicts);
  CHECK(report.treated_rouge.rouge1.f1 == 1.0);
  const auto parsed = nlohmann::json::parse(report.to_json());
  CHECK(parsed.at("has_verdicts") == false);
}

TEST_CASE("example evals round-trip through JSONL") {
  testutil::TempDir dir;
  std::vector<ExampleEval> rows;
  ExampleEval a = row("a", Label::kIpd);
  a.verdict->evidence = "why";
  a.rouge1 = rouge_n("p q", "p r", 1);
  rows.push_back(a);
  ExampleEval b;
  b.id = "b";
  b.generated = "gen";
  b.reference = "ref";
  rows.push_back(b);

  const std::string path = dir.file("evals.jsonl");
  save_example_evals(rows, path);
  const auto loaded = load_example_evals(path);
  REQUIRE(loaded.size() == 2);
  CHECK(loaded[0].verdict->label == Label::kIpd);
  CHECK(loaded[0].verdict->evidence == "why");
  CHECK(loaded[0].rouge1.precision == a.rouge1.precision);
  CHECK_FALSE(loaded[1].verdict.has_value());
}
