#pragma once

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "contrasum/corpus.hpp"
#include "contrasum/corruption.hpp"
#include "contrasum/model.hpp"

namespace contrasum::eval {

using corpus::LabeledExample;
using corruption::DefectLexicon;
using corruption::Gazetteer;

struct RougeScore {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
};

// Clipped n-gram overlap, case-folded, single reference.
RougeScore rouge_n(std::string_view candidate, std::string_view reference, int n);

// LCS-based with beta = 1.
RougeScore rouge_l(std::string_view candidate, std::string_view reference);

enum class Label { kConsistent, kWed, kIpd, kOther };

std::string to_string(Label l);
Label label_from_string(const std::string& s);

struct ConsistencyVerdict {
  Label label = Label::kConsistent;
  std::string evidence;
};

// Gold-label judge: WED when the summary's subject entity is a distractor (or
// the primary is missing while a distractor is named); IPD when the gold
// defect phrase (or its antonym) appears with contradicting polarity; OTHER
// when neither the primary nor the defect phrase is found. WED takes
// precedence over IPD over OTHER.
ConsistencyVerdict classify_consistency(std::string_view generated, const LabeledExample& example,
                                        const Gazetteer& gazetteer, const DefectLexicon& lexicon);

struct ExampleEval {
  std::string id;
  std::string generated;
  std::string reference;
  std::optional<ConsistencyVerdict> verdict;  // absent for unlabeled inputs
  RougeScore rouge1, rouge2, rougeL;
};

struct RougeMeans {
  RougeScore rouge1, rouge2, rougeL;
};

RougeMeans mean_rouge(const std::vector<ExampleEval>& rows);

// Greedy-decodes each example's source and scores it. `max_len` bounds the
// generated token count. Examples lacking gold labels get no verdict.
std::vector<ExampleEval> evaluate_examples(const s2s::Seq2SeqModel& model,
                                           const s2s::Vocabulary& vocab,
                                           const std::vector<LabeledExample>& examples,
                                           const Gazetteer& gazetteer,
                                           const DefectLexicon& lexicon, std::size_t max_len,
                                           bool labeled);

void save_example_evals(const std::vector<ExampleEval>& rows, const std::string& path);
std::vector<ExampleEval> load_example_evals(const std::string& path);

struct EvalReport {
  std::size_t n_examples = 0;
  bool has_verdicts = false;

  RougeMeans baseline_rouge, treated_rouge;

  std::map<std::string, std::size_t> baseline_counts;  // label -> count
  std::map<std::string, std::size_t> treated_counts;

  // per error type: corrected = baseline==type && treated==CONSISTENT
  std::map<std::string, std::size_t> baseline_errors_by_type;  // WED / IPD
  std::map<std::string, std::size_t> corrected_by_type;
  std::map<std::string, double> pct_corrected_by_type;

  std::size_t baseline_consistent = 0;
  std::size_t consistent_to_inconsistent = 0;
  double pct_consistent_to_inconsistent = 0.0;

  std::size_t baseline_inconsistent = 0;
  std::size_t treated_inconsistent = 0;
  double overall_inconsistency_reduction = 0.0;  // percent

  std::string to_json() const;
  std::string to_text_table() const;
};

// Rows are aligned by id; throws ContractError listing missing ids otherwise.
EvalReport compare_models(const std::vector<ExampleEval>& baseline,
                          const std::vector<ExampleEval>& treated);

}  // namespace contrasum::eval
