#include "contrasum/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <set>

#include "json.hpp"

#include "contrasum/errors.hpp"
#include "contrasum/fsio.hpp"
#include "contrasum/text.hpp"
#include "contrasum/vocab.hpp"

namespace contrasum::eval {

using nlohmann::json;
namespace txt = contrasum::text;

namespace {

double harmonic_f1(double precision, double recall) {
  const double denom = precision + recall;
  return denom > 0.0 ? 2.0 * precision * recall / denom : 0.0;
}

}  // namespace

RougeScore rouge_n(std::string_view candidate, std::string_view reference, int n) {
  if (n < 1) throw ValidationError("n", "must be >= 1");
  const std::vector<std::string> cand = s2s::word_tokenize(candidate);
  const std::vector<std::string> ref = s2s::word_tokenize(reference);

  auto ngram_counts = [n](const std::vector<std::string>& toks) {
    std::map<std::vector<std::string>, std::size_t> counts;
    if (toks.size() >= static_cast<std::size_t>(n)) {
      for (std::size_t i = 0; i + n <= toks.size(); ++i) {
        counts[std::vector<std::string>(toks.begin() + i, toks.begin() + i + n)] += 1;
      }
    }
    return counts;
  };

  const auto cand_counts = ngram_counts(cand);
  const auto ref_counts = ngram_counts(ref);
  std::size_t cand_total = 0, ref_total = 0, overlap = 0;
  for (const auto& [gram, count] : cand_counts) {
    cand_total += count;
    auto it = ref_counts.find(gram);
    if (it != ref_counts.end()) overlap += std::min(count, it->second);
  }
  for (const auto& [gram, count] : ref_counts) ref_total += count;

  RougeScore score;
  score.precision = cand_total > 0 ? static_cast<double>(overlap) / cand_total : 0.0;
  score.recall = ref_total > 0 ? static_cast<double>(overlap) / ref_total : 0.0;
  score.f1 = harmonic_f1(score.precision, score.recall);
  return score;
}

RougeScore rouge_l(std::string_view candidate, std::string_view reference) {
  const std::vector<std::string> cand = s2s::word_tokenize(candidate);
  const std::vector<std::string> ref = s2s::word_tokenize(reference);

  // iterative DP over the (|cand|+1) x (|ref|+1) table, rolling rows
  std::vector<std::size_t> prev(ref.size() + 1, 0), curr(ref.size() + 1, 0);
  for (std::size_t i = 1; i <= cand.size(); ++i) {
    for (std::size_t j = 1; j <= ref.size(); ++j) {
      if (cand[i - 1] == ref[j - 1]) {
        curr[j] = prev[j - 1] + 1;
      } else {
        curr[j] = std::max(prev[j], curr[j - 1]);
      }
    }
    prev.swap(curr);
  }
  const std::size_t lcs = prev[ref.size()];

  RougeScore score;
  score.precision = !cand.empty() ? static_cast<double>(lcs) / cand.size() : 0.0;
  score.recall = !ref.empty() ? static_cast<double>(lcs) / ref.size() : 0.0;
  score.f1 = harmonic_f1(score.precision, score.recall);
  return score;
}

std::string to_string(Label l) {
  switch (l) {
    case Label::kConsistent: return "CONSISTENT";
    case Label::kWed: return "WED";
    case Label::kIpd: return "IPD";
    case Label::kOther: return "OTHER";
  }
  return "OTHER";
}

Label label_from_string(const std::string& s) {
  if (s == "CONSISTENT") return Label::kConsistent;
  if (s == "WED") return Label::kWed;
  if (s == "IPD") return Label::kIpd;
  if (s == "OTHER") return Label::kOther;
  throw ValidationError("label", "unknown verdict label '" + s + "'");
}

namespace {

// Observed polarity of a phrase occurrence: NEGATED when "not " immediately
// precedes it.
corpus::DefectPolarity observed_polarity(std::string_view text, std::size_t offset) {
  if (offset >= 4) {
    const std::size_t begin = offset - 4;
    if (txt::to_lower(text[begin]) == 'n' && txt::to_lower(text[begin + 1]) == 'o' &&
        txt::to_lower(text[begin + 2]) == 't' && text[begin + 3] == ' ' &&
        txt::word_bounded(text, begin, 3)) {
      return corpus::DefectPolarity::kNegated;
    }
  }
  return corpus::DefectPolarity::kAffirmed;
}

corpus::DefectPolarity flip(corpus::DefectPolarity p) {
  return p == corpus::DefectPolarity::kAffirmed ? corpus::DefectPolarity::kNegated
                                                : corpus::DefectPolarity::kAffirmed;
}

}  // namespace

ConsistencyVerdict classify_consistency(std::string_view generated, const LabeledExample& example,
                                        const Gazetteer& gazetteer, const DefectLexicon& lexicon) {
  const std::string primary_folded = txt::casefold(example.primary_entity);
  std::set<std::string> distractor_set;
  for (const auto& [name, type] : example.distractors) {
    (void)type;
    distractor_set.insert(txt::casefold(name));
  }

  const std::vector<corruption::EntitySpan> spans = tag_entities(generated, gazetteer);
  const bool has_primary = txt::contains_word(generated, example.primary_entity);

  // WED: subject entity (first span) is a distractor, or the primary is
  // omitted while a distractor is named.
  if (!spans.empty()) {
    const std::string subject = txt::casefold(spans.front().surface);
    if (subject != primary_folded && distractor_set.count(subject)) {
      return {Label::kWed, "subject entity '" + subject + "' is a distractor"};
    }
  }
  if (!has_primary) {
    for (const corruption::EntitySpan& span : spans) {
      const std::string folded = txt::casefold(span.surface);
      if (distractor_set.count(folded)) {
        return {Label::kWed, "primary entity missing, names distractor '" + folded + "'"};
      }
    }
  }

  // IPD: gold defect phrase (or its antonym) present with the wrong polarity.
  bool defect_found = false;
  const auto phrase_pos = txt::find_word(generated, example.defect_phrase);
  if (phrase_pos) {
    defect_found = true;
    const corpus::DefectPolarity seen = observed_polarity(generated, *phrase_pos);
    if (seen != example.defect_polarity) {
      return {Label::kIpd, "defect phrase '" + example.defect_phrase + "' with " +
                               corpus::to_string(seen) + " polarity, gold is " +
                               corpus::to_string(example.defect_polarity)};
    }
  } else if (const auto antonym = lexicon.antonym_of(example.defect_phrase)) {
    const auto antonym_pos = txt::find_word(generated, *antonym);
    if (antonym_pos) {
      defect_found = true;
      // An antonym asserts the opposite of the gold phrase.
      const corpus::DefectPolarity effective = flip(observed_polarity(generated, *antonym_pos));
      if (effective != example.defect_polarity) {
        return {Label::kIpd, "antonym '" + *antonym + "' contradicts gold " +
                                 corpus::to_string(example.defect_polarity) + " '" +
                                 example.defect_phrase + "'"};
      }
    }
  }

  if (!has_primary && !defect_found) {
    return {Label::kOther, "neither primary entity nor defect phrase found"};
  }
  return {Label::kConsistent,
          "primary '" + example.primary_entity + "' and gold-polarity defect agree"};
}

RougeMeans mean_rouge(const std::vector<ExampleEval>& rows) {
  RougeMeans means;
  if (rows.empty()) return means;
  auto add = [](RougeScore& acc, const RougeScore& s) {
    acc.precision += s.precision;
    acc.recall += s.recall;
    acc.f1 += s.f1;
  };
  for (const ExampleEval& row : rows) {
    add(means.rouge1, row.rouge1);
    add(means.rouge2, row.rouge2);
    add(means.rougeL, row.rougeL);
  }
  const double inv = 1.0 / static_cast<double>(rows.size());
  for (RougeScore* s : {&means.rouge1, &means.rouge2, &means.rougeL}) {
    s->precision *= inv;
    s->recall *= inv;
    s->f1 *= inv;
  }
  return means;
}

std::vector<ExampleEval> evaluate_examples(const s2s::Seq2SeqModel& model,
                                           const s2s::Vocabulary& vocab,
                                           const std::vector<LabeledExample>& examples,
                                           const Gazetteer& gazetteer,
                                           const DefectLexicon& lexicon, std::size_t max_len,
                                           bool labeled) {
  std::vector<ExampleEval> rows;
  rows.reserve(examples.size());
  for (const LabeledExample& ex : examples) {
    const std::vector<int> src = s2s::tokenize(ex.source, vocab);
    const std::vector<int> out = model.generate(src, max_len);
    ExampleEval row;
    row.id = ex.id;
    row.generated = s2s::detokenize(out, vocab);
    row.reference = ex.reference;
    row.rouge1 = rouge_n(row.generated, ex.reference, 1);
    row.rouge2 = rouge_n(row.generated, ex.reference, 2);
    row.rougeL = rouge_l(row.generated, ex.reference);
    if (labeled) {
      row.verdict = classify_consistency(row.generated, ex, gazetteer, lexicon);
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

namespace {

json rouge_to_json(const RougeScore& s) {
  return json{{"precision", s.precision}, {"recall", s.recall}, {"f1", s.f1}};
}

RougeScore rouge_from_json(const json& j) {
  RougeScore s;
  s.precision = j.at("precision").get<double>();
  s.recall = j.at("recall").get<double>();
  s.f1 = j.at("f1").get<double>();
  return s;
}

json means_to_json(const RougeMeans& m) {
  return json{{"rouge1", rouge_to_json(m.rouge1)},
              {"rouge2", rouge_to_json(m.rouge2)},
              {"rougeL", rouge_to_json(m.rougeL)}};
}

}  // namespace

void save_example_evals(const std::vector<ExampleEval>& rows, const std::string& path) {
  std::string out;
  for (const ExampleEval& row : rows) {
    json j;
    j["id"] = row.id;
    j["generated"] = row.generated;
    j["reference"] = row.reference;
    if (row.verdict) {
      j["label"] = to_string(row.verdict->label);
      j["evidence"] = row.verdict->evidence;
    }
    j["rouge1"] = rouge_to_json(row.rouge1);
    j["rouge2"] = rouge_to_json(row.rouge2);
    j["rougeL"] = rouge_to_json(row.rougeL);
    out += j.dump();
    out += '\n';
  }
  atomic_write_file(path, out);
}

std::vector<ExampleEval> load_example_evals(const std::string& path) {
  std::vector<ExampleEval> rows;
  std::size_t line_no = 0;
  for (const std::string& line : read_lines(path)) {
    ++line_no;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw SchemaError(line_no, std::string("malformed JSON: ") + e.what());
    }
    try {
      ExampleEval row;
      row.id = j.at("id").get<std::string>();
      row.generated = j.at("generated").get<std::string>();
      row.reference = j.at("reference").get<std::string>();
      if (j.contains("label")) {
        row.verdict = ConsistencyVerdict{label_from_string(j.at("label").get<std::string>()),
                                         j.value("evidence", "")};
      }
      row.rouge1 = rouge_from_json(j.at("rouge1"));
      row.rouge2 = rouge_from_json(j.at("rouge2"));
      row.rougeL = rouge_from_json(j.at("rougeL"));
      rows.push_back(std::move(row));
    } catch (const json::exception& e) {
      throw SchemaError(line_no, std::string("missing or bad field: ") + e.what());
    }
  }
  return rows;
}

EvalReport compare_models(const std::vector<ExampleEval>& baseline,
                          const std::vector<ExampleEval>& treated) {
  std::map<std::string, const ExampleEval*> treated_by_id;
  for (const ExampleEval& row : treated) treated_by_id[row.id] = &row;

  std::string missing;
  std::set<std::string> baseline_ids;
  for (const ExampleEval& row : baseline) {
    baseline_ids.insert(row.id);
    if (!treated_by_id.count(row.id)) {
      missing += (missing.empty() ? "" : ", ") + row.id;
    }
  }
  for (const ExampleEval& row : treated) {
    if (!baseline_ids.count(row.id)) {
      missing += (missing.empty() ? "" : ", ") + row.id;
    }
  }
  if (!missing.empty()) {
    throw ContractError("compare_models: ids not aligned: " + missing);
  }

  EvalReport report;
  report.n_examples = baseline.size();
  report.baseline_rouge = mean_rouge(baseline);
  report.treated_rouge = mean_rouge(treated);
  report.baseline_errors_by_type = {{"WED", 0}, {"IPD", 0}};
  report.corrected_by_type = {{"WED", 0}, {"IPD", 0}};

  bool all_verdicts = !baseline.empty();
  for (const ExampleEval& b : baseline) {
    const ExampleEval& t = *treated_by_id.at(b.id);
    if (!b.verdict || !t.verdict) {
      all_verdicts = false;
      break;
    }
  }
  report.has_verdicts = all_verdicts;
  if (!all_verdicts) return report;

  for (const ExampleEval& b : baseline) {
    const ExampleEval& t = *treated_by_id.at(b.id);
    const Label bl = b.verdict->label;
    const Label tl = t.verdict->label;
    ++report.baseline_counts[to_string(bl)];
    ++report.treated_counts[to_string(tl)];

    if (bl == Label::kWed || bl == Label::kIpd) {
      ++report.baseline_errors_by_type[to_string(bl)];
      if (tl == Label::kConsistent) ++report.corrected_by_type[to_string(bl)];
    }
    if (bl == Label::kConsistent) {
      ++report.baseline_consistent;
      if (tl != Label::kConsistent) ++report.consistent_to_inconsistent;
    }
    if (bl != Label::kConsistent) ++report.baseline_inconsistent;
    if (tl != Label::kConsistent) ++report.treated_inconsistent;
  }

  for (const auto& [type, errors] : report.baseline_errors_by_type) {
    const std::size_t corrected = report.corrected_by_type[type];
    report.pct_corrected_by_type[type] =
        errors > 0 ? 100.0 * static_cast<double>(corrected) / static_cast<double>(errors) : 0.0;
  }
  report.pct_consistent_to_inconsistent =
      report.baseline_consistent > 0
          ? 100.0 * static_cast<double>(report.consistent_to_inconsistent) /
                static_cast<double>(report.baseline_consistent)
          : 0.0;
  report.overall_inconsistency_reduction =
      report.baseline_inconsistent > 0
          ? 100.0 *
                (static_cast<double>(report.baseline_inconsistent) -
                 static_cast<double>(report.treated_inconsistent)) /
                static_cast<double>(report.baseline_inconsistent)
          : 0.0;
  return report;
}

std::string EvalReport::to_json() const {
  json j;
  j["n_examples"] = n_examples;
  j["has_verdicts"] = has_verdicts;
  j["baseline_rouge"] = means_to_json(baseline_rouge);
  j["treated_rouge"] = means_to_json(treated_rouge);
  j["rouge_delta"] = {
      {"rouge1_f1", treated_rouge.rouge1.f1 - baseline_rouge.rouge1.f1},
      {"rouge2_f1", treated_rouge.rouge2.f1 - baseline_rouge.rouge2.f1},
      {"rougeL_f1", treated_rouge.rougeL.f1 - baseline_rouge.rougeL.f1},
  };
  if (has_verdicts) {
    j["baseline_counts"] = baseline_counts;
    j["treated_counts"] = treated_counts;
    j["baseline_errors_by_type"] = baseline_errors_by_type;
    j["corrected_by_type"] = corrected_by_type;
    j["pct_corrected_by_type"] = pct_corrected_by_type;
    j["baseline_consistent"] = baseline_consistent;
    j["consistent_to_inconsistent"] = consistent_to_inconsistent;
    j["pct_consistent_to_inconsistent"] = pct_consistent_to_inconsistent;
    j["baseline_inconsistent"] = baseline_inconsistent;
    j["treated_inconsistent"] = treated_inconsistent;
    j["overall_inconsistency_reduction"] = overall_inconsistency_reduction;
  }
  return j.dump(2);
}

std::string EvalReport::to_text_table() const {
  char buf[256];
  std::string out;
  out += "model comparison over " + std::to_string(n_examples) + " examples\n";
  out += "\nROUGE (F1, treated vs baseline)\n";
  const char* names[3] = {"ROUGE-1", "ROUGE-2", "ROUGE-L"};
  const RougeScore* base[3] = {&baseline_rouge.rouge1, &baseline_rouge.rouge2,
                               &baseline_rouge.rougeL};
  const RougeScore* treat[3] = {&treated_rouge.rouge1, &treated_rouge.rouge2,
                                &treated_rouge.rougeL};
  for (int i = 0; i < 3; ++i) {
    std::snprintf(buf, sizeof(buf), "  %-8s %7.4f -> %7.4f  (delta %+7.4f)\n", names[i],
                  base[i]->f1, treat[i]->f1, treat[i]->f1 - base[i]->f1);
    out += buf;
  }
  if (!has_verdicts) {
    out += "\nconsistency verdicts unavailable (unlabeled inputs)\n";
    return out;
  }
  out += "\ncorrected errors\n";
  for (const auto& [type, errors] : baseline_errors_by_type) {
    std::snprintf(buf, sizeof(buf), "  %-4s %zu baseline, %zu corrected (%.1f%%)\n", type.c_str(),
                  errors, corrected_by_type.at(type), pct_corrected_by_type.at(type));
    out += buf;
  }
  std::snprintf(buf, sizeof(buf), "\nconsistent -> inconsistent: %zu of %zu (%.1f%%)\n",
                consistent_to_inconsistent, baseline_consistent, pct_consistent_to_inconsistent);
  out += buf;
  std::snprintf(buf, sizeof(buf), "overall inconsistency: %zu -> %zu (reduction %.1f%%)\n",
                baseline_inconsistent, treated_inconsistent, overall_inconsistency_reduction);
  out += buf;
  return out;
}

}  // namespace contrasum::eval
