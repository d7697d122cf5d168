#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "contrasum/kvconfig.hpp"

namespace contrasum::corpus {

enum class EntityType { kProduct, kComponent, kBrand };

std::string to_string(EntityType t);
EntityType entity_type_from_string(const std::string& s);

enum class DefectPolarity { kAffirmed, kNegated };

std::string to_string(DefectPolarity p);
DefectPolarity polarity_from_string(const std::string& s);

// A source document with its reference summary and the gold annotations that
// make wrong-entity / wrong-polarity judgments automatic.
struct LabeledExample {
  std::string id;
  std::string source;
  std::string reference;
  std::string primary_entity;
  EntityType entity_type = EntityType::kProduct;
  std::vector<std::pair<std::string, EntityType>> distractors;
  std::string defect_phrase;
  DefectPolarity defect_polarity = DefectPolarity::kAffirmed;

  bool operator==(const LabeledExample&) const = default;
};

struct DefectEntry {
  std::string phrase;
  std::optional<std::string> antonym;
};

struct CorpusSpec {
  std::size_t n_examples = 0;
  std::vector<std::pair<std::string, EntityType>> entity_pool;
  std::vector<DefectEntry> defect_pool;
  double negated_fraction = 0.25;
  int min_distractors = 1;
  int max_distractors = 3;
  std::uint64_t seed = 0;

  void validate() const;  // throws ValidationError naming the offending field

  // Built-in pools; n_examples left at 0 for the caller to fill in.
  static CorpusSpec defaults();
  // Flat key-value file with keys: n_examples, entity_pool, defect_pool,
  // negated_fraction, distractor_range, seed. Missing keys keep defaults.
  static CorpusSpec from_config(const KvConfig& cfg);
};

const std::vector<std::pair<std::string, EntityType>>& default_entity_pool();
const std::vector<DefectEntry>& default_defect_pool();

std::vector<LabeledExample> generate_corpus(const CorpusSpec& spec);

void save_corpus(const std::vector<LabeledExample>& examples, const std::string& path);
std::vector<LabeledExample> load_corpus(const std::string& path);

// Lenient loader for evaluation inputs: id, source, reference are required;
// returns false when any row lacks the gold annotation fields, in which case
// consistency verdicts cannot be computed.
std::pair<std::vector<LabeledExample>, bool> load_examples_flexible(const std::string& path);

std::string example_to_json_line(const LabeledExample& ex);
LabeledExample example_from_json_line(const std::string& line, std::size_t line_no);

// Seeded shuffle, then |train| = floor(train_fraction * n); remainder is test.
std::pair<std::vector<LabeledExample>, std::vector<LabeledExample>> split_corpus(
    const std::vector<LabeledExample>& examples, double train_fraction, std::uint64_t seed);

}  // namespace contrasum::corpus
