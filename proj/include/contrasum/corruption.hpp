#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

#include "contrasum/corpus.hpp"
#include "contrasum/rng.hpp"

namespace contrasum::corruption {

using corpus::DefectEntry;
using corpus::EntityType;
using corpus::LabeledExample;

struct EntitySpan {
  std::string surface;  // as it appears in the text
  EntityType type = EntityType::kProduct;
  std::size_t begin = 0;
  std::size_t end = 0;
};

// Deterministic surface-form tagger; stands in for a statistical NER model.
class Gazetteer {
 public:
  void add(std::string_view surface, EntityType type);

  static Gazetteer from_pairs(const std::vector<std::pair<std::string, EntityType>>& pairs);
  static Gazetteer from_corpus(const std::vector<LabeledExample>& examples);
  // One "surface<TAB>TYPE" per line.
  static Gazetteer load_tsv(const std::string& path);
  void save_tsv(const std::string& path) const;

  std::optional<EntityType> lookup(std::string_view surface) const;
  bool empty() const { return entries_.empty(); }
  std::size_t size() const { return entries_.size(); }
  const std::map<std::string, EntityType>& entries() const { return entries_; }

 private:
  std::map<std::string, EntityType> entries_;  // casefolded surface -> type
};

// Defect phrases recognizable in summaries plus their opposite-meaning pairs.
class DefectLexicon {
 public:
  void add_marker(std::string_view phrase);
  void add_antonym_pair(std::string_view a, std::string_view b);

  static DefectLexicon from_defect_pool(const std::vector<DefectEntry>& pool);
  // Lines are either "word<TAB>word" antonym pairs or a single marker word.
  static DefectLexicon load_tsv(const std::string& path);
  void save_tsv(const std::string& path) const;

  std::optional<std::string> antonym_of(std::string_view phrase) const;
  const std::set<std::string>& markers() const { return markers_; }
  bool empty() const { return markers_.empty(); }

 private:
  std::set<std::string> markers_;                  // casefolded
  std::map<std::string, std::string> antonyms_;    // symmetric, irreflexive
};

enum class CorruptionKind { kEntitySwap, kNegationAdd, kNegationRemove, kAntonymSwap };

std::string to_string(CorruptionKind k);
CorruptionKind corruption_kind_from_string(const std::string& s);

struct Edit {
  std::string original;
  std::string replacement;
  std::size_t offset = 0;

  bool operator==(const Edit&) const = default;
};

// Replace text[offset : offset+|original|] with the replacement.
std::string apply_edit(std::string_view text, const Edit& edit);

struct Triplet {
  std::string id;
  std::string d;
  std::string s_plus;
  std::string s_minus;
  CorruptionKind kind = CorruptionKind::kEntitySwap;
  Edit edit;
};

// Checks s_minus != s_plus and that the recorded edit reconstructs s_minus.
void validate_triplet(const Triplet& t);

struct SkipRecord {
  std::string id;
  std::string reason;
};

struct TopEntities {
  struct Item {
    std::string surface;  // casefolded
    EntityType type = EntityType::kProduct;
    std::size_t count = 0;
  };
  std::vector<Item> ranked;  // descending count, ties lexicographic
};

struct CorruptionEdit {
  CorruptionKind kind = CorruptionKind::kEntitySwap;
  Edit edit;
  std::string s_minus;
};

struct NoCandidate {
  std::string reason;
};

using CorruptionResult = std::variant<CorruptionEdit, NoCandidate>;

// Non-overlapping spans, left to right; longest surface wins at each position;
// case-insensitive on word boundaries.
std::vector<EntitySpan> tag_entities(std::string_view text, const Gazetteer& gazetteer);

// Entity occurrence counts over all source documents, truncated to k.
TopEntities build_top_entities(const std::vector<LabeledExample>& examples,
                               const Gazetteer& gazetteer, std::size_t k = 50);

// Swap one summary entity for a same-type entity from the document, falling
// back to the top-k list when the document offers no alternative.
CorruptionResult corrupt_entity(std::string_view s_plus, std::string_view d,
                                const Gazetteer& gazetteer, const TopEntities& top_entities,
                                Rng& rng);

// Toggle "not" before the leftmost defect phrase, or swap the phrase for its
// antonym; picks uniformly when both mechanisms apply.
CorruptionResult corrupt_defect_description(std::string_view s_plus, const DefectLexicon& lexicon,
                                            Rng& rng);

enum class Policy { kEntityOnly, kDefectOnly, kRandomEither };

std::string to_string(Policy p);
Policy policy_from_string(const std::string& s);

std::variant<Triplet, SkipRecord> make_triplet(const LabeledExample& example,
                                               const Gazetteer& gazetteer,
                                               const DefectLexicon& lexicon,
                                               const TopEntities& top_entities, Policy policy,
                                               Rng& rng);

struct TripletBuild {
  std::vector<Triplet> triplets;
  std::vector<SkipRecord> skips;
};

// Per-example RNG derived from (seed, example index).
TripletBuild build_triplets(const std::vector<LabeledExample>& examples,
                            const Gazetteer& gazetteer, const DefectLexicon& lexicon,
                            const TopEntities& top_entities, Policy policy, std::uint64_t seed);

void save_triplets(const std::vector<Triplet>& triplets, const std::string& path);
std::vector<Triplet> load_triplets(const std::string& path);
void save_skips(const std::vector<SkipRecord>& skips, const std::string& path);
std::vector<SkipRecord> load_skips(const std::string& path);

}  // namespace contrasum::corruption
