#include "contrasum/corruption.hpp"

#include <algorithm>

#include "json.hpp"

#include "contrasum/errors.hpp"
#include "contrasum/fsio.hpp"
#include "contrasum/text.hpp"

namespace contrasum::corruption {

using nlohmann::json;
namespace txt = contrasum::text;

void Gazetteer::add(std::string_view surface, EntityType type) {
  if (surface.empty()) throw ValidationError("gazetteer", "surface must be non-empty");
  entries_[txt::casefold(surface)] = type;
}

Gazetteer Gazetteer::from_pairs(const std::vector<std::pair<std::string, EntityType>>& pairs) {
  Gazetteer g;
  for (const auto& [surface, type] : pairs) g.add(surface, type);
  return g;
}

Gazetteer Gazetteer::from_corpus(const std::vector<LabeledExample>& examples) {
  Gazetteer g;
  for (const LabeledExample& ex : examples) {
    g.add(ex.primary_entity, ex.entity_type);
    for (const auto& [surface, type] : ex.distractors) g.add(surface, type);
  }
  return g;
}

Gazetteer Gazetteer::load_tsv(const std::string& path) {
  Gazetteer g;
  std::size_t line_no = 0;
  for (const std::string& line : read_lines(path)) {
    ++line_no;
    if (line.empty()) continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos) {
      throw SchemaError(line_no, "expected 'surface<TAB>TYPE'");
    }
    g.add(line.substr(0, tab), corpus::entity_type_from_string(line.substr(tab + 1)));
  }
  return g;
}

void Gazetteer::save_tsv(const std::string& path) const {
  std::string out;
  for (const auto& [surface, type] : entries_) {
    out += surface;
    out += '\t';
    out += corpus::to_string(type);
    out += '\n';
  }
  atomic_write_file(path, out);
}

std::optional<EntityType> Gazetteer::lookup(std::string_view surface) const {
  auto it = entries_.find(txt::casefold(surface));
  if (it == entries_.end()) return std::nullopt;
  return it->second;
}

void DefectLexicon::add_marker(std::string_view phrase) {
  if (phrase.empty()) throw ValidationError("defect_lexicon", "marker must be non-empty");
  markers_.insert(txt::casefold(phrase));
}

void DefectLexicon::add_antonym_pair(std::string_view a, std::string_view b) {
  const std::string fa = txt::casefold(a);
  const std::string fb = txt::casefold(b);
  if (fa.empty() || fb.empty()) throw ValidationError("defect_lexicon", "antonym words must be non-empty");
  if (fa == fb) throw ValidationError("defect_lexicon", "antonym pair must be irreflexive: '" + fa + "'");
  auto ia = antonyms_.find(fa);
  if (ia != antonyms_.end() && ia->second != fb) {
    throw ValidationError("defect_lexicon", "'" + fa + "' already has antonym '" + ia->second + "'");
  }
  auto ib = antonyms_.find(fb);
  if (ib != antonyms_.end() && ib->second != fa) {
    throw ValidationError("defect_lexicon", "'" + fb + "' already has antonym '" + ib->second + "'");
  }
  antonyms_[fa] = fb;
  antonyms_[fb] = fa;
  markers_.insert(fa);
  markers_.insert(fb);
}

DefectLexicon DefectLexicon::from_defect_pool(const std::vector<DefectEntry>& pool) {
  DefectLexicon lex;
  for (const DefectEntry& entry : pool) {
    lex.add_marker(entry.phrase);
    if (entry.antonym) lex.add_antonym_pair(entry.phrase, *entry.antonym);
  }
  return lex;
}

DefectLexicon DefectLexicon::load_tsv(const std::string& path) {
  DefectLexicon lex;
  std::size_t line_no = 0;
  for (const std::string& line : read_lines(path)) {
    ++line_no;
    if (line.empty()) continue;
    const std::size_t tab = line.find('\t');
    if (tab == std::string::npos) {
      lex.add_marker(line);
    } else {
      lex.add_antonym_pair(line.substr(0, tab), line.substr(tab + 1));
    }
  }
  return lex;
}

void DefectLexicon::save_tsv(const std::string& path) const {
  std::string out;
  std::set<std::string> written;
  for (const auto& [a, b] : antonyms_) {
    if (written.count(a) || written.count(b)) continue;
    out += a;
    out += '\t';
    out += b;
    out += '\n';
    written.insert(a);
    written.insert(b);
  }
  for (const std::string& m : markers_) {
    if (!written.count(m)) {
      out += m;
      out += '\n';
    }
  }
  atomic_write_file(path, out);
}

std::optional<std::string> DefectLexicon::antonym_of(std::string_view phrase) const {
  auto it = antonyms_.find(txt::casefold(phrase));
  if (it == antonyms_.end()) return std::nullopt;
  return it->second;
}

std::string to_string(CorruptionKind k) {
  switch (k) {
    case CorruptionKind::kEntitySwap: return "ENTITY_SWAP";
    case CorruptionKind::kNegationAdd: return "NEGATION_ADD";
    case CorruptionKind::kNegationRemove: return "NEGATION_REMOVE";
    case CorruptionKind::kAntonymSwap: return "ANTONYM_SWAP";
  }
  return "ENTITY_SWAP";
}

CorruptionKind corruption_kind_from_string(const std::string& s) {
  if (s == "ENTITY_SWAP") return CorruptionKind::kEntitySwap;
  if (s == "NEGATION_ADD") return CorruptionKind::kNegationAdd;
  if (s == "NEGATION_REMOVE") return CorruptionKind::kNegationRemove;
  if (s == "ANTONYM_SWAP") return CorruptionKind::kAntonymSwap;
  throw ValidationError("corruption_kind", "unknown kind '" + s + "'");
}

std::string apply_edit(std::string_view text, const Edit& edit) {
  if (edit.offset > text.size() || edit.offset + edit.original.size() > text.size()) {
    throw ContractError("edit span out of range");
  }
  if (text.substr(edit.offset, edit.original.size()) != edit.original) {
    throw ContractError("edit original does not match text at offset");
  }
  std::string out(text.substr(0, edit.offset));
  out += edit.replacement;
  out += text.substr(edit.offset + edit.original.size());
  return out;
}

void validate_triplet(const Triplet& t) {
  if (t.s_minus == t.s_plus) throw ContractError("triplet " + t.id + ": s_minus equals s_plus");
  if (apply_edit(t.s_plus, t.edit) != t.s_minus) {
    throw ContractError("triplet " + t.id + ": edit does not reconstruct s_minus");
  }
}

std::vector<EntitySpan> tag_entities(std::string_view text, const Gazetteer& gazetteer) {
  std::vector<EntitySpan> spans;
  if (gazetteer.empty()) throw ContractError("tag_entities: gazetteer is empty");

  // Surfaces sorted by length descending so the longest match wins.
  std::vector<std::pair<std::string, EntityType>> surfaces(gazetteer.entries().begin(),
                                                           gazetteer.entries().end());
  std::stable_sort(surfaces.begin(), surfaces.end(),
                   [](const auto& a, const auto& b) { return a.first.size() > b.first.size(); });

  std::size_t pos = 0;
  while (pos < text.size()) {
    if (!txt::is_word_char(text[pos]) || (pos > 0 && txt::is_word_char(text[pos - 1]))) {
      ++pos;
      continue;
    }
    bool matched = false;
    for (const auto& [surface, type] : surfaces) {
      if (pos + surface.size() > text.size()) continue;
      bool eq = true;
      for (std::size_t i = 0; i < surface.size(); ++i) {
        if (txt::to_lower(text[pos + i]) != surface[i]) {
          eq = false;
          break;
        }
      }
      if (!eq || !txt::word_bounded(text, pos, surface.size())) continue;
      spans.push_back(EntitySpan{std::string(text.substr(pos, surface.size())), type, pos,
                                 pos + surface.size()});
      pos += surface.size();
      matched = true;
      break;
    }
    if (!matched) {
      while (pos < text.size() && txt::is_word_char(text[pos])) ++pos;
    }
  }
  return spans;
}

TopEntities build_top_entities(const std::vector<LabeledExample>& examples,
                               const Gazetteer& gazetteer, std::size_t k) {
  if (k < 1) throw ValidationError("k", "must be >= 1");
  if (examples.empty()) throw ContractError("build_top_entities: corpus is empty");

  std::map<std::pair<std::string, EntityType>, std::size_t> counts;
  for (const LabeledExample& ex : examples) {
    for (const EntitySpan& span : tag_entities(ex.source, gazetteer)) {
      ++counts[{txt::casefold(span.surface), span.type}];
    }
  }
  TopEntities top;
  for (const auto& [key, count] : counts) {
    top.ranked.push_back(TopEntities::Item{key.first, key.second, count});
  }
  std::sort(top.ranked.begin(), top.ranked.end(), [](const auto& a, const auto& b) {
    if (a.count != b.count) return a.count > b.count;
    return a.surface < b.surface;
  });
  if (top.ranked.size() > k) top.ranked.resize(k);
  return top;
}

CorruptionResult corrupt_entity(std::string_view s_plus, std::string_view d,
                                const Gazetteer& gazetteer, const TopEntities& top_entities,
                                Rng& rng) {
  const std::vector<EntitySpan> spans = tag_entities(s_plus, gazetteer);
  if (spans.empty()) return NoCandidate{"no entity span in summary"};

  const EntitySpan& target = spans[rng.index_below(spans.size())];
  const std::string original_folded = txt::casefold(target.surface);

  // Distinct same-type surfaces from the document, minus the original.
  std::vector<std::string> doc_candidates;
  for (const EntitySpan& span : tag_entities(d, gazetteer)) {
    if (span.type != target.type) continue;
    std::string folded = txt::casefold(span.surface);
    if (folded == original_folded) continue;
    if (std::find(doc_candidates.begin(), doc_candidates.end(), folded) == doc_candidates.end()) {
      doc_candidates.push_back(std::move(folded));
    }
  }

  std::string replacement_folded;
  if (!doc_candidates.empty()) {
    replacement_folded = doc_candidates[rng.index_below(doc_candidates.size())];
  } else {
    std::vector<std::string> fallback;
    for (const TopEntities::Item& item : top_entities.ranked) {
      if (item.type == target.type && item.surface != original_folded) {
        fallback.push_back(item.surface);
      }
    }
    if (fallback.empty()) {
      return NoCandidate{"no same-type replacement in document or top entities"};
    }
    replacement_folded = fallback[rng.index_below(fallback.size())];
  }

  CorruptionEdit out;
  out.kind = CorruptionKind::kEntitySwap;
  out.edit = Edit{target.surface, txt::match_capitalization(target.surface, replacement_folded),
                  target.begin};
  out.s_minus = apply_edit(s_plus, out.edit);
  return out;
}

namespace {

// Leftmost marker occurrence; longer surface wins on offset ties.
struct MarkerHit {
  std::string marker;
  std::size_t offset = 0;
};

std::optional<MarkerHit> find_leftmost_marker(std::string_view s, const DefectLexicon& lexicon) {
  std::optional<MarkerHit> best;
  for (const std::string& marker : lexicon.markers()) {
    const auto pos = txt::find_word(s, marker);
    if (!pos) continue;
    if (!best || *pos < best->offset ||
        (*pos == best->offset && marker.size() > best->marker.size())) {
      best = MarkerHit{marker, *pos};
    }
  }
  return best;
}

// True when the word "not" plus one space directly precedes `offset`.
bool negation_precedes(std::string_view s, std::size_t offset, std::size_t* not_begin) {
  if (offset < 4) return false;
  const std::size_t begin = offset - 4;
  if (txt::to_lower(s[begin]) != 'n' || txt::to_lower(s[begin + 1]) != 'o' ||
      txt::to_lower(s[begin + 2]) != 't' || s[begin + 3] != ' ') {
    return false;
  }
  if (!txt::word_bounded(s, begin, 3)) return false;
  *not_begin = begin;
  return true;
}

CorruptionEdit toggle_negation(std::string_view s_plus, const MarkerHit& hit) {
  const std::string phrase(s_plus.substr(hit.offset, hit.marker.size()));
  std::size_t not_begin = 0;
  CorruptionEdit out;
  if (negation_precedes(s_plus, hit.offset, &not_begin)) {
    out.kind = CorruptionKind::kNegationRemove;
    const std::string with_not(s_plus.substr(not_begin, hit.offset - not_begin + phrase.size()));
    std::string bare = phrase;
    if (txt::is_upper(with_not.front())) bare = txt::uppercase_first(bare);
    out.edit = Edit{with_not, bare, not_begin};
  } else {
    out.kind = CorruptionKind::kNegationAdd;
    std::string negated;
    if (txt::is_upper(phrase.front())) {
      negated = "Not " + txt::lowercase_first(phrase);
    } else {
      negated = "not " + phrase;
    }
    out.edit = Edit{phrase, std::move(negated), hit.offset};
  }
  out.s_minus = apply_edit(s_plus, out.edit);
  return out;
}

CorruptionEdit swap_antonym(std::string_view s_plus, const MarkerHit& hit,
                            const std::string& antonym) {
  const std::string phrase(s_plus.substr(hit.offset, hit.marker.size()));
  CorruptionEdit out;
  out.kind = CorruptionKind::kAntonymSwap;
  out.edit = Edit{phrase, txt::match_capitalization(phrase, antonym), hit.offset};
  out.s_minus = apply_edit(s_plus, out.edit);
  return out;
}

}  // namespace

CorruptionResult corrupt_defect_description(std::string_view s_plus, const DefectLexicon& lexicon,
                                            Rng& rng) {
  const auto hit = find_leftmost_marker(s_plus, lexicon);
  if (!hit) return NoCandidate{"no defect phrase in summary"};

  const auto antonym = lexicon.antonym_of(hit->marker);
  if (antonym && rng.coin()) {
    return swap_antonym(s_plus, *hit, *antonym);
  }
  return toggle_negation(s_plus, *hit);
}

std::string to_string(Policy p) {
  switch (p) {
    case Policy::kEntityOnly: return "ENTITY_ONLY";
    case Policy::kDefectOnly: return "DEFECT_ONLY";
    case Policy::kRandomEither: return "RANDOM_EITHER";
  }
  return "RANDOM_EITHER";
}

Policy policy_from_string(const std::string& s) {
  if (s == "ENTITY_ONLY") return Policy::kEntityOnly;
  if (s == "DEFECT_ONLY") return Policy::kDefectOnly;
  if (s == "RANDOM_EITHER") return Policy::kRandomEither;
  throw ValidationError("policy", "unknown policy '" + s + "'");
}

std::variant<Triplet, SkipRecord> make_triplet(const LabeledExample& example,
                                               const Gazetteer& gazetteer,
                                               const DefectLexicon& lexicon,
                                               const TopEntities& top_entities, Policy policy,
                                               Rng& rng) {
  auto run_entity = [&]() {
    return corrupt_entity(example.reference, example.source, gazetteer, top_entities, rng);
  };
  auto run_defect = [&]() { return corrupt_defect_description(example.reference, lexicon, rng); };

  std::vector<std::pair<const char*, CorruptionResult>> attempts;
  switch (policy) {
    case Policy::kEntityOnly:
      attempts.emplace_back("entity", run_entity());
      break;
    case Policy::kDefectOnly:
      attempts.emplace_back("defect", run_defect());
      break;
    case Policy::kRandomEither: {
      const bool entity_first = rng.coin();
      if (entity_first) {
        attempts.emplace_back("entity", run_entity());
        if (std::holds_alternative<NoCandidate>(attempts.back().second)) {
          attempts.emplace_back("defect", run_defect());
        }
      } else {
        attempts.emplace_back("defect", run_defect());
        if (std::holds_alternative<NoCandidate>(attempts.back().second)) {
          attempts.emplace_back("entity", run_entity());
        }
      }
      break;
    }
  }

  std::string reasons;
  for (auto& [label, result] : attempts) {
    if (const auto* edit = std::get_if<CorruptionEdit>(&result)) {
      Triplet t;
      t.id = example.id;
      t.d = example.source;
      t.s_plus = example.reference;
      t.s_minus = edit->s_minus;
      t.kind = edit->kind;
      t.edit = edit->edit;
      validate_triplet(t);
      return t;
    }
    if (!reasons.empty()) reasons += "; ";
    reasons += label;
    reasons += ": ";
    reasons += std::get<NoCandidate>(result).reason;
  }
  return SkipRecord{example.id, reasons};
}

TripletBuild build_triplets(const std::vector<LabeledExample>& examples,
                            const Gazetteer& gazetteer, const DefectLexicon& lexicon,
                            const TopEntities& top_entities, Policy policy, std::uint64_t seed) {
  TripletBuild out;
  for (std::size_t i = 0; i < examples.size(); ++i) {
    Rng rng = Rng::derive(seed, i);
    auto result = make_triplet(examples[i], gazetteer, lexicon, top_entities, policy, rng);
    if (auto* t = std::get_if<Triplet>(&result)) {
      out.triplets.push_back(std::move(*t));
    } else {
      out.skips.push_back(std::get<SkipRecord>(result));
    }
  }
  return out;
}

void save_triplets(const std::vector<Triplet>& triplets, const std::string& path) {
  std::string out;
  for (const Triplet& t : triplets) {
    json j;
    j["id"] = t.id;
    j["d"] = t.d;
    j["s_plus"] = t.s_plus;
    j["s_minus"] = t.s_minus;
    j["corruption_kind"] = to_string(t.kind);
    j["edit"] = {{"original", t.edit.original},
                 {"replacement", t.edit.replacement},
                 {"offset", t.edit.offset}};
    out += j.dump();
    out += '\n';
  }
  atomic_write_file(path, out);
}

std::vector<Triplet> load_triplets(const std::string& path) {
  std::vector<Triplet> out;
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
      Triplet t;
      t.id = j.at("id").get<std::string>();
      t.d = j.at("d").get<std::string>();
      t.s_plus = j.at("s_plus").get<std::string>();
      t.s_minus = j.at("s_minus").get<std::string>();
      t.kind = corruption_kind_from_string(j.at("corruption_kind").get<std::string>());
      const json& e = j.at("edit");
      t.edit.original = e.at("original").get<std::string>();
      t.edit.replacement = e.at("replacement").get<std::string>();
      t.edit.offset = e.at("offset").get<std::size_t>();
      out.push_back(std::move(t));
    } catch (const json::exception& e) {
      throw SchemaError(line_no, std::string("missing or bad field: ") + e.what());
    }
  }
  return out;
}

std::vector<SkipRecord> load_skips(const std::string& path) {
  std::vector<SkipRecord> out;
  std::size_t line_no = 0;
  for (const std::string& line : read_lines(path)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      json j = json::parse(line);
      out.push_back({j.at("id").get<std::string>(), j.at("reason").get<std::string>()});
    } catch (const json::exception& e) {
      throw SchemaError(line_no, std::string("bad skip record: ") + e.what());
    }
  }
  return out;
}

void save_skips(const std::vector<SkipRecord>& skips, const std::string& path) {
  std::string out;
  for (const SkipRecord& s : skips) {
    json j;
    j["id"] = s.id;
    j["reason"] = s.reason;
    out += j.dump();
    out += '\n';
  }
  atomic_write_file(path, out);
}

}  // namespace contrasum::corruption
