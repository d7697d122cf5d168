#include "contrasum/corpus.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "json.hpp"

#include "contrasum/errors.hpp"
#include "contrasum/fsio.hpp"
#include "contrasum/rng.hpp"
#include "contrasum/text.hpp"

namespace contrasum::corpus {

using nlohmann::json;

std::string to_string(EntityType t) {
  switch (t) {
    case EntityType::kProduct: return "PRODUCT";
    case EntityType::kComponent: return "COMPONENT";
    case EntityType::kBrand: return "BRAND";
  }
  return "PRODUCT";
}

EntityType entity_type_from_string(const std::string& s) {
  if (s == "PRODUCT") return EntityType::kProduct;
  if (s == "COMPONENT") return EntityType::kComponent;
  if (s == "BRAND") return EntityType::kBrand;
  throw ValidationError("entity_type", "unknown entity type '" + s + "'");
}

std::string to_string(DefectPolarity p) {
  return p == DefectPolarity::kAffirmed ? "AFFIRMED" : "NEGATED";
}

DefectPolarity polarity_from_string(const std::string& s) {
  if (s == "AFFIRMED") return DefectPolarity::kAffirmed;
  if (s == "NEGATED") return DefectPolarity::kNegated;
  throw ValidationError("defect_polarity", "unknown polarity '" + s + "'");
}

const std::vector<std::pair<std::string, EntityType>>& default_entity_pool() {
  static const std::vector<std::pair<std::string, EntityType>> pool = {
      {"mouse", EntityType::kProduct},        {"laptop", EntityType::kProduct},
      {"phone", EntityType::kProduct},        {"keyboard", EntityType::kProduct},
      {"monitor", EntityType::kProduct},      {"headset", EntityType::kProduct},
      {"charger", EntityType::kProduct},      {"tablet", EntityType::kProduct},
      {"camera", EntityType::kProduct},       {"speaker", EntityType::kProduct},
      {"router", EntityType::kProduct},       {"printer", EntityType::kProduct},
      {"kettle", EntityType::kProduct},       {"blender", EntityType::kProduct},
      {"toaster", EntityType::kProduct},      {"vacuum", EntityType::kProduct},
      {"drone", EntityType::kProduct},        {"microwave", EntityType::kProduct},
      {"lamp", EntityType::kProduct},         {"projector", EntityType::kProduct},
      {"smart watch", EntityType::kProduct},  {"battery", EntityType::kComponent},
      {"screen", EntityType::kComponent},     {"cable", EntityType::kComponent},
      {"adapter", EntityType::kComponent},    {"lens", EntityType::kComponent},
      {"strap", EntityType::kComponent},      {"remote", EntityType::kComponent},
      {"stand", EntityType::kComponent},      {"power cord", EntityType::kComponent},
      {"memory card", EntityType::kComponent},{"acme", EntityType::kBrand},
      {"zentek", EntityType::kBrand},         {"orbix", EntityType::kBrand},
      {"lumora", EntityType::kBrand},         {"velotek", EntityType::kBrand},
  };
  return pool;
}

const std::vector<DefectEntry>& default_defect_pool() {
  static const std::vector<DefectEntry> pool = {
      {"broken", "functional"},   {"opened", "sealed"},
      {"expired", "fresh"},       {"damaged", "intact"},
      {"defective", "flawless"},  {"scratched", "spotless"},
      {"dirty", "clean"},         {"torn", "pristine"},
      {"cracked", "solid"},       {"leaking", "watertight"},
      {"bad", "good"},            {"moldy", std::nullopt},
      {"dented", std::nullopt},   {"overheating", std::nullopt},
  };
  return pool;
}

void CorpusSpec::validate() const {
  if (n_examples == 0) throw ValidationError("n_examples", "must be a positive integer");
  if (entity_pool.empty()) throw ValidationError("entity_pool", "must be non-empty");
  if (defect_pool.empty()) throw ValidationError("defect_pool", "must be non-empty");
  for (const auto& [surface, type] : entity_pool) {
    (void)type;
    if (surface.empty()) throw ValidationError("entity_pool", "entity surface must be non-empty");
  }
  for (const auto& entry : defect_pool) {
    if (entry.phrase.empty()) throw ValidationError("defect_pool", "defect phrase must be non-empty");
    if (entry.antonym && *entry.antonym == entry.phrase) {
      throw ValidationError("defect_pool", "antonym of '" + entry.phrase + "' equals the phrase");
    }
  }
  if (!(negated_fraction >= 0.0 && negated_fraction <= 1.0)) {
    throw ValidationError("negated_fraction", "must lie in [0, 1]");
  }
  if (min_distractors < 1) {
    throw ValidationError("distractor_range", "lower bound must be >= 1");
  }
  if (max_distractors < min_distractors) {
    throw ValidationError("distractor_range", "upper bound below lower bound");
  }
  if (entity_pool.size() < static_cast<std::size_t>(min_distractors) + 1) {
    throw ValidationError("entity_pool",
                          "needs at least min_distractors + 1 entities for distinct distractors");
  }
}

CorpusSpec CorpusSpec::defaults() {
  CorpusSpec spec;
  spec.entity_pool = default_entity_pool();
  spec.defect_pool = default_defect_pool();
  return spec;
}

namespace {

std::string_view trim_view(std::string_view s) {
  std::size_t b = 0, e = s.size();
  while (b < e && (s[b] == ' ' || s[b] == '\t')) ++b;
  while (e > b && (s[e - 1] == ' ' || s[e - 1] == '\t')) --e;
  return s.substr(b, e - b);
}

std::vector<std::string> split_list(const std::string& raw, char sep) {
  std::vector<std::string> out;
  std::size_t pos = 0;
  while (pos <= raw.size()) {
    std::size_t next = raw.find(sep, pos);
    if (next == std::string::npos) next = raw.size();
    std::string item(trim_view(std::string_view(raw).substr(pos, next - pos)));
    if (!item.empty()) out.push_back(std::move(item));
    pos = next + 1;
  }
  return out;
}

}  // namespace

CorpusSpec CorpusSpec::from_config(const KvConfig& cfg) {
  CorpusSpec spec = defaults();
  spec.n_examples = static_cast<std::size_t>(cfg.get_uint_or("n_examples", 0));
  if (cfg.has("entity_pool")) {
    spec.entity_pool.clear();
    for (const std::string& item : split_list(cfg.get("entity_pool"), ',')) {
      const std::size_t colon = item.rfind(':');
      if (colon == std::string::npos) {
        throw ValidationError("entity_pool", "expected 'surface:TYPE', got '" + item + "'");
      }
      std::string surface(trim_view(std::string_view(item).substr(0, colon)));
      std::string type(trim_view(std::string_view(item).substr(colon + 1)));
      spec.entity_pool.emplace_back(std::move(surface), entity_type_from_string(type));
    }
  }
  if (cfg.has("defect_pool")) {
    spec.defect_pool.clear();
    for (const std::string& item : split_list(cfg.get("defect_pool"), ',')) {
      const std::size_t slash = item.find('/');
      if (slash == std::string::npos) {
        spec.defect_pool.push_back({item, std::nullopt});
      } else {
        std::string phrase(trim_view(std::string_view(item).substr(0, slash)));
        std::string antonym(trim_view(std::string_view(item).substr(slash + 1)));
        spec.defect_pool.push_back({std::move(phrase), std::move(antonym)});
      }
    }
  }
  spec.negated_fraction = cfg.get_real_or("negated_fraction", spec.negated_fraction);
  if (cfg.has("distractor_range")) {
    const std::string raw = cfg.get("distractor_range");
    const std::size_t dots = raw.find("..");
    try {
      if (dots == std::string::npos) {
        spec.min_distractors = spec.max_distractors = std::stoi(raw);
      } else {
        spec.min_distractors = std::stoi(raw.substr(0, dots));
        spec.max_distractors = std::stoi(raw.substr(dots + 2));
      }
    } catch (const std::exception&) {
      throw ValidationError("distractor_range", "expected 'lo..hi' or a single integer, got '" + raw + "'");
    }
  }
  spec.seed = cfg.get_uint_or("seed", spec.seed);
  return spec;
}

namespace {

// Sentence templates. {p} = primary entity, {d} = a distractor, {def} = defect
// phrase. Entities are only ever placed mid-sentence so surfaces stay verbatim.
struct Banks {
  std::vector<std::string> openers_with_distractor = {
      "I ordered the {p} for my {d} last week.",
      "I purchased the {p} together with the {d}.",
  };
  std::vector<std::string> openers_plain = {
      "I bought the {p} from this store a month ago.",
      "The {p} I ordered finally arrived yesterday.",
      "My new {p} was delivered two days ago.",
  };
  std::vector<std::string> defect_affirmed = {
      "When I opened the box, the {p} was {def}.",
      "The {p} is clearly {def}.",
      "I noticed the {p} was {def} right away.",
      "Right out of the box it was {def}.",
      "Sadly it arrived {def}.",
  };
  std::vector<std::string> defect_negated = {
      "To be fair, the {p} is not {def}.",
      "I checked carefully and the {p} is not {def}.",
      "It is not {def}, to be clear.",
  };
  std::vector<std::string> negated_complaints = {
      "However the serial number does not match the website.",
      "However the seller shipped the wrong color.",
      "Still, the order took almost three weeks to arrive.",
  };
  std::vector<std::string> distractor_fillers = {
      "It was supposed to work with my {d}.",
      "My {d} from the same seller works fine.",
      "I also ordered the {d} in the same box.",
      "The {d} I already own never had this problem.",
      "A friend recommended the {d} instead.",
  };
  std::vector<std::string> generic_fillers = {
      "I contacted the seller twice but got no answer.",
      "This is really disappointing for the price.",
      "I expect a refund or a replacement soon.",
      "Delivery itself took more than two weeks.",
      "The tracking page was never updated.",
      "It is not as advertised on the website.",
  };
  std::vector<std::string> reference_affirmed = {
      "The {p} delivered is {def}.",
      "The {p} is {def}.",
      "The {p} arrived {def}.",
  };
  std::vector<std::string> reference_negated = {
      "The {p} is not {def}.",
      "The {p} delivered is not {def}.",
  };
  std::vector<std::string> reference_tails = {
      "Customer asks for a refund.",
      "Customer wants a replacement.",
  };
};

const Banks& banks() {
  static const Banks b;
  return b;
}

std::string fill(std::string_view tpl, std::string_view key, std::string_view value) {
  std::string out;
  out.reserve(tpl.size() + value.size());
  std::size_t pos = 0;
  while (pos < tpl.size()) {
    const std::size_t hit = tpl.find(key, pos);
    if (hit == std::string_view::npos) {
      out.append(tpl.substr(pos));
      break;
    }
    out.append(tpl.substr(pos, hit - pos));
    out.append(value);
    pos = hit + key.size();
  }
  return out;
}

const std::string& pick(const std::vector<std::string>& bank, Rng& rng) {
  return bank[rng.index_below(bank.size())];
}

LabeledExample generate_one(const CorpusSpec& spec, std::size_t index) {
  Rng rng = Rng::derive(spec.seed, index);
  const Banks& b = banks();

  const auto& pool = spec.entity_pool;
  const std::size_t primary_idx = rng.index_below(pool.size());
  const auto& [primary, primary_type] = pool[primary_idx];

  // Distractors: distinct from the primary and from each other; the first one
  // shares the primary's type when the pool allows, so in-document entity
  // swaps always have a same-type candidate.
  std::vector<std::size_t> others;
  std::vector<std::size_t> same_type;
  for (std::size_t i = 0; i < pool.size(); ++i) {
    if (i == primary_idx) continue;
    others.push_back(i);
    if (pool[i].second == primary_type) same_type.push_back(i);
  }
  const int span = spec.max_distractors - spec.min_distractors + 1;
  std::size_t want = static_cast<std::size_t>(spec.min_distractors) +
                     rng.index_below(static_cast<std::size_t>(span));
  want = std::min(want, others.size());

  std::vector<std::size_t> chosen;
  if (!same_type.empty()) {
    chosen.push_back(same_type[rng.index_below(same_type.size())]);
  }
  std::vector<std::size_t> rest;
  for (std::size_t i : others) {
    if (chosen.empty() || i != chosen.front()) rest.push_back(i);
  }
  rng.shuffle(rest);
  for (std::size_t i : rest) {
    if (chosen.size() >= want) break;
    chosen.push_back(i);
  }

  LabeledExample ex;
  char idbuf[16];
  std::snprintf(idbuf, sizeof(idbuf), "ex-%06zu", index);
  ex.id = idbuf;
  ex.primary_entity = primary;
  ex.entity_type = primary_type;
  for (std::size_t i : chosen) ex.distractors.emplace_back(pool[i].first, pool[i].second);

  const DefectEntry& defect = spec.defect_pool[rng.index_below(spec.defect_pool.size())];
  ex.defect_phrase = defect.phrase;
  ex.defect_polarity = rng.uniform01() < spec.negated_fraction ? DefectPolarity::kNegated
                                                               : DefectPolarity::kAffirmed;

  // Opener; may consume the first distractor.
  std::size_t covered_from = 0;
  std::string opener;
  if (rng.coin()) {
    opener = fill(fill(pick(b.openers_with_distractor, rng), "{p}", primary), "{d}",
                  ex.distractors.front().first);
    covered_from = 1;
  } else {
    opener = fill(pick(b.openers_plain, rng), "{p}", primary);
  }

  // Defect statement (with its follow-up complaint when the defect is denied).
  std::string defect_sentence;
  if (ex.defect_polarity == DefectPolarity::kAffirmed) {
    defect_sentence = fill(fill(pick(b.defect_affirmed, rng), "{p}", primary), "{def}", defect.phrase);
  } else {
    defect_sentence = fill(fill(pick(b.defect_negated, rng), "{p}", primary), "{def}", defect.phrase);
    defect_sentence += " " + pick(b.negated_complaints, rng);
  }

  std::vector<std::string> middle;
  middle.push_back(defect_sentence);
  for (std::size_t i = covered_from; i < ex.distractors.size(); ++i) {
    middle.push_back(fill(pick(b.distractor_fillers, rng), "{d}", ex.distractors[i].first));
  }
  const std::size_t n_generic = 1 + rng.index_below(2);
  for (std::size_t g = 0; g < n_generic; ++g) {
    middle.push_back(pick(b.generic_fillers, rng));
  }
  rng.shuffle(middle);

  ex.source = opener;
  for (const std::string& s : middle) {
    ex.source += " ";
    ex.source += s;
  }

  const auto& ref_bank = ex.defect_polarity == DefectPolarity::kAffirmed ? b.reference_affirmed
                                                                         : b.reference_negated;
  ex.reference = fill(fill(pick(ref_bank, rng), "{p}", primary), "{def}", defect.phrase);
  if (rng.uniform01() < 0.3) {
    ex.reference += " " + pick(b.reference_tails, rng);
  }
  return ex;
}

}  // namespace

std::vector<LabeledExample> generate_corpus(const CorpusSpec& spec) {
  spec.validate();
  std::vector<LabeledExample> out;
  out.reserve(spec.n_examples);
  for (std::size_t i = 0; i < spec.n_examples; ++i) out.push_back(generate_one(spec, i));
  return out;
}

std::string example_to_json_line(const LabeledExample& ex) {
  json j;
  j["id"] = ex.id;
  j["source"] = ex.source;
  j["reference"] = ex.reference;
  j["primary_entity"] = ex.primary_entity;
  j["entity_type"] = to_string(ex.entity_type);
  json distractors = json::array();
  for (const auto& [name, type] : ex.distractors) {
    distractors.push_back(json::array({name, to_string(type)}));
  }
  j["distractors"] = std::move(distractors);
  j["defect_phrase"] = ex.defect_phrase;
  j["defect_polarity"] = to_string(ex.defect_polarity);
  return j.dump();
}

LabeledExample example_from_json_line(const std::string& line, std::size_t line_no) {
  json j;
  try {
    j = json::parse(line);
  } catch (const json::parse_error& e) {
    throw SchemaError(line_no, std::string("malformed JSON: ") + e.what());
  }
  auto require = [&](const char* key) -> const json& {
    auto it = j.find(key);
    if (it == j.end()) {
      throw SchemaError(line_no, std::string("missing required field '") + key + "'");
    }
    return *it;
  };
  LabeledExample ex;
  try {
    ex.id = require("id").get<std::string>();
    ex.source = require("source").get<std::string>();
    ex.reference = require("reference").get<std::string>();
    ex.primary_entity = require("primary_entity").get<std::string>();
    ex.entity_type = entity_type_from_string(require("entity_type").get<std::string>());
    for (const auto& pair : require("distractors")) {
      if (!pair.is_array() || pair.size() != 2) {
        throw SchemaError(line_no, "distractors entries must be [name, type] pairs");
      }
      ex.distractors.emplace_back(pair[0].get<std::string>(),
                                  entity_type_from_string(pair[1].get<std::string>()));
    }
    ex.defect_phrase = require("defect_phrase").get<std::string>();
    ex.defect_polarity = polarity_from_string(require("defect_polarity").get<std::string>());
  } catch (const json::exception& e) {
    throw SchemaError(line_no, std::string("bad field value: ") + e.what());
  }
  return ex;
}

void save_corpus(const std::vector<LabeledExample>& examples, const std::string& path) {
  std::string out;
  for (const LabeledExample& ex : examples) {
    out += example_to_json_line(ex);
    out += '\n';
  }
  atomic_write_file(path, out);
}

std::vector<LabeledExample> load_corpus(const std::string& path) {
  std::vector<LabeledExample> out;
  std::size_t line_no = 0;
  for (const std::string& line : read_lines(path)) {
    ++line_no;
    if (line.empty()) continue;
    out.push_back(example_from_json_line(line, line_no));
  }
  return out;
}

std::pair<std::vector<LabeledExample>, bool> load_examples_flexible(const std::string& path) {
  std::vector<LabeledExample> out;
  bool labeled = true;
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
    const bool has_gold = j.contains("primary_entity") && j.contains("entity_type") &&
                          j.contains("distractors") && j.contains("defect_phrase") &&
                          j.contains("defect_polarity");
    if (has_gold) {
      out.push_back(example_from_json_line(line, line_no));
      continue;
    }
    labeled = false;
    LabeledExample ex;
    try {
      ex.id = j.at("id").get<std::string>();
      ex.source = j.at("source").get<std::string>();
      ex.reference = j.at("reference").get<std::string>();
    } catch (const json::exception& e) {
      throw SchemaError(line_no, std::string("missing required field: ") + e.what());
    }
    out.push_back(std::move(ex));
  }
  return {std::move(out), labeled};
}

std::pair<std::vector<LabeledExample>, std::vector<LabeledExample>> split_corpus(
    const std::vector<LabeledExample>& examples, double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw ValidationError("train_fraction", "must lie strictly between 0 and 1");
  }
  std::vector<std::size_t> order(examples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  Rng rng(seed);
  rng.shuffle(order);

  const std::size_t n_train =
      static_cast<std::size_t>(std::floor(train_fraction * static_cast<double>(examples.size())));
  std::pair<std::vector<LabeledExample>, std::vector<LabeledExample>> out;
  out.first.reserve(n_train);
  out.second.reserve(examples.size() - n_train);
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_train ? out.first : out.second).push_back(examples[order[i]]);
  }
  return out;
}

}  // namespace contrasum::corpus
