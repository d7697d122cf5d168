#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <set>
#include <string>

#include "contrasum/corpus.hpp"
#include "contrasum/errors.hpp"
#include "contrasum/fsio.hpp"
#include "contrasum/text.hpp"
#include "support/testutil.hpp"

using namespace contrasum;
using namespace contrasum::corpus;

namespace {

CorpusSpec small_spec(std::size_t n, std::uint64_t seed) {
  CorpusSpec spec = CorpusSpec::defaults();
  spec.n_examples = n;
  spec.seed = seed;
  return spec;
}

std::string serialize_all(const std::vector<LabeledExample>& xs) {
  std::string out;
  for (const auto& ex : xs) out += example_to_json_line(ex) + "\n";
  return out;
}

}  // namespace

TEST_CASE("generation is deterministic given the spec") {
  const auto a = generate_corpus(small_spec(3, 7));
  const auto b = generate_corpus(small_spec(3, 7));
  CHECK(serialize_all(a) == serialize_all(b));
  CHECK(a.size() == 3);
}

TEST_CASE("primary entities come from the pool") {
  CorpusSpec spec = CorpusSpec::defaults();
  spec.entity_pool = {{"mouse", EntityType::kProduct}, {"laptop", EntityType::kProduct}};
  spec.n_examples = 50;
  spec.min_distractors = 1;
  spec.max_distractors = 1;
  spec.seed = 3;
  for (const auto& ex : generate_corpus(spec)) {
    CHECK((ex.primary_entity == "mouse" || ex.primary_entity == "laptop"));
    REQUIRE(ex.distractors.size() == 1);
    CHECK(ex.distractors[0].first != ex.primary_entity);
  }
}

TEST_CASE("negated_fraction boundaries") {
  CorpusSpec zero = small_spec(200, 11);
  zero.negated_fraction = 0.0;
  for (const auto& ex : generate_corpus(zero)) {
    CHECK(ex.defect_polarity == DefectPolarity::kAffirmed);
  }
  CorpusSpec one = small_spec(200, 11);
  one.negated_fraction = 1.0;
  for (const auto& ex : generate_corpus(one)) {
    CHECK(ex.defect_polarity == DefectPolarity::kNegated);
  }
}

TEST_CASE("generated examples satisfy the gold invariants") {
  const auto examples = generate_corpus(small_spec(300, 42));
  std::set<std::string> ids;
  for (const auto& ex : examples) {
    ids.insert(ex.id);
    CHECK(ex.source.find(ex.primary_entity) != std::string::npos);
    for (const auto& [name, type] : ex.distractors) {
      (void)type;
      CHECK(ex.source.find(name) != std::string::npos);
    }
    CHECK(ex.reference.find(ex.primary_entity) != std::string::npos);

    const auto pos = text::find_word(ex.reference, ex.defect_phrase);
    REQUIRE(pos.has_value());
    const bool negated_in_ref =
        *pos >= 4 && ex.reference.compare(*pos - 4, 4, "not ") == 0;
    if (ex.defect_polarity == DefectPolarity::kNegated) {
      CHECK(negated_in_ref);
    } else {
      CHECK_FALSE(negated_in_ref);
    }
  }
  CHECK(ids.size() == examples.size());
}

TEST_CASE("spec validation names the offending field") {
  CorpusSpec spec = CorpusSpec::defaults();
  spec.n_examples = 0;
  CHECK_THROWS_AS(generate_corpus(spec), ValidationError);
  try {
    generate_corpus(spec);
  } catch (const ValidationError& e) {
    CHECK(e.field() == "n_examples");
  }

  spec = small_spec(5, 0);
  spec.negated_fraction = 1.5;
  try {
    generate_corpus(spec);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(e.field() == "negated_fraction");
  }

  spec = small_spec(5, 0);
  spec.min_distractors = 0;
  try {
    generate_corpus(spec);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(e.field() == "distractor_range");
  }

  spec = small_spec(5, 0);
  spec.entity_pool = {{"mouse", EntityType::kProduct}};
  try {
    generate_corpus(spec);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(e.field() == "entity_pool");
  }

  spec = small_spec(5, 0);
  spec.defect_pool.clear();
  try {
    generate_corpus(spec);
    FAIL("expected ValidationError");
  } catch (const ValidationError& e) {
    CHECK(e.field() == "defect_pool");
  }
}

TEST_CASE("save then load round-trips") {
  testutil::TempDir dir;
  const auto examples = generate_corpus(small_spec(100, 5));
  const std::string path = dir.file("corpus.jsonl");
  save_corpus(examples, path);
  const auto loaded = load_corpus(path);
  CHECK(loaded == examples);
}

TEST_CASE("empty corpus round-trips through an empty file") {
  testutil::TempDir dir;
  const std::string path = dir.file("empty.jsonl");
  save_corpus({}, path);
  CHECK(load_corpus(path).empty());
}

TEST_CASE("malformed line reports its line number") {
  testutil::TempDir dir;
  const std::string path = dir.file("bad.jsonl");
  const auto examples = generate_corpus(small_spec(1, 9));
  atomic_write_file(path, example_to_json_line(examples[0]) + "\nnot json at all\n");
  try {
    load_corpus(path);
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    CHECK(e.line() == 2);
  }
}

TEST_CASE("missing required field reports field and line") {
  testutil::TempDir dir;
  const std::string path = dir.file("missing.jsonl");
  atomic_write_file(path,
                    R"({"id":"x","source":"s","primary_entity":"p","entity_type":"PRODUCT",)"
                    R"("distractors":[],"defect_phrase":"broken","defect_polarity":"AFFIRMED"})"
                    "\n");
  try {
    load_corpus(path);
    FAIL("expected SchemaError");
  } catch (const SchemaError& e) {
    CHECK(e.line() == 1);
    CHECK(std::string(e.what()).find("reference") != std::string::npos);
  }
}

TEST_CASE("split sizes follow the floor rule") {
  std::vector<LabeledExample> examples(10000);
  for (std::size_t i = 0; i < examples.size(); ++i) examples[i].id = "ex-" + std::to_string(i);
  auto [train, test] = split_corpus(examples, 0.85, 1);
  CHECK(train.size() == 8500);
  CHECK(test.size() == 1500);

  examples.resize(20);
  auto [train20, test20] = split_corpus(examples, 0.85, 1);
  CHECK(train20.size() == 17);
  CHECK(test20.size() == 3);
}

TEST_CASE("split is deterministic and partitions the input") {
  for (std::size_t n : {2u, 3u, 10u, 57u}) {
    std::vector<LabeledExample> examples(n);
    for (std::size_t i = 0; i < n; ++i) examples[i].id = "ex-" + std::to_string(i);
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
      auto [train_a, test_a] = split_corpus(examples, 0.7, seed);
      auto [train_b, test_b] = split_corpus(examples, 0.7, seed);
      CHECK(serialize_all(train_a) == serialize_all(train_b));
      CHECK(serialize_all(test_a) == serialize_all(test_b));

      std::set<std::string> seen;
      for (const auto& ex : train_a) seen.insert(ex.id);
      for (const auto& ex : test_a) {
        CHECK(seen.count(ex.id) == 0);
        seen.insert(ex.id);
      }
      CHECK(seen.size() == n);
    }
  }
}

TEST_CASE("split rejects out-of-range fractions") {
  std::vector<LabeledExample> examples(4);
  CHECK_THROWS_AS(split_corpus(examples, 0.0, 1), ValidationError);
  CHECK_THROWS_AS(split_corpus(examples, 1.0, 1), ValidationError);
  CHECK_THROWS_AS(split_corpus(examples, 1.5, 1), ValidationError);
}

TEST_CASE("corpus spec parses from a flat config") {
  const auto kv = KvConfig::parse_string(
      "n_examples = 12\n"
      "entity_pool = mouse:PRODUCT, power cord:COMPONENT, acme:BRAND\n"
      "defect_pool = broken/functional, dented\n"
      "negated_fraction = 0.5\n"
      "distractor_range = 1..2\n"
      "seed = 99\n");
  const CorpusSpec spec = CorpusSpec::from_config(kv);
  CHECK(spec.n_examples == 12);
  REQUIRE(spec.entity_pool.size() == 3);
  CHECK(spec.entity_pool[1].first == "power cord");
  CHECK(spec.entity_pool[1].second == EntityType::kComponent);
  REQUIRE(spec.defect_pool.size() == 2);
  CHECK(spec.defect_pool[0].antonym == "functional");
  CHECK_FALSE(spec.defect_pool[1].antonym.has_value());
  CHECK(spec.negated_fraction == 0.5);
  CHECK(spec.min_distractors == 1);
  CHECK(spec.max_distractors == 2);
  CHECK(spec.seed == 99);

  const auto single = KvConfig::parse_string("n_examples = 2\ndistractor_range = 2\n");
  const CorpusSpec s2 = CorpusSpec::from_config(single);
  CHECK(s2.min_distractors == 2);
  CHECK(s2.max_distractors == 2);
}
