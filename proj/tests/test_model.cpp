#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "contrasum/errors.hpp"
#include "contrasum/fsio.hpp"
#include "contrasum/model.hpp"
#include "contrasum/vocab.hpp"
#include "support/testutil.hpp"

using namespace contrasum;
using namespace contrasum::s2s;

namespace {

Vocabulary tiny_vocab() {
  return Vocabulary::build({"the mouse delivered is broken . it works with my laptop",
                            "the mouse is not broken . milk is expired"});
}

ModelConfig tiny_config(const Vocabulary& vocab, Precision precision = Precision::kF64) {
  ModelConfig mc;
  mc.d_model = 16;
  mc.n_heads = 2;
  mc.n_enc_layers = 1;
  mc.n_dec_layers = 1;
  mc.d_ff = 32;
  mc.max_seq_len = 24;
  mc.vocab_size = static_cast<int>(vocab.size());
  mc.init_seed = 7;
  mc.precision = precision;
  return mc;
}

}  // namespace

TEST_CASE("word tokenization splits words and punctuation, case-folded") {
  const auto toks = word_tokenize("Milk is expired.");
  REQUIRE(toks.size() == 4);
  CHECK(toks[0] == "milk");
  CHECK(toks[1] == "is");
  CHECK(toks[2] == "expired");
  CHECK(toks[3] == ".");

  const auto apostrophe = word_tokenize("don't look");
  REQUIRE(apostrophe.size() == 2);
  CHECK(apostrophe[0] == "don't");
}

TEST_CASE("unknown words map to UNK") {
  const Vocabulary vocab = tiny_vocab();
  const auto ids = tokenize("the zebra is broken", vocab);
  REQUIRE(ids.size() == 4);
  CHECK(ids[1] == kUnkId);
  CHECK(ids[0] != kUnkId);
}

TEST_CASE("tokenize . detokenize . tokenize is tokenize") {
  const Vocabulary vocab = tiny_vocab();
  for (const char* text : {"The mouse IS broken.", "milk is expired .", "it works. it works."}) {
    const auto once = tokenize(text, vocab);
    const auto again = tokenize(detokenize(once, vocab), vocab);
    CHECK(once == again);
  }
}

TEST_CASE("vocabulary reserves the special tokens") {
  const Vocabulary vocab = tiny_vocab();
  CHECK(vocab.token_at(kPadId) == "<pad>");
  CHECK(vocab.token_at(kBosId) == "<bos>");
  CHECK(vocab.token_at(kEosId) == "<eos>");
  CHECK(vocab.token_at(kUnkId) == "<unk>");
  CHECK(Vocabulary::from_tokens(vocab.tokens()).tokens() == vocab.tokens());
  CHECK_THROWS_AS(Vocabulary::from_tokens({"a", "b", "c", "d"}), ContractError);
}

TEST_CASE("forward rows are log-probability distributions") {
  const Vocabulary vocab = tiny_vocab();
  const TransformerModel model(tiny_config(vocab));
  const auto src = tokenize("the mouse delivered is broken .", vocab);
  const auto tgt = tokenize("the mouse is broken .", vocab);

  const ScoredOutput scored = model.forward(src, tgt);
  CHECK(scored.target_length == tgt.size() + 1);  // EOS framing
  REQUIRE(scored.target_tokens.size() == scored.target_length);
  CHECK(scored.target_tokens.back() == kEosId);
  for (std::size_t t = 0; t < scored.target_length; ++t) {
    double sum = 0.0;
    for (std::size_t v = 0; v < scored.vocab_size; ++v) {
      sum += std::exp(scored.logprobs[t * scored.vocab_size + v]);
    }
    CHECK(std::abs(sum - 1.0) < 1e-6);
  }
}

TEST_CASE("forward is deterministic given parameters") {
  const Vocabulary vocab = tiny_vocab();
  const TransformerModel model(tiny_config(vocab));
  const auto src = tokenize("milk is expired", vocab);
  const auto tgt = tokenize("milk is expired", vocab);
  const ScoredOutput a = model.forward(src, tgt);
  const ScoredOutput b = model.forward(src, tgt);
  CHECK(a.logprobs == b.logprobs);
}

TEST_CASE("identical seeds build identical models") {
  const Vocabulary vocab = tiny_vocab();
  const TransformerModel a(tiny_config(vocab));
  const TransformerModel b(tiny_config(vocab));
  CHECK(a.params_f64() == b.params_f64());
}

TEST_CASE("over-length inputs raise an explicit length error") {
  const Vocabulary vocab = tiny_vocab();
  const TransformerModel model(tiny_config(vocab));
  const std::vector<int> long_src(25, kUnkId);
  const std::vector<int> ok_src = {kUnkId};
  const std::vector<int> long_tgt(24, kUnkId);  // +BOS exceeds 24
  CHECK_THROWS_AS(model.forward(long_src, ok_src), LengthError);
  CHECK_THROWS_AS(model.forward(ok_src, long_tgt), LengthError);
  CHECK_THROWS_AS(model.forward(std::vector<int>{}, ok_src), LengthError);
  CHECK_THROWS_AS(model.generate(ok_src, 64), LengthError);
}

TEST_CASE("token ids outside the vocabulary are rejected") {
  const Vocabulary vocab = tiny_vocab();
  const TransformerModel model(tiny_config(vocab));
  const std::vector<int> bad = {static_cast<int>(vocab.size()) + 3};
  CHECK_THROWS_AS(model.forward(bad, bad), ContractError);
}

TEST_CASE("greedy decode respects max_len and is deterministic") {
  const Vocabulary vocab = tiny_vocab();
  const TransformerModel model(tiny_config(vocab));
  const auto src = tokenize("the mouse is broken", vocab);
  CHECK(model.generate(src, 1).size() <= 1);
  const auto a = model.generate(src, 10);
  const auto b = model.generate(src, 10);
  CHECK(a == b);
  CHECK(a.size() <= 10);
}

TEST_CASE("extended-precision scoring agrees with the double path") {
  const Vocabulary vocab = tiny_vocab();
  const TransformerModel model(tiny_config(vocab));
  const auto src = tokenize("the mouse delivered is broken", vocab);
  const auto tgt = tokenize("the mouse is broken", vocab);

  const ScoredOutput scored = model.forward(src, tgt);
  double ce = 0.0;
  for (std::size_t t = 0; t < scored.target_length; ++t) {
    ce -= scored.logprob_at(t, scored.target_tokens[t]);
  }
  ce /= static_cast<double>(scored.target_length);

  const long double ce_ext = model.cross_entropy_extended(src, tgt, model.params_f64());
  CHECK(std::abs(static_cast<double>(ce_ext) - ce) < 1e-9);
}

TEST_CASE("cross_entropy_backward returns the same loss as forward scoring") {
  const Vocabulary vocab = tiny_vocab();
  const TransformerModel model(tiny_config(vocab));
  const auto src = tokenize("milk is expired .", vocab);
  const auto tgt = tokenize("milk is expired", vocab);

  const ScoredOutput scored = model.forward(src, tgt);
  double ce = 0.0;
  for (std::size_t t = 0; t < scored.target_length; ++t) {
    ce -= scored.logprob_at(t, scored.target_tokens[t]);
  }
  ce /= static_cast<double>(scored.target_length);

  std::vector<double> grad(model.param_count(), 0.0);
  const double ce_bwd = model.cross_entropy_backward(src, tgt, 1.0, grad);
  CHECK(ce_bwd == doctest::Approx(ce).epsilon(1e-12));

  double norm = 0.0;
  for (double g : grad) norm += g * g;
  CHECK(norm > 0.0);
}

TEST_CASE("checkpoints round-trip model, vocabulary, and parameters") {
  testutil::TempDir dir;
  const Vocabulary vocab = tiny_vocab();
  const TransformerModel model(tiny_config(vocab));
  const std::string path = dir.file("model.ckpt");
  save_checkpoint(path, model, vocab);

  const Checkpoint ckpt = load_checkpoint(path);
  CHECK(ckpt.vocab_tokens == vocab.tokens());
  CHECK(ckpt.config.d_model == 16);
  CHECK(ckpt.config.precision == Precision::kF64);
  CHECK(ckpt.params == model.params_f64());

  const auto restored = model_from_checkpoint(ckpt);
  CHECK(restored->params_f64() == model.params_f64());
}

TEST_CASE("f32 checkpoints restore the same parameters") {
  testutil::TempDir dir;
  const Vocabulary vocab = tiny_vocab();
  const TransformerModel model(tiny_config(vocab, Precision::kF32));
  const std::string path = dir.file("model32.ckpt");
  save_checkpoint(path, model, vocab);
  const auto restored = model_from_checkpoint(load_checkpoint(path));
  CHECK(restored->config().precision == Precision::kF32);
  CHECK(restored->params_f64() == model.params_f64());
}

TEST_CASE("corrupt checkpoints are rejected") {
  testutil::TempDir dir;
  const std::string path = dir.file("bad.ckpt");
  atomic_write_file(path, "definitely not a checkpoint");
  CHECK_THROWS_AS(load_checkpoint(path), SchemaError);

  const Vocabulary vocab = tiny_vocab();
  const TransformerModel model(tiny_config(vocab));
  const std::string good = dir.file("good.ckpt");
  save_checkpoint(good, model, vocab);
  std::string bytes = read_file(good);
  bytes[20] = 'z';  // clobber the version field region of the header
  atomic_write_file(path, bytes);
  CHECK_THROWS_AS(load_checkpoint(path), SchemaError);
}

TEST_CASE("model config validation") {
  const Vocabulary vocab = tiny_vocab();
  ModelConfig mc = tiny_config(vocab);
  mc.d_model = 15;  // not divisible by n_heads
  CHECK_THROWS_AS(TransformerModel{mc}, ValidationError);
  mc = tiny_config(vocab);
  mc.vocab_size = 2;
  CHECK_THROWS_AS(TransformerModel{mc}, ValidationError);
}
