#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "contrasum/errors.hpp"
#include "contrasum/losses.hpp"
#include "contrasum/model.hpp"
#include "contrasum/rng.hpp"
#include "contrasum/trainer.hpp"

using namespace contrasum;
using namespace contrasum::losses;

namespace {

// Synthetic distribution table: per position, probability ~1 on `peaked`.
s2s::ScoredOutput peaked_output(const std::vector<int>& labels, int vocab_size) {
  s2s::ScoredOutput out;
  out.target_length = labels.size();
  out.vocab_size = static_cast<std::size_t>(vocab_size);
  out.target_tokens = labels;
  out.logprobs.assign(out.target_length * out.vocab_size, -1e9);
  for (std::size_t t = 0; t < labels.size(); ++t) {
    out.logprobs[t * out.vocab_size + static_cast<std::size_t>(labels[t])] = 0.0;
  }
  return out;
}

struct TinyFixture {
  s2s::Vocabulary vocab;
  std::unique_ptr<s2s::TransformerModel> model;
  corruption::Triplet triplet;

  TinyFixture() {
    vocab = s2s::Vocabulary::build(
        {"the mouse delivered is broken . it was supposed to work with my laptop .",
         "the mouse is broken .", "the laptop is broken ."});
    s2s::ModelConfig mc;
    mc.d_model = 16;
    mc.n_heads = 2;
    mc.n_enc_layers = 1;
    mc.n_dec_layers = 1;
    mc.d_ff = 32;
    mc.max_seq_len = 32;
    mc.vocab_size = static_cast<int>(vocab.size());
    mc.init_seed = 11;
    model = std::make_unique<s2s::TransformerModel>(mc);

    triplet.id = "fx";
    triplet.d = "The mouse delivered is broken. It was supposed to work with my laptop.";
    triplet.s_plus = "The mouse is broken.";
    triplet.s_minus = "The laptop is broken.";
  }
};

}  // namespace

TEST_CASE("cross entropy of a certain model is zero") {
  const auto scored = peaked_output({5, 6, 7}, 10);
  CHECK(cross_entropy(scored, scored.target_tokens) == doctest::Approx(0.0));
}

TEST_CASE("cross entropy of the uniform distribution is log V") {
  const int v = 10;
  s2s::ScoredOutput out;
  out.target_length = 3;
  out.vocab_size = v;
  out.target_tokens = {1, 2, 3};
  out.logprobs.assign(out.target_length * out.vocab_size, std::log(1.0 / v));
  CHECK(cross_entropy(out, out.target_tokens) == doctest::Approx(std::log(10.0)));
}

TEST_CASE("cross entropy is the mean over positions") {
  s2s::ScoredOutput out;
  out.target_length = 2;
  out.vocab_size = 4;
  out.target_tokens = {1, 2};
  out.logprobs.assign(8, -50.0);
  out.logprobs[0 * 4 + 1] = -std::log(2.0);  // position 0: loss ln 2
  out.logprobs[1 * 4 + 2] = 0.0;             // position 1: loss 0
  CHECK(cross_entropy(out, out.target_tokens) == doctest::Approx(std::log(2.0) / 2.0));
}

TEST_CASE("PAD positions are excluded from the mean") {
  s2s::ScoredOutput out;
  out.target_length = 2;
  out.vocab_size = 4;
  out.target_tokens = {1, s2s::kPadId};
  out.logprobs.assign(8, -50.0);
  out.logprobs[0 * 4 + 1] = -1.5;
  CHECK(cross_entropy(out, out.target_tokens) == doctest::Approx(1.5));
}

TEST_CASE("cross entropy rejects mismatched lengths") {
  const auto scored = peaked_output({1, 2}, 5);
  const std::vector<int> short_target = {1};
  CHECK_THROWS_AS(cross_entropy(scored, short_target), ContractError);
}

TEST_CASE("direct contrast arithmetic") {
  CHECK(loss_dc(2.0, 3.0, 0.05) == doctest::Approx(1.85).epsilon(1e-12));
  CHECK(loss_dc(1.7, 123.0, 0.0) == 1.7);
  CHECK(loss_dc(2.5, 4.0, 1.0) == doctest::Approx(2.5 - 4.0));  // pure difference
  CHECK(loss_dc(1.0, 100.0, 0.5) < 0.0);                        // not clipped
}

TEST_CASE("constrained negative arithmetic") {
  CHECK(loss_cn(2.0, 3.0, 0.5, 2.0) == doctest::Approx(2.0));  // easy negative ignored
  CHECK_FALSE(combine(2.0, 3.0, LossConfig::cn_default()).hinge_active);
  CHECK(loss_cn(2.0, 1.5, 0.5, 2.0) == doctest::Approx(2.25));
  CHECK(combine(2.0, 1.5, LossConfig::cn_default()).hinge_active);
  CHECK(loss_cn(2.0, 2.0, 0.5, 2.0) == doctest::Approx(2.0));  // hinge boundary
  CHECK_FALSE(combine(2.0, 2.0, LossConfig::cn_default()).hinge_active);
}

TEST_CASE("constrained contrast arithmetic") {
  CHECK(loss_cc(1.0, 7.0, 0.5, 5.0) == doctest::Approx(1.0));  // hinge clamps
  CHECK(loss_cc(1.0, 4.0, 0.5, 5.0) == doctest::Approx(2.0));
  CHECK(loss_cc(3.0, 3.0, 0.5, 5.0) == doctest::Approx(3.0 + 0.5 * 5.0));  // l_pos == l_neg
}

TEST_CASE("hinge losses never drop below l_pos, with exact equality conditions") {
  Rng rng(77);
  for (int i = 0; i < 500; ++i) {
    const double l_pos = rng.uniform01() * 6.0;
    const double l_neg = rng.uniform01() * 12.0;
    const double alpha = rng.uniform01() * 2.0;
    const double m = rng.uniform01() * 6.0;

    const double cn = loss_cn(l_pos, l_neg, alpha, m);
    CHECK(cn >= l_pos);
    if (alpha > 0.0) CHECK((cn == l_pos) == (l_neg >= m));

    const double cc = loss_cc(l_pos, l_neg, alpha, m);
    CHECK(cc >= l_pos);
    if (alpha > 0.0) CHECK((cc == l_pos) == (l_neg >= l_pos + m));
  }
}

TEST_CASE("constrained contrast is monotone in both arguments") {
  Rng rng(99);
  for (int i = 0; i < 500; ++i) {
    const double l_pos = rng.uniform01() * 6.0;
    const double l_neg = rng.uniform01() * 12.0;
    const double alpha = rng.uniform01() * 2.0;
    const double m = rng.uniform01() * 6.0;
    const double bump = rng.uniform01() * 3.0;
    // non-increasing in l_neg
    CHECK(loss_cc(l_pos, l_neg + bump, alpha, m) <= loss_cc(l_pos, l_neg, alpha, m) + 1e-12);
    // non-decreasing in l_pos
    CHECK(loss_cc(l_pos + bump, l_neg, alpha, m) + 1e-12 >= loss_cc(l_pos, l_neg, alpha, m));
  }
}

TEST_CASE("alpha zero reduces every variant to the ordinary loss") {
  Rng rng(13);
  for (int i = 0; i < 200; ++i) {
    const double l_pos = rng.uniform01() * 8.0;
    const double l_neg = rng.uniform01() * 8.0;
    const double m = rng.uniform01() * 6.0;
    CHECK(loss_dc(l_pos, l_neg, 0.0) == l_pos);
    CHECK(loss_cn(l_pos, l_neg, 0.0, m) == l_pos);
    CHECK(loss_cc(l_pos, l_neg, 0.0, m) == l_pos);
  }
}

TEST_CASE("term weights match finite differences away from kinks") {
  Rng rng(31);
  const double h = 1e-6;
  for (int i = 0; i < 300; ++i) {
    const double l_pos = 0.5 + rng.uniform01() * 5.0;
    const double l_neg = 0.5 + rng.uniform01() * 10.0;
    for (const LossConfig& cfg :
         {LossConfig::ordinary(), LossConfig::dc_default(), LossConfig::cn_default(),
          LossConfig::cc_default()}) {
      // skip points within h of a hinge kink
      if (cfg.variant == Variant::kCn && std::abs(l_neg - cfg.margin) < 1e-3) continue;
      if (cfg.variant == Variant::kCc && std::abs(l_pos + cfg.margin - l_neg) < 1e-3) continue;

      const TermWeights w = term_weights(l_pos, l_neg, cfg);
      const double d_pos = (combine(l_pos + h, l_neg, cfg).total -
                            combine(l_pos - h, l_neg, cfg).total) /
                           (2.0 * h);
      const double d_neg = (combine(l_pos, l_neg + h, cfg).total -
                            combine(l_pos, l_neg - h, cfg).total) /
                           (2.0 * h);
      CHECK(std::abs(w.w_pos - d_pos) < 1e-8);
      CHECK(std::abs(w.w_neg - d_neg) < 1e-8);
    }
  }
}

TEST_CASE("loss components recombine to the total") {
  Rng rng(55);
  for (int i = 0; i < 200; ++i) {
    const double l_pos = rng.uniform01() * 5.0;
    const double l_neg = rng.uniform01() * 10.0;
    for (const LossConfig& cfg : {LossConfig::ordinary(), LossConfig::dc_default(),
                                  LossConfig::cn_default(), LossConfig::cc_default()}) {
      const LossValue v = combine(l_pos, l_neg, cfg);
      double expected = 0.0;
      switch (cfg.variant) {
        case Variant::kOrdinary: expected = v.l_pos; break;
        case Variant::kDc: expected = loss_dc(v.l_pos, v.l_neg, cfg.alpha); break;
        case Variant::kCn: expected = loss_cn(v.l_pos, v.l_neg, cfg.alpha, cfg.margin); break;
        case Variant::kCc: expected = loss_cc(v.l_pos, v.l_neg, cfg.alpha, cfg.margin); break;
      }
      CHECK(std::abs(v.total - expected) < 1e-9);
    }
  }
}

TEST_CASE("objective: ORDINARY reports l_neg but does not weight it") {
  TinyFixture fx;
  const LossValue v = contrastive_objective(*fx.model, fx.triplet, LossConfig::ordinary(), fx.vocab);
  CHECK(v.total == v.l_pos);
  CHECK(v.l_neg > 0.0);
  CHECK_FALSE(v.hinge_active);
}

TEST_CASE("objective: DC combines the measured cross-entropies") {
  TinyFixture fx;
  const LossConfig cfg = LossConfig::dc_default();
  const LossValue v = contrastive_objective(*fx.model, fx.triplet, cfg, fx.vocab);
  CHECK(v.total == doctest::Approx(loss_dc(v.l_pos, v.l_neg, cfg.alpha)).epsilon(1e-12));
}

TEST_CASE("objective gradients: DC at alpha zero equals ORDINARY exactly") {
  TinyFixture fx;
  std::vector<double> g_ord(fx.model->param_count(), 0.0);
  std::vector<double> g_dc(fx.model->param_count(), 0.0);
  objective_with_grad(*fx.model, fx.triplet, LossConfig::ordinary(), fx.vocab, g_ord);
  LossConfig dc0 = LossConfig::dc_default();
  dc0.alpha = 0.0;
  objective_with_grad(*fx.model, fx.triplet, dc0, fx.vocab, g_dc);
  CHECK(g_ord == g_dc);
}

TEST_CASE("objective gradients: inactive CC hinge matches ORDINARY within 1e-10") {
  TinyFixture fx;
  // Overfit s_plus so l_neg - l_pos exceeds a small margin and the hinge shuts off.
  training::TrainConfig tc;
  tc.learning_rate = 1e-2;
  tc.epochs = 300;
  tc.batch_size = 1;
  tc.optimizer = training::Optimizer::kAdam;
  tc.loss = LossConfig::ordinary();
  std::vector<training::TrainSample> samples = {{"fx", fx.triplet.d, fx.triplet.s_plus, std::nullopt}};
  training::train(samples, *fx.model, tc, fx.vocab);

  LossConfig cc = LossConfig::cc_default();
  cc.margin = 0.1;
  const LossValue v = contrastive_objective(*fx.model, fx.triplet, cc, fx.vocab);
  REQUIRE_FALSE(v.hinge_active);
  REQUIRE(v.l_neg > v.l_pos + cc.margin);

  std::vector<double> g_cc(fx.model->param_count(), 0.0);
  std::vector<double> g_ord(fx.model->param_count(), 0.0);
  objective_with_grad(*fx.model, fx.triplet, cc, fx.vocab, g_cc);
  objective_with_grad(*fx.model, fx.triplet, LossConfig::ordinary(), fx.vocab, g_ord);
  double max_diff = 0.0;
  for (std::size_t i = 0; i < g_cc.size(); ++i) {
    max_diff = std::max(max_diff, std::abs(g_cc[i] - g_ord[i]));
  }
  CHECK(max_diff < 1e-10);
}

TEST_CASE("loss config validation and file keys") {
  LossConfig bad;
  bad.alpha = -1.0;
  CHECK_THROWS_AS(bad.validate(), ValidationError);

  const auto kv = KvConfig::parse_string("loss_variant = CC\n");
  const LossConfig cc = LossConfig::from_config(kv);
  CHECK(cc.variant == Variant::kCc);
  CHECK(cc.alpha == 0.5);
  CHECK(cc.margin == 5.0);

  const auto kv2 = KvConfig::parse_string("loss_variant = DC\nalpha = 0.2\n");
  const LossConfig dc = LossConfig::from_config(kv2);
  CHECK(dc.alpha == 0.2);

  const auto kv3 = KvConfig::parse_string("loss_variant = CN\n");
  const LossConfig cn = LossConfig::from_config(kv3);
  CHECK(cn.alpha == 0.5);
  CHECK(cn.margin == 2.0);
}
