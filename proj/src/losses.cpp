#include "contrasum/losses.hpp"

#include <algorithm>

#include "contrasum/errors.hpp"

namespace contrasum::losses {

using s2s::ScoredOutput;

std::string to_string(Variant v) {
  switch (v) {
    case Variant::kOrdinary: return "ORDINARY";
    case Variant::kDc: return "DC";
    case Variant::kCn: return "CN";
    case Variant::kCc: return "CC";
  }
  return "ORDINARY";
}

Variant variant_from_string(const std::string& s) {
  if (s == "ORDINARY") return Variant::kOrdinary;
  if (s == "DC") return Variant::kDc;
  if (s == "CN") return Variant::kCn;
  if (s == "CC") return Variant::kCc;
  throw ValidationError("loss_variant", "unknown variant '" + s + "'");
}

void LossConfig::validate() const {
  if (alpha < 0.0) throw ValidationError("alpha", "must be >= 0");
  if (margin < 0.0) throw ValidationError("margin", "must be >= 0");
}

LossConfig LossConfig::from_config(const KvConfig& cfg) {
  const Variant variant = variant_from_string(cfg.get_or("loss_variant", "ORDINARY"));
  LossConfig out;
  switch (variant) {
    case Variant::kOrdinary: out = ordinary(); break;
    case Variant::kDc: out = dc_default(); break;
    case Variant::kCn: out = cn_default(); break;
    case Variant::kCc: out = cc_default(); break;
  }
  out.alpha = cfg.get_real_or("alpha", out.alpha);
  out.margin = cfg.get_real_or("margin", out.margin);
  out.validate();
  return out;
}

double cross_entropy(const ScoredOutput& scored, std::span<const int> target) {
  if (target.size() != scored.target_length) {
    throw ContractError("cross_entropy: target length " + std::to_string(target.size()) +
                        " does not match scored length " + std::to_string(scored.target_length));
  }
  double sum = 0.0;
  std::size_t active = 0;
  for (std::size_t t = 0; t < target.size(); ++t) {
    if (target[t] == s2s::kPadId) continue;
    sum -= scored.logprob_at(t, target[t]);
    ++active;
  }
  return active > 0 ? sum / static_cast<double>(active) : 0.0;
}

double loss_dc(double l_pos, double l_neg, double alpha) { return l_pos - alpha * l_neg; }

double loss_cn(double l_pos, double l_neg, double alpha, double margin) {
  return l_pos + alpha * std::max(margin - l_neg, 0.0);
}

double loss_cc(double l_pos, double l_neg, double alpha, double margin) {
  return l_pos + alpha * std::max(l_pos + margin - l_neg, 0.0);
}

TermWeights term_weights(double l_pos, double l_neg, const LossConfig& config) {
  TermWeights w;
  switch (config.variant) {
    case Variant::kOrdinary:
      break;
    case Variant::kDc:
      w.w_neg = -config.alpha;
      break;
    case Variant::kCn:
      w.hinge_active = l_neg < config.margin;
      if (w.hinge_active) w.w_neg = -config.alpha;
      break;
    case Variant::kCc:
      w.hinge_active = l_pos + config.margin - l_neg > 0.0;
      if (w.hinge_active) {
        w.w_pos = 1.0 + config.alpha;
        w.w_neg = -config.alpha;
      }
      break;
  }
  return w;
}

LossValue combine(double l_pos, double l_neg, const LossConfig& config) {
  LossValue out;
  out.l_pos = l_pos;
  out.l_neg = l_neg;
  switch (config.variant) {
    case Variant::kOrdinary:
      out.total = l_pos;
      break;
    case Variant::kDc:
      out.total = loss_dc(l_pos, l_neg, config.alpha);
      break;
    case Variant::kCn:
      out.total = loss_cn(l_pos, l_neg, config.alpha, config.margin);
      out.hinge_active = l_neg < config.margin;
      break;
    case Variant::kCc:
      out.total = loss_cc(l_pos, l_neg, config.alpha, config.margin);
      out.hinge_active = l_pos + config.margin - l_neg > 0.0;
      break;
  }
  return out;
}

namespace {

struct TokenizedTriplet {
  std::vector<int> d, s_plus, s_minus;
};

TokenizedTriplet tokenize_triplet(const corruption::Triplet& triplet,
                                  const s2s::Vocabulary& vocab) {
  TokenizedTriplet out;
  out.d = s2s::tokenize(triplet.d, vocab);
  out.s_plus = s2s::tokenize(triplet.s_plus, vocab);
  out.s_minus = s2s::tokenize(triplet.s_minus, vocab);
  return out;
}

}  // namespace

LossValue contrastive_objective(const s2s::Seq2SeqModel& model, const corruption::Triplet& triplet,
                                const LossConfig& config, const s2s::Vocabulary& vocab) {
  config.validate();
  const TokenizedTriplet toks = tokenize_triplet(triplet, vocab);
  const ScoredOutput pos = model.forward(toks.d, toks.s_plus);
  const double l_pos = cross_entropy(pos, pos.target_tokens);
  const ScoredOutput neg = model.forward(toks.d, toks.s_minus);
  const double l_neg = cross_entropy(neg, neg.target_tokens);
  return combine(l_pos, l_neg, config);
}

namespace {

void axpy(double a, std::span<const double> x, std::span<double> y) {
  for (std::size_t i = 0; i < x.size(); ++i) y[i] += a * x[i];
}

double forward_ce(const s2s::Seq2SeqModel& model, const std::vector<int>& src,
                  const std::vector<int>& target) {
  const ScoredOutput scored = model.forward(src, target);
  return cross_entropy(scored, scored.target_tokens);
}

}  // namespace

LossValue objective_with_grad(const s2s::Seq2SeqModel& model, const corruption::Triplet& triplet,
                              const LossConfig& config, const s2s::Vocabulary& vocab,
                              std::span<double> grad) {
  config.validate();
  const TokenizedTriplet toks = tokenize_triplet(triplet, vocab);
  const std::size_t n = model.param_count();
  if (grad.size() != n) throw ContractError("objective_with_grad: gradient buffer size mismatch");

  double l_pos = 0.0;
  double l_neg = 0.0;
  switch (config.variant) {
    case Variant::kOrdinary:
      l_pos = model.cross_entropy_backward(toks.d, toks.s_plus, 1.0, grad);
      l_neg = forward_ce(model, toks.d, toks.s_minus);
      break;
    case Variant::kDc:
      l_pos = model.cross_entropy_backward(toks.d, toks.s_plus, 1.0, grad);
      l_neg = model.cross_entropy_backward(toks.d, toks.s_minus, -config.alpha, grad);
      break;
    case Variant::kCn: {
      l_pos = model.cross_entropy_backward(toks.d, toks.s_plus, 1.0, grad);
      // hinge state is only known after measuring l_neg, so the negative
      // branch's unit gradient goes to a scratch buffer first
      thread_local std::vector<double> scratch;
      scratch.assign(n, 0.0);
      l_neg = model.cross_entropy_backward(toks.d, toks.s_minus, 1.0, scratch);
      const TermWeights w = term_weights(l_pos, l_neg, config);
      if (w.w_neg != 0.0) axpy(w.w_neg, scratch, grad);
      break;
    }
    case Variant::kCc: {
      thread_local std::vector<double> scratch_pos;
      thread_local std::vector<double> scratch_neg;
      scratch_pos.assign(n, 0.0);
      scratch_neg.assign(n, 0.0);
      l_pos = model.cross_entropy_backward(toks.d, toks.s_plus, 1.0, scratch_pos);
      l_neg = model.cross_entropy_backward(toks.d, toks.s_minus, 1.0, scratch_neg);
      const TermWeights w = term_weights(l_pos, l_neg, config);
      axpy(w.w_pos, scratch_pos, grad);
      if (w.w_neg != 0.0) axpy(w.w_neg, scratch_neg, grad);
      break;
    }
  }
  return combine(l_pos, l_neg, config);
}

}  // namespace contrasum::losses
