#pragma once

#include <span>
#include <string>

#include "contrasum/corruption.hpp"
#include "contrasum/kvconfig.hpp"
#include "contrasum/model.hpp"

namespace contrasum::losses {

enum class Variant { kOrdinary, kDc, kCn, kCc };

std::string to_string(Variant v);
Variant variant_from_string(const std::string& s);

struct LossConfig {
  Variant variant = Variant::kOrdinary;
  double alpha = 0.0;
  double margin = 0.0;  // unused for ORDINARY / DC

  void validate() const;

  static LossConfig ordinary() { return {Variant::kOrdinary, 0.0, 0.0}; }
  static LossConfig dc_default() { return {Variant::kDc, 0.05, 0.0}; }
  static LossConfig cn_default() { return {Variant::kCn, 0.5, 2.0}; }
  static LossConfig cc_default() { return {Variant::kCc, 0.5, 5.0}; }

  // Config keys: loss_variant, alpha, margin.
  static LossConfig from_config(const KvConfig& cfg);
};

struct LossValue {
  double total = 0.0;
  double l_pos = 0.0;
  double l_neg = 0.0;
  bool hinge_active = false;
};

// Mean over non-PAD positions of -logprob[t, target[t]].
double cross_entropy(const s2s::ScoredOutput& scored, std::span<const int> target);

double loss_dc(double l_pos, double l_neg, double alpha);
double loss_cn(double l_pos, double l_neg, double alpha, double margin);
double loss_cc(double l_pos, double l_neg, double alpha, double margin);

// d(total)/d(l_pos) and d(total)/d(l_neg); the zero branch's subgradient is
// used exactly at hinge kinks.
struct TermWeights {
  double w_pos = 1.0;
  double w_neg = 0.0;
  bool hinge_active = false;
};

TermWeights term_weights(double l_pos, double l_neg, const LossConfig& config);

LossValue combine(double l_pos, double l_neg, const LossConfig& config);

// l_pos / l_neg are teacher-forced cross-entropies of s+ and s- against the
// same source; the variant formula combines them. ORDINARY reports l_neg but
// leaves it unweighted.
LossValue contrastive_objective(const s2s::Seq2SeqModel& model, const corruption::Triplet& triplet,
                                const LossConfig& config, const s2s::Vocabulary& vocab);

// Same value, with the objective's parameter gradient accumulated into grad.
LossValue objective_with_grad(const s2s::Seq2SeqModel& model, const corruption::Triplet& triplet,
                              const LossConfig& config, const s2s::Vocabulary& vocab,
                              std::span<double> grad);

}  // namespace contrasum::losses
