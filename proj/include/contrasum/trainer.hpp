#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "contrasum/corpus.hpp"
#include "contrasum/corruption.hpp"
#include "contrasum/losses.hpp"
#include "contrasum/model.hpp"

namespace contrasum::training {

// A training sample; s_minus is absent for examples no corruption applied to
// (those train with the ordinary loss).
struct TrainSample {
  std::string id;
  std::string d;
  std::string s_plus;
  std::optional<std::string> s_minus;
};

std::vector<TrainSample> samples_from_triplets(const std::vector<corruption::Triplet>& triplets);

// Adds positive-only samples for skipped examples, looked up by id.
void append_skipped(std::vector<TrainSample>& samples,
                    const std::vector<corpus::LabeledExample>& examples,
                    const std::vector<corruption::SkipRecord>& skips);

enum class Optimizer { kSgd, kAdam };

std::string to_string(Optimizer o);
Optimizer optimizer_from_string(const std::string& s);

struct TrainConfig {
  double learning_rate = 5e-5;
  int epochs = 20;
  int batch_size = 16;
  losses::LossConfig loss;
  std::uint64_t seed = 0;
  int checkpoint_every = 0;  // steps; 0 disables periodic checkpoints
  s2s::Precision precision = s2s::Precision::kF64;
  Optimizer optimizer = Optimizer::kSgd;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;

  void validate() const;
  static TrainConfig from_config(const KvConfig& cfg);
};

struct StepRecord {
  int step = 0;          // 1-based optimizer step
  double total = 0.0;    // batch mean of per-sample totals
  double l_pos = 0.0;    // batch mean
  double l_neg = 0.0;    // mean over samples carrying s_minus (0 if none)
  double hinge_frac = 0.0;
};

struct TrainHistory {
  std::vector<StepRecord> steps;

  void save_csv(const std::string& path) const;  // header: step,total,l_pos,l_neg,hinge_frac
};

using CheckpointSink = std::function<void(int step, const s2s::Seq2SeqModel& model)>;

// Batched gradient descent on the configured loss. Epoch shuffling derives
// from (seed, epoch); samples inside a batch are reduced in index order, so
// runs are bit-reproducible in F64. Throws TrainAbort on a non-finite loss.
TrainHistory train(const std::vector<TrainSample>& samples, s2s::Seq2SeqModel& model,
                   const TrainConfig& config, const s2s::Vocabulary& vocab,
                   const CheckpointSink& sink = {});

// Central finite differences on a random parameter sample versus the analytic
// gradient of the contrastive objective. Returns the max relative error, with
// an absolute fallback below magnitude 1e-8. Requires an F64 model.
double gradient_check(s2s::Seq2SeqModel& model, const corruption::Triplet& triplet,
                      const losses::LossConfig& loss_config, const s2s::Vocabulary& vocab,
                      double epsilon = 1e-4, int n_params_sampled = 200, std::uint64_t seed = 0);

}  // namespace contrasum::training
