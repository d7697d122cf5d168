#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "contrasum/vocab.hpp"

namespace contrasum::s2s {

enum class Precision { kF32, kF64 };

std::string to_string(Precision p);
Precision precision_from_string(const std::string& s);

struct ModelConfig {
  int d_model = 64;
  int n_heads = 2;
  int n_enc_layers = 2;
  int n_dec_layers = 2;
  int d_ff = 128;
  int max_seq_len = 64;
  int vocab_size = 0;
  std::uint64_t init_seed = 0;
  Precision precision = Precision::kF64;

  void validate() const;
};

// Teacher-forced per-position log-probability table. Row t conditions on the
// source and on target positions < t; target_tokens holds the label row
// (target followed by EOS), so row t scores target_tokens[t].
struct ScoredOutput {
  std::size_t target_length = 0;
  std::size_t vocab_size = 0;
  std::vector<double> logprobs;  // row-major [target_length, vocab_size]
  std::vector<int> target_tokens;

  double logprob_at(std::size_t t, int token) const {
    return logprobs[t * vocab_size + static_cast<std::size_t>(token)];
  }
};

struct TensorSpec {
  std::string name;
  std::size_t offset = 0;
  std::size_t size = 0;
};

// Pluggable model contract: the trainer and losses only need teacher-forced
// scoring, a cross-entropy backward pass, greedy decoding, and flat parameter
// access, so other model families can be adapted behind this interface.
class Seq2SeqModel {
 public:
  virtual ~Seq2SeqModel() = default;

  virtual const ModelConfig& config() const = 0;

  virtual std::size_t param_count() const = 0;
  virtual double get_param(std::size_t index) const = 0;
  virtual void set_param(std::size_t index, double value) = 0;
  virtual std::vector<double> params_f64() const = 0;
  virtual void set_params_f64(std::span<const double> values) = 0;
  virtual void apply_param_update(std::span<const double> delta) = 0;  // params += delta
  virtual const std::vector<TensorSpec>& tensors() const = 0;

  // Teacher-forced scoring of `target` (raw token ids, no BOS/EOS framing).
  virtual ScoredOutput forward(std::span<const int> src, std::span<const int> target) const = 0;

  // Mean token cross-entropy of the teacher-forced pass, with
  // weight * d(mean CE)/d(params) accumulated into `grad`.
  virtual double cross_entropy_backward(std::span<const int> src, std::span<const int> target,
                                        double weight, std::span<double> grad) const = 0;

  // Greedy argmax decode from BOS until EOS or max_len generated tokens.
  virtual std::vector<int> generate(std::span<const int> src, std::size_t max_len) const = 0;
};

class TransformerModel final : public Seq2SeqModel {
 public:
  explicit TransformerModel(const ModelConfig& config);
  ~TransformerModel() override;

  TransformerModel(const TransformerModel&) = delete;
  TransformerModel& operator=(const TransformerModel&) = delete;

  const ModelConfig& config() const override;
  std::size_t param_count() const override;
  double get_param(std::size_t index) const override;
  void set_param(std::size_t index, double value) override;
  std::vector<double> params_f64() const override;
  void set_params_f64(std::span<const double> values) override;
  void apply_param_update(std::span<const double> delta) override;
  const std::vector<TensorSpec>& tensors() const override;

  ScoredOutput forward(std::span<const int> src, std::span<const int> target) const override;
  double cross_entropy_backward(std::span<const int> src, std::span<const int> target,
                                double weight, std::span<double> grad) const override;
  std::vector<int> generate(std::span<const int> src, std::size_t max_len) const override;

  // Teacher-forced mean cross-entropy evaluated in 80-bit precision with an
  // explicit parameter vector. Finite-difference oracles difference two nearly
  // equal losses, so the evaluation needs more precision than the gradients
  // being checked. Not thread-safe.
  long double cross_entropy_extended(std::span<const int> src, std::span<const int> target,
                                     std::span<const double> params) const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Self-describing checkpoint container.
struct Checkpoint {
  ModelConfig config;
  std::vector<std::string> vocab_tokens;
  std::vector<double> params;
};

void save_checkpoint(const std::string& path, const Seq2SeqModel& model, const Vocabulary& vocab);
Checkpoint load_checkpoint(const std::string& path);
std::unique_ptr<TransformerModel> model_from_checkpoint(const Checkpoint& ckpt);

}  // namespace contrasum::s2s
