#include "contrasum/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <set>

#include "contrasum/errors.hpp"
#include "contrasum/fsio.hpp"
#include "contrasum/rng.hpp"

namespace contrasum::training {

std::vector<TrainSample> samples_from_triplets(const std::vector<corruption::Triplet>& triplets) {
  std::vector<TrainSample> out;
  out.reserve(triplets.size());
  for (const corruption::Triplet& t : triplets) {
    out.push_back({t.id, t.d, t.s_plus, t.s_minus});
  }
  return out;
}

void append_skipped(std::vector<TrainSample>& samples,
                    const std::vector<corpus::LabeledExample>& examples,
                    const std::vector<corruption::SkipRecord>& skips) {
  std::map<std::string, const corpus::LabeledExample*> by_id;
  for (const corpus::LabeledExample& ex : examples) by_id[ex.id] = &ex;
  for (const corruption::SkipRecord& skip : skips) {
    auto it = by_id.find(skip.id);
    if (it == by_id.end()) {
      throw ContractError("skip record id not found in corpus: " + skip.id);
    }
    samples.push_back({skip.id, it->second->source, it->second->reference, std::nullopt});
  }
}

std::string to_string(Optimizer o) { return o == Optimizer::kSgd ? "SGD" : "ADAM"; }

Optimizer optimizer_from_string(const std::string& s) {
  if (s == "SGD") return Optimizer::kSgd;
  if (s == "ADAM") return Optimizer::kAdam;
  throw ValidationError("optimizer", "unknown optimizer '" + s + "'");
}

void TrainConfig::validate() const {
  if (!(learning_rate > 0.0)) throw ValidationError("learning_rate", "must be > 0");
  if (epochs < 1) throw ValidationError("epochs", "must be >= 1");
  if (batch_size < 1) throw ValidationError("batch_size", "must be >= 1");
  if (checkpoint_every < 0) throw ValidationError("checkpoint_every", "must be >= 0");
  loss.validate();
}

TrainConfig TrainConfig::from_config(const KvConfig& cfg) {
  TrainConfig out;
  out.learning_rate = cfg.get_real_or("learning_rate", out.learning_rate);
  out.epochs = static_cast<int>(cfg.get_int_or("epochs", out.epochs));
  out.batch_size = static_cast<int>(cfg.get_int_or("batch_size", out.batch_size));
  out.loss = losses::LossConfig::from_config(cfg);
  out.seed = cfg.get_uint_or("seed", out.seed);
  out.checkpoint_every = static_cast<int>(cfg.get_int_or("checkpoint_every", out.checkpoint_every));
  out.precision = s2s::precision_from_string(cfg.get_or("precision", "F64"));
  out.optimizer = optimizer_from_string(cfg.get_or("optimizer", "SGD"));
  out.adam_beta1 = cfg.get_real_or("adam_beta1", out.adam_beta1);
  out.adam_beta2 = cfg.get_real_or("adam_beta2", out.adam_beta2);
  out.adam_eps = cfg.get_real_or("adam_eps", out.adam_eps);
  out.validate();
  return out;
}

void TrainHistory::save_csv(const std::string& path) const {
  std::string out = "step,total,l_pos,l_neg,hinge_frac\n";
  char buf[160];
  for (const StepRecord& r : steps) {
    std::snprintf(buf, sizeof(buf), "%d,%.17g,%.17g,%.17g,%.17g\n", r.step, r.total, r.l_pos,
                  r.l_neg, r.hinge_frac);
    out += buf;
  }
  atomic_write_file(path, out);
}

namespace {

struct AdamState {
  std::vector<double> m, v;
  int t = 0;
};

corruption::Triplet as_triplet(const TrainSample& sample) {
  corruption::Triplet t;
  t.id = sample.id;
  t.d = sample.d;
  t.s_plus = sample.s_plus;
  t.s_minus = sample.s_minus.value_or("");
  return t;
}

}  // namespace

TrainHistory train(const std::vector<TrainSample>& samples, s2s::Seq2SeqModel& model,
                   const TrainConfig& config, const s2s::Vocabulary& vocab,
                   const CheckpointSink& sink) {
  config.validate();
  if (samples.empty()) throw ContractError("train: no samples");
  if (model.config().precision != config.precision) {
    throw ContractError("train: model precision does not match config.precision");
  }

  const std::size_t n_params = model.param_count();
  std::vector<double> grad(n_params, 0.0);
  std::vector<double> delta(n_params, 0.0);
  AdamState adam;
  if (config.optimizer == Optimizer::kAdam) {
    adam.m.assign(n_params, 0.0);
    adam.v.assign(n_params, 0.0);
  }

  TrainHistory history;
  int step = 0;
  std::vector<std::size_t> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    Rng shuffle_rng = Rng::derive(config.seed, static_cast<std::uint64_t>(epoch));
    shuffle_rng.shuffle(order);

    for (std::size_t start = 0; start < order.size();
         start += static_cast<std::size_t>(config.batch_size)) {
      const std::size_t stop =
          std::min(order.size(), start + static_cast<std::size_t>(config.batch_size));
      const int batch_n = static_cast<int>(stop - start);

      std::fill(grad.begin(), grad.end(), 0.0);
      double sum_total = 0.0, sum_pos = 0.0, sum_neg = 0.0;
      int n_neg = 0, n_hinge = 0;

      for (std::size_t bi = start; bi < stop; ++bi) {
        const TrainSample& sample = samples[order[bi]];
        losses::LossValue value;
        if (sample.s_minus.has_value()) {
          value = losses::objective_with_grad(model, as_triplet(sample), config.loss, vocab, grad);
          sum_neg += value.l_neg;
          ++n_neg;
          if (value.hinge_active) ++n_hinge;
        } else {
          const std::vector<int> d_toks = s2s::tokenize(sample.d, vocab);
          const std::vector<int> s_toks = s2s::tokenize(sample.s_plus, vocab);
          const double l_pos = model.cross_entropy_backward(d_toks, s_toks, 1.0, grad);
          value.total = l_pos;
          value.l_pos = l_pos;
        }
        if (!std::isfinite(value.total)) {
          throw TrainAbort(step + 1, sample.id,
                           "non-finite loss (total=" + std::to_string(value.total) +
                               ", l_pos=" + std::to_string(value.l_pos) +
                               ", l_neg=" + std::to_string(value.l_neg) + ")");
        }
        sum_total += value.total;
        sum_pos += value.l_pos;
      }

      // batch mean reduction
      const double inv_batch = 1.0 / batch_n;
      if (config.optimizer == Optimizer::kSgd) {
        for (std::size_t i = 0; i < n_params; ++i) {
          delta[i] = -config.learning_rate * grad[i] * inv_batch;
        }
      } else {
        ++adam.t;
        const double b1 = config.adam_beta1;
        const double b2 = config.adam_beta2;
        const double bias1 = 1.0 - std::pow(b1, adam.t);
        const double bias2 = 1.0 - std::pow(b2, adam.t);
        for (std::size_t i = 0; i < n_params; ++i) {
          const double g = grad[i] * inv_batch;
          adam.m[i] = b1 * adam.m[i] + (1.0 - b1) * g;
          adam.v[i] = b2 * adam.v[i] + (1.0 - b2) * g * g;
          const double mhat = adam.m[i] / bias1;
          const double vhat = adam.v[i] / bias2;
          delta[i] = -config.learning_rate * mhat / (std::sqrt(vhat) + config.adam_eps);
        }
      }
      model.apply_param_update(delta);
      ++step;

      StepRecord rec;
      rec.step = step;
      rec.total = sum_total * inv_batch;
      rec.l_pos = sum_pos * inv_batch;
      rec.l_neg = n_neg > 0 ? sum_neg / n_neg : 0.0;
      rec.hinge_frac = n_neg > 0 ? static_cast<double>(n_hinge) / n_neg : 0.0;
      history.steps.push_back(rec);

      if (sink && config.checkpoint_every > 0 && step % config.checkpoint_every == 0) {
        sink(step, model);
      }
    }
  }
  return history;
}

double gradient_check(s2s::Seq2SeqModel& model, const corruption::Triplet& triplet,
                      const losses::LossConfig& loss_config, const s2s::Vocabulary& vocab,
                      double epsilon, int n_params_sampled, std::uint64_t seed) {
  if (model.config().precision != s2s::Precision::kF64) {
    throw ValidationError("precision", "gradient_check requires an F64 model");
  }
  if (!(epsilon > 0.0)) throw ValidationError("epsilon", "must be > 0");
  if (n_params_sampled < 1) throw ValidationError("n_params_sampled", "must be >= 1");

  const std::size_t n = model.param_count();
  std::vector<double> analytic(n, 0.0);
  losses::objective_with_grad(model, triplet, loss_config, vocab, analytic);

  // distinct parameter indices
  std::vector<std::size_t> indices;
  if (static_cast<std::size_t>(n_params_sampled) >= n) {
    indices.resize(n);
    for (std::size_t i = 0; i < n; ++i) indices[i] = i;
  } else {
    Rng rng(seed);
    std::set<std::size_t> picked;
    while (picked.size() < static_cast<std::size_t>(n_params_sampled)) {
      picked.insert(rng.index_below(n));
    }
    indices.assign(picked.begin(), picked.end());
  }

  // The objective at a perturbed parameter vector. Central differences cancel
  // almost all of the loss value, so when the model offers an extended-
  // precision evaluation path it is used for the difference quotient.
  const auto* extended = dynamic_cast<const s2s::TransformerModel*>(&model);
  const std::vector<int> d_toks = s2s::tokenize(triplet.d, vocab);
  const std::vector<int> sp_toks = s2s::tokenize(triplet.s_plus, vocab);
  const std::vector<int> sm_toks = s2s::tokenize(triplet.s_minus, vocab);

  auto combine_ld = [&](long double l_pos, long double l_neg) -> long double {
    const auto alpha = static_cast<long double>(loss_config.alpha);
    const auto margin = static_cast<long double>(loss_config.margin);
    switch (loss_config.variant) {
      case losses::Variant::kOrdinary: return l_pos;
      case losses::Variant::kDc: return l_pos - alpha * l_neg;
      case losses::Variant::kCn: return l_pos + alpha * std::max(margin - l_neg, 0.0L);
      case losses::Variant::kCc:
        return l_pos + alpha * std::max(l_pos + margin - l_neg, 0.0L);
    }
    return l_pos;
  };

  std::vector<double> params = model.params_f64();
  auto total_at = [&]() -> long double {
    if (extended) {
      const long double l_pos = extended->cross_entropy_extended(d_toks, sp_toks, params);
      const long double l_neg = loss_config.variant == losses::Variant::kOrdinary
                                    ? 0.0L
                                    : extended->cross_entropy_extended(d_toks, sm_toks, params);
      return combine_ld(l_pos, l_neg);
    }
    model.set_params_f64(params);
    return static_cast<long double>(
        losses::contrastive_objective(model, triplet, loss_config, vocab).total);
  };

  auto central_diff = [&](std::size_t i, double h) -> long double {
    const double original = params[i];
    params[i] = original + h;
    const long double up = total_at();
    params[i] = original - h;
    const long double down = total_at();
    params[i] = original;
    return (up - down) / (2.0L * static_cast<long double>(h));
  };

  double max_err = 0.0;
  for (std::size_t i : indices) {
    // Richardson extrapolation of the central difference cancels the O(h^2)
    // truncation term, which otherwise dominates on weakly-coupled parameters.
    const long double d_full = central_diff(i, epsilon);
    const long double d_half = central_diff(i, epsilon / 2.0);
    const double fd = static_cast<double>((4.0L * d_half - d_full) / 3.0L);
    const double ga = analytic[i];
    const double scale = std::max(std::abs(fd), std::abs(ga));
    const double err = scale < 1e-8 ? std::abs(fd - ga) : std::abs(fd - ga) / scale;
    max_err = std::max(max_err, err);
  }
  if (!extended) model.set_params_f64(params);
  return max_err;
}

}  // namespace contrasum::training
