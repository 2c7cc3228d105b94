#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "factweave/model.hpp"

namespace factweave {

struct TrainConfig {
  double lr = 1e-3;
  std::size_t batch_size = 16;
  std::size_t epochs = 20;
  double warmup = 0.1;  // fraction of total steps spent ramping lr from 0
  std::uint64_t seed = 1;

  void validate() const;
};

struct Prediction {
  long id = 0;
  int label = 0;
  int pred = 0;
  double logit0 = 0.0;
  double logit1 = 0.0;
};

struct EvalReport {
  double accuracy = 0.0;
  std::size_t correct = 0;
  std::size_t total = 0;
  std::vector<Prediction> predictions;
  std::vector<double> loss_curve;    // per-epoch mean train loss
  std::vector<double> dev_accuracy;  // per-epoch dev accuracy (when a dev set exists)
  std::uint64_t seed = 0;
  std::map<std::string, std::string> config_snapshot;
};

struct TrainResult {
  ModelParams params;
  EvalReport report;
};

/// Adam with the standard constants (beta1 0.9, beta2 0.999, eps 1e-8) and
/// a linear warmup into a constant learning rate.
class AdamOptimizer {
 public:
  AdamOptimizer(double lr, double warmup_frac, std::size_t total_steps);
  void step(ModelParams& params, const std::map<std::string, Tensor>& grads);
  std::size_t steps_taken() const { return step_; }

 private:
  double lr_;
  double warmup_frac_;
  std::size_t total_steps_;
  std::size_t step_ = 0;
  std::map<std::string, std::vector<double>> m_, v_;
};

/// Mini-batch training over independent claim graphs; gradients are averaged
/// over the batch. Keeps the parameters that scored best on the dev set
/// (final parameters when dev is empty). A non-finite loss aborts with
/// NumericalError.
TrainResult train(const Pipeline& pipeline, const std::vector<Claim>& train_set,
                  const std::vector<Claim>& dev_set, const TrainConfig& config);

/// Argmax over logits; exactly equal logits predict label 0. Errors on an
/// empty dataset.
EvalReport evaluate(const Pipeline& pipeline, const std::vector<Claim>& dataset,
                    const ModelParams& params);

struct GradCheckEntry {
  std::string name;
  double max_rel_err = 0.0;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> entries;
  double worst = 0.0;
  bool passed(double tol) const { return worst < tol; }
};

/// Central finite differences of the full pipeline loss against tape
/// gradients, per parameter tensor. Dropout masks are fixed inputs so the
/// loss stays a deterministic function of the parameters; pass an empty
/// mask vector for eval mode. Relative error uses
/// |a - b| / max(1, |a|, |b|).
GradCheckReport finite_diff_check(const PreparedClaim& prepared, const ModelParams& params,
                                  const ModelConfig& config, const std::vector<Tensor>& masks,
                                  double eps = 1e-5);

}  // namespace factweave
