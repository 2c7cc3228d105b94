#include "factweave/trainer.hpp"

#include <algorithm>
#include <cmath>

#include "factweave/error.hpp"

namespace factweave {

void TrainConfig::validate() const {
  if (lr < 0.0) throw ContractError("train config: learning rate must be >= 0");
  if (batch_size == 0) throw ContractError("train config: batch size must be positive");
  if (warmup < 0.0 || warmup > 1.0) throw ContractError("train config: warmup must lie in [0, 1]");
}

AdamOptimizer::AdamOptimizer(double lr, double warmup_frac, std::size_t total_steps)
    : lr_(lr), warmup_frac_(warmup_frac), total_steps_(total_steps) {}

void AdamOptimizer::step(ModelParams& params, const std::map<std::string, Tensor>& grads) {
  constexpr double beta1 = 0.9;
  constexpr double beta2 = 0.999;
  constexpr double eps = 1e-8;

  ++step_;
  const double warm_steps = warmup_frac_ * static_cast<double>(total_steps_);
  double lr_t = lr_;
  if (warm_steps >= 1.0 && static_cast<double>(step_) < warm_steps) {
    lr_t = lr_ * static_cast<double>(step_) / warm_steps;
  }
  const double bc1 = 1.0 - std::pow(beta1, static_cast<double>(step_));
  const double bc2 = 1.0 - std::pow(beta2, static_cast<double>(step_));

  for (auto& [name, tensor] : params.tensors) {
    auto git = grads.find(name);
    if (git == grads.end()) continue;
    const std::vector<double>& g = git->second.data();
    std::vector<double>& m = m_[name];
    std::vector<double>& v = v_[name];
    if (m.empty()) m.assign(g.size(), 0.0);
    if (v.empty()) v.assign(g.size(), 0.0);

    std::vector<double> updated = tensor.data();
    for (std::size_t i = 0; i < g.size(); ++i) {
      m[i] = beta1 * m[i] + (1.0 - beta1) * g[i];
      v[i] = beta2 * v[i] + (1.0 - beta2) * g[i] * g[i];
      const double m_hat = m[i] / bc1;
      const double v_hat = v[i] / bc2;
      updated[i] -= lr_t * m_hat / (std::sqrt(v_hat) + eps);
    }
    tensor = Tensor(tensor.shape(), std::move(updated), tensor.requires_grad());
  }
}

namespace {

int argmax_label(double logit0, double logit1) {
  // Exact ties predict label 0.
  return logit1 > logit0 ? 1 : 0;
}

EvalReport evaluate_prepared(const std::vector<PreparedClaim>& prepared,
                             const ModelParams& params, const ModelConfig& config) {
  if (prepared.empty()) throw ContractError("evaluate called with an empty dataset");
  EvalReport report;
  report.total = prepared.size();
  for (const PreparedClaim& pc : prepared) {
    Tape tape;
    RegisteredParams reg = register_params(tape, params);
    ForwardResult fwd = forward_prepared(tape, pc, reg, config, nullptr, std::nullopt);
    const Tensor& logits = tape.value(fwd.logits);
    Prediction p;
    p.id = pc.claim.id;
    p.label = pc.claim.label;
    p.logit0 = logits.data()[0];
    p.logit1 = logits.data()[1];
    p.pred = argmax_label(p.logit0, p.logit1);
    if (p.pred == p.label) ++report.correct;
    report.predictions.push_back(p);
  }
  report.accuracy = static_cast<double>(report.correct) / static_cast<double>(report.total);
  return report;
}

}  // namespace

EvalReport evaluate(const Pipeline& pipeline, const std::vector<Claim>& dataset,
                    const ModelParams& params) {
  std::vector<PreparedClaim> prepared;
  prepared.reserve(dataset.size());
  for (const Claim& c : dataset) prepared.push_back(pipeline.prepare(c));
  return evaluate_prepared(prepared, params, pipeline.config());
}

TrainResult train(const Pipeline& pipeline, const std::vector<Claim>& train_set,
                  const std::vector<Claim>& dev_set, const TrainConfig& config) {
  config.validate();
  if (train_set.empty()) throw ContractError("train called with an empty dataset");
  const ModelConfig& model_config = pipeline.config();

  std::vector<PreparedClaim> prepared;
  prepared.reserve(train_set.size());
  for (const Claim& c : train_set) prepared.push_back(pipeline.prepare(c));
  std::vector<PreparedClaim> prepared_dev;
  prepared_dev.reserve(dev_set.size());
  for (const Claim& c : dev_set) prepared_dev.push_back(pipeline.prepare(c));

  Rng init_rng(Rng::derive(config.seed, 0x1717));
  ModelParams params = init_params(model_config, init_rng);
  Rng train_rng(Rng::derive(config.seed, 0x5e5e));

  const std::size_t batches_per_epoch =
      (train_set.size() + config.batch_size - 1) / config.batch_size;
  AdamOptimizer optimizer(config.lr, config.warmup, config.epochs * batches_per_epoch);

  TrainResult result;
  result.report.seed = config.seed;
  ModelParams best_params = params;
  double best_dev = -1.0;

  std::vector<std::size_t> order(prepared.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    train_rng.shuffle(order);
    double epoch_loss = 0.0;
    std::size_t seen = 0;

    for (std::size_t start = 0; start < order.size(); start += config.batch_size) {
      const std::size_t stop = std::min(order.size(), start + config.batch_size);
      std::map<std::string, std::vector<double>> grad_acc;
      const double inv_batch = 1.0 / static_cast<double>(stop - start);

      for (std::size_t b = start; b < stop; ++b) {
        const PreparedClaim& pc = prepared[order[b]];
        std::vector<Tensor> masks;
        if (model_config.dropout > 0.0) {
          masks = make_dropout_masks(pc, model_config, train_rng);
        }
        double loss_value = 0.0;
        try {
          Tape tape;
          RegisteredParams reg = register_params(tape, params);
          ForwardResult fwd =
              forward_prepared(tape, pc, reg, model_config,
                               masks.empty() ? nullptr : &masks, pc.claim.label);
          loss_value = tape.value(fwd.loss).item();
          for (auto& [name, grad] : named_grads(tape, fwd.loss, reg)) {
            std::vector<double>& acc = grad_acc[name];
            if (acc.empty()) acc.assign(grad.numel(), 0.0);
            for (std::size_t i = 0; i < acc.size(); ++i) acc[i] += grad.data()[i] * inv_batch;
          }
        } catch (const NumericalError& e) {
          throw NumericalError("training diverged at epoch " + std::to_string(epoch) +
                               ", claim id " + std::to_string(pc.claim.id) + ": " + e.what());
        }
        epoch_loss += loss_value;
        ++seen;
      }

      std::map<std::string, Tensor> grads;
      for (auto& [name, acc] : grad_acc) {
        grads.emplace(name, Tensor(params.at(name).shape(), std::move(acc)));
      }
      optimizer.step(params, grads);
    }

    result.report.loss_curve.push_back(epoch_loss / static_cast<double>(seen));

    if (!prepared_dev.empty()) {
      EvalReport dev_report = evaluate_prepared(prepared_dev, params, model_config);
      result.report.dev_accuracy.push_back(dev_report.accuracy);
      if (dev_report.accuracy > best_dev) {
        best_dev = dev_report.accuracy;
        best_params = params;
      }
    }
  }

  result.params = prepared_dev.empty() ? params : best_params;
  EvalReport final_report = evaluate_prepared(prepared_dev.empty() ? prepared : prepared_dev,
                                              result.params, model_config);
  result.report.accuracy = final_report.accuracy;
  result.report.correct = final_report.correct;
  result.report.total = final_report.total;
  result.report.predictions = std::move(final_report.predictions);
  return result;
}

GradCheckReport finite_diff_check(const PreparedClaim& prepared, const ModelParams& params,
                                  const ModelConfig& config, const std::vector<Tensor>& masks,
                                  double eps) {
  const std::vector<Tensor>* mask_ptr = masks.empty() ? nullptr : &masks;

  auto loss_for = [&](const ModelParams& p) {
    Tape tape;
    RegisteredParams reg = register_params(tape, p);
    ForwardResult fwd = forward_prepared(tape, prepared, reg, config, mask_ptr,
                                         prepared.claim.label);
    return tape.value(fwd.loss).item();
  };

  // Analytic gradients from one taped forward pass.
  std::map<std::string, Tensor> analytic;
  {
    Tape tape;
    RegisteredParams reg = register_params(tape, params);
    ForwardResult fwd = forward_prepared(tape, prepared, reg, config, mask_ptr,
                                         prepared.claim.label);
    analytic = named_grads(tape, fwd.loss, reg);
  }

  GradCheckReport report;
  for (const auto& [name, tensor] : params.tensors) {
    const Tensor& grad = analytic.at(name);
    double worst = 0.0;
    for (std::size_t i = 0; i < tensor.numel(); ++i) {
      ModelParams bumped = params;
      std::vector<double> plus = tensor.data();
      plus[i] += eps;
      bumped.tensors.at(name) = Tensor(tensor.shape(), std::move(plus), true);
      const double f_plus = loss_for(bumped);

      std::vector<double> minus = tensor.data();
      minus[i] -= eps;
      bumped.tensors.at(name) = Tensor(tensor.shape(), std::move(minus), true);
      const double f_minus = loss_for(bumped);

      const double fd = (f_plus - f_minus) / (2.0 * eps);
      const double an = grad.data()[i];
      const double rel = std::abs(fd - an) / std::max({1.0, std::abs(fd), std::abs(an)});
      worst = std::max(worst, rel);
    }
    report.entries.push_back(GradCheckEntry{name, worst});
    report.worst = std::max(report.worst, worst);
  }
  return report;
}

}  // namespace factweave
