#include "pmseg/train.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>

#include "pmseg/error.hpp"
#include "pmseg/ops.hpp"

namespace pmseg {
namespace {

double mean(const std::vector<double>& v, std::size_t begin, std::size_t end) {
  return std::accumulate(v.begin() + static_cast<std::ptrdiff_t>(begin), v.begin() + static_cast<std::ptrdiff_t>(end),
                         0.0) /
         static_cast<double>(end - begin);
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

void TrainConfig::validate() const {
  net.validate();
  loss.validate();
  if (max_steps == 0) throw ConfigError("train: max_steps must be positive");
  if (plateau_window < 2) throw ConfigError("train: plateau_window must be > 1");
  if (!(plateau_tolerance >= 0.0)) throw ConfigError("train: plateau_tolerance must be >= 0");
  if (!(learning_rate > 0.0) || !(fallback_learning_rate > 0.0))
    throw ConfigError("train: learning rates must be positive");
}

std::string_view to_string(StopReason r) {
  switch (r) {
    case StopReason::MaxSteps: return "max_steps";
    case StopReason::Converged: return "converged";
    case StopReason::Diverged: return "diverged";
  }
  return "max_steps";
}

TrainState initial_state(const TrainConfig& config) {
  config.validate();
  TrainState s;
  s.params = init_xavier(config.net);
  s.adam = AdamState::for_params(s.params.tensors, config.learning_rate);
  return s;
}

double batch_loss_and_grads(const NetConfig& net, const LossConfig& loss, const NetParams& params,
                            const std::vector<const Sample*>& batch, std::vector<Tensor>* grads) {
  if (batch.empty()) throw std::invalid_argument("batch_loss: empty batch");
  Tape t;
  std::vector<NodeId> ids;
  ids.reserve(params.count());
  for (const Tensor& p : params.tensors) ids.push_back(grads ? t.variable(p) : t.constant(p));

  std::vector<WeightedLoss> parts;
  const double w = 1.0 / static_cast<double>(batch.size());
  for (const Sample* s : batch) {
    if (s->presence.size() != net.out_channels)
      throw ConfigError("train: sample '" + s->id + "' has " + std::to_string(s->presence.size()) +
                        " classes, network has " + std::to_string(net.out_channels));
    const NodeId p = forward(t, net, ids, t.constant(image_tensor(net, s->feature)));
    parts.push_back({w, sample_loss(t, loss, p, s->label, s->presence)});
  }
  const NodeId root = combined_loss(t, parts);
  const double value = t.value(root).item();
  if (!std::isfinite(value)) throw NumericalError("train: non-finite loss");
  if (grads) {
    t.backward(root);
    grads->clear();
    for (NodeId id : ids) grads->push_back(t.grad(id));
  }
  return value;
}

TrainResult train(const std::vector<Sample>& samples, const TrainConfig& config, TrainState state,
                  const EvalSet& eval) {
  config.validate();
  if (samples.empty()) throw ConfigError("train: no training samples");
  if (state.params.count() != zero_params(config.net).count())
    throw ConfigError("train: parameter set does not match the network config");
  for (const Sample& s : samples) config.net.check_extents(s.feature.height(), s.feature.width());

  // A run stopped only by its step budget continues under a larger one.
  if (state.finished && state.reason == StopReason::MaxSteps && state.step < config.max_steps) state.finished = false;

  BatchStream stream(samples, config.sampler);
  for (std::size_t i = 0; i < state.step; ++i) stream.next();

  TrainResult result;
  auto evaluate_into = [&](LogRow& row) {
    if (!eval.samples || eval.samples->empty()) return;
    const PooledDice d = evaluate_pooled(config.net, state.params, *eval.samples, eval.class_sources);
    for (std::size_t c = 0; c < d.counts.size(); ++c) row.dice.push_back(d.dice(c));
    row.background_false_positives = d.background_false_positives;
  };

  std::vector<Tensor> grads;
  std::vector<const Sample*> batch;
  while (!state.finished) {
    if (state.step >= config.max_steps) {
      state.finished = true;
      state.reason = StopReason::MaxSteps;
      break;
    }
    batch.clear();
    for (std::size_t i : stream.next()) batch.push_back(&samples[i]);
    LogRow row;
    row.step = state.step + 1;
    row.lr = state.adam.lr;
    try {
      row.loss = batch_loss_and_grads(config.net, config.loss, state.params, batch, &grads);
      adam_step(state.params.tensors, grads, state.adam);
    } catch (const NumericalError& e) {
      state.finished = true;
      state.reason = StopReason::Diverged;
      result.failure = "step " + std::to_string(row.step) + ": " + e.what();
      break;
    }
    ++state.step;
    state.losses.push_back(row.loss);

    const std::size_t w = config.plateau_window;
    bool stop = false;
    if (state.step % w == 0 && state.step - state.phase_start >= 2 * w) {
      const std::size_t n = state.losses.size();
      const double prev = mean(state.losses, n - 2 * w, n - w);
      const double cur = mean(state.losses, n - w, n);
      const double rel = (prev - cur) / std::max(std::abs(prev), 1e-300);
      if (rel < config.plateau_tolerance) {
        if (state.phase == 0) {
          state.phase = 1;
          state.phase_start = state.step;
          state.adam.lr = config.fallback_learning_rate;
        } else {
          stop = true;
        }
      }
    }
    const bool last = stop || state.step >= config.max_steps;
    if ((config.eval_every && state.step % config.eval_every == 0) || last) evaluate_into(row);
    result.log.push_back(std::move(row));
    if (stop) {
      state.finished = true;
      state.reason = StopReason::Converged;
    }
  }
  result.state = std::move(state);
  return result;
}

std::string log_to_csv(const std::vector<LogRow>& log, const std::vector<std::string>& class_names) {
  std::string out = "step,loss,lr,background_fp";
  for (const auto& n : class_names) out += ",dice_" + n;
  out += "\n";
  for (const LogRow& r : log) {
    out += std::to_string(r.step) + "," + fmt_double(r.loss) + "," + fmt_double(r.lr) + ",";
    if (!r.dice.empty()) out += std::to_string(r.background_false_positives);
    for (std::size_t c = 0; c < class_names.size(); ++c) {
      out += ",";
      if (c < r.dice.size()) out += fmt_double(r.dice[c]);
    }
    out += "\n";
  }
  return out;
}

}  // namespace pmseg
