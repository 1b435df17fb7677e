#include "satweight/train.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <numeric>
#include <random>
#include <string>

#include "satweight/errors.hpp"

namespace satweight {

void TrainConfig::validate() const {
  if (!(learning_rate >= 0.0) || !(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0) ||
      !(epsilon > 0.0)) {
    throw Error(ErrorCategory::invalid_argument, "invalid Adam hyperparameters");
  }
  if (batch_size < 1 || max_epochs < 1 || patience < 1 || pad_to < kMinEpochSatellites) {
    throw Error(ErrorCategory::invalid_argument, "batch_size, max_epochs, patience must be >= 1 and pad_to >= 5");
  }
}

void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, const TrainConfig& config) {
  if (grads.size() != params.size() || state.m.size() != params.size() || state.v.size() != params.size()) {
    throw Error(ErrorCategory::invalid_argument, "Adam buffers do not match the parameter count");
  }
  ++state.t;
  const double t = static_cast<double>(state.t);
  const double m_corr = 1.0 / (1.0 - std::pow(config.beta1, t));
  const double v_corr = 1.0 / (1.0 - std::pow(config.beta2, t));
  for (std::size_t k = 0; k < params.size(); ++k) {
    state.m[k] = config.beta1 * state.m[k] + (1.0 - config.beta1) * grads[k];
    state.v[k] = config.beta2 * state.v[k] + (1.0 - config.beta2) * grads[k] * grads[k];
    params[k] -= config.learning_rate * (state.m[k] * m_corr) / (std::sqrt(state.v[k] * v_corr) + config.epsilon);
  }
}

RowMatrix prepare_input(const ResidualMatrix& raw, double clip, std::size_t pad_to, double mask_code) {
  const ResidualMatrix norm = normalize_matrix(raw, clip);
  const auto n = static_cast<Eigen::Index>(norm.n());
  if (norm.n() > pad_to) {
    throw Error(ErrorCategory::invalid_argument,
                "epoch has " + std::to_string(norm.n()) + " satellites, model pads to " + std::to_string(pad_to));
  }
  const auto p = static_cast<Eigen::Index>(pad_to);
  RowMatrix out = RowMatrix::Constant(p, p, mask_code);
  out.topLeftCorner(n, n) = norm.values;
  return out;
}

double label_to_target(double weight, bool log_labels) { return log_labels ? std::log1p(weight) : weight; }

double target_to_weight(double target, bool log_labels) {
  return log_labels ? std::expm1(std::max(target, 0.0)) : std::max(target, 0.0);
}

TrainingSample make_sample(const LabeledEpoch& labeled, const LstmModel& model) {
  const std::size_t pad = model.dims().input_size;
  const std::size_t n = labeled.epoch.size();
  TrainingSample s;
  s.input = prepare_input(labeled.residual_matrix, model.clip, pad, model.mask_code);
  s.mask = PredictionMask::leading(n, pad);
  s.target = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(pad));
  for (std::size_t i = 0; i < n; ++i) {
    s.target[static_cast<Eigen::Index>(i)] = label_to_target(labeled.labels[i], model.log_labels);
  }
  return s;
}

namespace {

constexpr std::size_t kReductionChunks = 8;

std::size_t valid_count(std::span<const TrainingSample> samples, std::span<const std::size_t> indices) {
  std::size_t count = 0;
  for (std::size_t i : indices) count += samples[i].mask.valid_outputs();
  return count;
}

}  // namespace

double batch_gradient_serial(const LstmModel& model, std::span<const TrainingSample> samples,
                             std::span<const std::size_t> indices, std::span<double> gradient) {
  std::fill(gradient.begin(), gradient.end(), 0.0);
  const std::size_t valid = valid_count(samples, indices);
  if (valid == 0) throw Error(ErrorCategory::invalid_argument, "batch has no valid outputs");
  const double scale = 1.0 / static_cast<double>(valid);
  double sse = 0.0;
  for (std::size_t i : indices) {
    sse += accumulate_gradient(model, samples[i].input, samples[i].mask, samples[i].target, scale, gradient);
  }
  return sse * scale;
}

double batch_gradient(const LstmModel& model, std::span<const TrainingSample> samples,
                      std::span<const std::size_t> indices, std::span<double> gradient) {
  const std::size_t valid = valid_count(samples, indices);
  if (valid == 0) throw Error(ErrorCategory::invalid_argument, "batch has no valid outputs");
  const double scale = 1.0 / static_cast<double>(valid);
  const std::size_t chunks = std::min(kReductionChunks, indices.size());
  const std::size_t p = gradient.size();

  std::vector<double> partial(chunks * p, 0.0);
  std::vector<double> sse(chunks, 0.0);
  const auto chunk_count = static_cast<long>(chunks);
#pragma omp parallel for schedule(static)
  for (long c = 0; c < chunk_count; ++c) {
    const auto k = static_cast<std::size_t>(c);
    const std::size_t begin = k * indices.size() / chunks;
    const std::size_t end = (k + 1) * indices.size() / chunks;
    std::span<double> buf(partial.data() + k * p, p);
    for (std::size_t j = begin; j < end; ++j) {
      const auto& s = samples[indices[j]];
      sse[k] += accumulate_gradient(model, s.input, s.mask, s.target, scale, buf);
    }
  }
  std::fill(gradient.begin(), gradient.end(), 0.0);
  double total = 0.0;
  for (std::size_t k = 0; k < chunks; ++k) {
    const double* buf = partial.data() + k * p;
    for (std::size_t q = 0; q < p; ++q) gradient[q] += buf[q];
    total += sse[k];
  }
  return total * scale;
}

double dataset_loss(const LstmModel& model, std::span<const TrainingSample> samples) {
  if (samples.empty()) throw Error(ErrorCategory::invalid_argument, "loss over an empty dataset");
  std::vector<double> sse(samples.size(), 0.0);
  const auto count = static_cast<long>(samples.size());
#pragma omp parallel for schedule(static)
  for (long i = 0; i < count; ++i) {
    const auto& s = samples[static_cast<std::size_t>(i)];
    const Eigen::VectorXd pred = lstm_forward(model, s.input, s.mask);
    sse[static_cast<std::size_t>(i)] = mse_loss(pred, s.target, s.mask) * static_cast<double>(s.mask.valid_outputs());
  }
  std::size_t valid = 0;
  for (const auto& s : samples) valid += s.mask.valid_outputs();
  return std::accumulate(sse.begin(), sse.end(), 0.0) / static_cast<double>(valid);
}

bool EarlyStopping::update(double loss) {
  if (loss < best_) {
    best_ = loss;
    stagnant_ = 0;
    return true;
  }
  ++stagnant_;
  return false;
}

namespace {

std::vector<TrainingSample> make_samples(std::span<const LabeledEpoch> data, const LstmModel& model) {
  std::vector<TrainingSample> out(data.size());
  const auto count = static_cast<long>(data.size());
#pragma omp parallel for schedule(static)
  for (long i = 0; i < count; ++i) out[static_cast<std::size_t>(i)] = make_sample(data[static_cast<std::size_t>(i)], model);
  return out;
}

}  // namespace

TrainResult train(LstmModel model, std::span<const LabeledEpoch> train_set, std::span<const LabeledEpoch> val_set,
                  const TrainConfig& config, const std::function<void(const EpochLog&)>& on_epoch) {
  config.validate();
  model.validate();
  if (train_set.empty() || val_set.empty()) {
    throw Error(ErrorCategory::invalid_argument, "training and validation sets must be non-empty");
  }
  if (config.pad_to != model.dims().input_size) {
    throw Error(ErrorCategory::invalid_argument, "pad_to does not match the model input size");
  }
  model.mask_code = config.mask_code;
  model.log_labels = config.log_labels;

  const std::vector<TrainingSample> train_samples = make_samples(train_set, model);
  const std::vector<TrainingSample> val_samples = make_samples(val_set, model);

  TrainResult result;
  result.model = model;
  AdamState adam(model.parameter_count());
  std::vector<double> grad(model.parameter_count(), 0.0);
  std::vector<std::size_t> order(train_samples.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(config.seed);
  EarlyStopping stopper(config.patience);

  for (std::size_t epoch = 1; epoch <= config.max_epochs; ++epoch) {
    const auto start = std::chrono::steady_clock::now();
    std::shuffle(order.begin(), order.end(), rng);
    double weighted_loss = 0.0;
    std::size_t seen = 0;
    for (std::size_t b = 0; b < order.size(); b += config.batch_size) {
      const std::span<const std::size_t> batch(order.data() + b, std::min(config.batch_size, order.size() - b));
      const double loss = batch_gradient(model, train_samples, batch, grad);
      if (!std::isfinite(loss)) {
        throw Error(ErrorCategory::divergence,
                    "non-finite training loss in epoch " + std::to_string(epoch) + " at sample offset " + std::to_string(b));
      }
      const std::size_t valid = valid_count(train_samples, batch);
      weighted_loss += loss * static_cast<double>(valid);
      seen += valid;
      adam_step(model.params, grad, adam, config);
    }

    EpochLog entry;
    entry.epoch = epoch;
    entry.train_loss = weighted_loss / static_cast<double>(seen);
    entry.val_loss = dataset_loss(model, val_samples);
    if (!std::isfinite(entry.val_loss)) {
      throw Error(ErrorCategory::divergence, "non-finite validation loss in epoch " + std::to_string(epoch));
    }
    entry.improved = stopper.update(entry.val_loss);
    if (entry.improved) {
      result.model = model;
      result.best_epoch = epoch;
      result.best_val_loss = entry.val_loss;
    }
    entry.wall_seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    result.log.push_back(entry);
    if (on_epoch) on_epoch(entry);
    if (stopper.should_stop()) {
      result.early_stopped = true;
      break;
    }
  }
  return result;
}

}  // namespace satweight
