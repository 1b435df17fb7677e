#pragma once

#include <cstdint>
#include <functional>
#include <limits>
#include <span>
#include <vector>

#include "satweight/lstm.hpp"
#include "satweight/parallel.hpp"
#include "satweight/synth.hpp"

namespace satweight {

struct TrainConfig {
  double learning_rate = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::size_t batch_size = 32;
  std::size_t max_epochs = 100;
  std::size_t patience = 5;
  std::uint64_t seed = 11;
  std::size_t pad_to = 60;
  double mask_code = 0.0;
  bool log_labels = false;  // train on log(1 + w)

  void validate() const;
};

struct AdamState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t t = 0;

  AdamState() = default;
  explicit AdamState(std::size_t n) : m(n, 0.0), v(n, 0.0) {}
};

/// One bias-corrected Adam update in place; increments state.t before use.
void adam_step(std::span<double> params, std::span<const double> grads, AdamState& state, const TrainConfig& config);

/// Network input, mask and regression target derived from a labeled epoch.
struct TrainingSample {
  RowMatrix input;
  PredictionMask mask;
  Eigen::VectorXd target;
};

/// Normalized matrix padded to pad_to x pad_to with mask_code.
RowMatrix prepare_input(const ResidualMatrix& raw, double clip, std::size_t pad_to, double mask_code);

double label_to_target(double weight, bool log_labels);
double target_to_weight(double target, bool log_labels);

TrainingSample make_sample(const LabeledEpoch& labeled, const LstmModel& model);

/// Mean-squared-error gradient over the selected samples (mean over all valid
/// slots). Samples are reduced in a fixed number of contiguous chunks, so the
/// result is identical for any OpenMP thread count. Returns the batch loss.
double batch_gradient(const LstmModel& model, std::span<const TrainingSample> samples,
                      std::span<const std::size_t> indices, std::span<double> gradient);

/// Single-threaded reference: plain sequential accumulation.
double batch_gradient_serial(const LstmModel& model, std::span<const TrainingSample> samples,
                             std::span<const std::size_t> indices, std::span<double> gradient);

/// Mean squared error over every valid slot of every sample.
double dataset_loss(const LstmModel& model, std::span<const TrainingSample> samples);

/// Tracks validation loss; stop once `patience` consecutive epochs fail to
/// improve on the best value.
class EarlyStopping {
 public:
  explicit EarlyStopping(std::size_t patience) : patience_(patience) {}

  /// Returns true when `loss` is a new best.
  bool update(double loss);
  bool should_stop() const { return stagnant_ >= patience_; }
  std::size_t stagnant_epochs() const { return stagnant_; }
  double best() const { return best_; }

 private:
  std::size_t patience_;
  std::size_t stagnant_ = 0;
  double best_ = std::numeric_limits<double>::infinity();
};

struct EpochLog {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_loss = 0.0;
  double wall_seconds = 0.0;
  bool improved = false;
};

struct TrainResult {
  LstmModel model;  // parameters from the best validation epoch
  std::vector<EpochLog> log;
  std::size_t best_epoch = 0;
  double best_val_loss = 0.0;
  bool early_stopped = false;
};

/// Minibatch Adam on MSE with early stopping. Throws divergence on a
/// non-finite loss.
TrainResult train(LstmModel model, std::span<const LabeledEpoch> train_set, std::span<const LabeledEpoch> val_set,
                  const TrainConfig& config, const std::function<void(const EpochLog&)>& on_epoch = {});

}  // namespace satweight
