#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

#include <Eigen/Core>

#include "satweight/residual_matrix.hpp"

namespace satweight {

struct ModelDims {
  std::size_t input_size = 60;  // padded satellite count N_max
  std::size_t hidden_size = 64;
  std::size_t layers = 1;
  std::size_t output_size = 60;

  void validate() const;
  bool operator==(const ModelDims&) const = default;
};

/// Offsets of each parameter block inside the flat parameter vector.
/// Per layer: input weights (4H x in, column-major), recurrent weights
/// (4H x H), bias (4H); gate order i, f, g, o. Then the dense layer
/// (out x H) and its bias.
struct ParamLayout {
  struct Layer {
    std::size_t input_weights, recurrent_weights, bias, input_dim;
  };
  std::vector<Layer> layers;
  std::size_t dense_weights = 0;
  std::size_t dense_bias = 0;
  std::size_t total = 0;

  static ParamLayout of(const ModelDims& dims);
};

/// LSTM stack + ReLU dense head mapping a residual matrix (rows as steps) to
/// one non-negative prediction per satellite slot. Carries the input
/// preprocessing it was trained with.
class LstmModel {
 public:
  std::vector<double> params;
  double clip = kDefaultClip;
  double gamma = kDefaultGamma;
  double sentinel_code = kNormalizedSentinel;
  double mask_code = 0.0;
  bool log_labels = false;

  using MatMap = Eigen::Map<Eigen::MatrixXd>;
  using ConstMatMap = Eigen::Map<const Eigen::MatrixXd>;
  using VecMap = Eigen::Map<Eigen::VectorXd>;
  using ConstVecMap = Eigen::Map<const Eigen::VectorXd>;

  LstmModel() = default;
  /// All-zero parameters.
  explicit LstmModel(const ModelDims& dims);
  static LstmModel zeros(const ModelDims& dims) { return LstmModel(dims); }
  /// Uniform(+-1/sqrt(fan_in)) weights, forget-gate bias 1.
  static LstmModel initialized(const ModelDims& dims, std::uint64_t seed);

  const ModelDims& dims() const { return dims_; }
  const ParamLayout& layout() const { return layout_; }
  std::size_t parameter_count() const { return params.size(); }

  ConstMatMap input_weights(std::size_t layer) const;
  ConstMatMap recurrent_weights(std::size_t layer) const;
  ConstVecMap bias(std::size_t layer) const;
  ConstMatMap dense_weights() const;
  ConstVecMap dense_bias() const;
  MatMap input_weights(std::size_t layer);
  MatMap recurrent_weights(std::size_t layer);
  VecMap bias(std::size_t layer);
  MatMap dense_weights();
  VecMap dense_bias();

  void validate() const;

 private:
  ModelDims dims_;
  ParamLayout layout_;
};

/// Validity of each step (matrix row) and each output slot (satellite).
struct PredictionMask {
  std::vector<std::uint8_t> steps;
  std::vector<std::uint8_t> outputs;

  /// First `valid` entries true out of `length`.
  static PredictionMask leading(std::size_t valid, std::size_t length);
  std::size_t valid_outputs() const;
};

/// Rows of `input` are fed as steps; column c contributes only if
/// mask.outputs[c]. Masked steps carry hidden and cell state unchanged.
/// Returns output_size predictions (ReLU, >= 0).
Eigen::VectorXd lstm_forward(const LstmModel& model, const RowMatrix& input, const PredictionMask& mask);

/// Mean squared error over valid output slots. Throws on an empty mask.
double mse_loss(const Eigen::VectorXd& prediction, const Eigen::VectorXd& labels, const PredictionMask& mask);

/// Adds scale * d(sum of squared errors over valid slots)/d(params) into
/// `gradient` and returns that sum of squared errors.
double accumulate_gradient(const LstmModel& model, const RowMatrix& input, const PredictionMask& mask,
                           const Eigen::VectorXd& labels, double scale, std::span<double> gradient);

/// Gradient of mse_loss for one sample via backpropagation through time.
std::vector<double> backward(const LstmModel& model, const RowMatrix& input, const PredictionMask& mask,
                             const Eigen::VectorXd& labels);

}  // namespace satweight
