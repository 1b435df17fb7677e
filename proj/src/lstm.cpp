#include "satweight/lstm.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <string>

#include "satweight/errors.hpp"

namespace satweight {

void ModelDims::validate() const {
  if (input_size == 0 || hidden_size == 0 || layers == 0 || output_size == 0) {
    throw Error(ErrorCategory::invalid_argument, "model dimensions must be positive");
  }
}

ParamLayout ParamLayout::of(const ModelDims& dims) {
  ParamLayout layout;
  const std::size_t gates = 4 * dims.hidden_size;
  std::size_t offset = 0;
  for (std::size_t l = 0; l < dims.layers; ++l) {
    Layer layer;
    layer.input_dim = l == 0 ? dims.input_size : dims.hidden_size;
    layer.input_weights = offset;
    offset += gates * layer.input_dim;
    layer.recurrent_weights = offset;
    offset += gates * dims.hidden_size;
    layer.bias = offset;
    offset += gates;
    layout.layers.push_back(layer);
  }
  layout.dense_weights = offset;
  offset += dims.output_size * dims.hidden_size;
  layout.dense_bias = offset;
  offset += dims.output_size;
  layout.total = offset;
  return layout;
}

LstmModel::LstmModel(const ModelDims& dims) : dims_(dims) {
  dims.validate();
  layout_ = ParamLayout::of(dims);
  params.assign(layout_.total, 0.0);
}

LstmModel LstmModel::initialized(const ModelDims& dims, std::uint64_t seed) {
  LstmModel model(dims);
  std::mt19937_64 rng(seed);
  auto fill = [&](std::size_t offset, std::size_t count, double fan_in) {
    std::uniform_real_distribution<double> dist(-1.0 / std::sqrt(fan_in), 1.0 / std::sqrt(fan_in));
    for (std::size_t k = 0; k < count; ++k) model.params[offset + k] = dist(rng);
  };
  const std::size_t h = dims.hidden_size;
  for (std::size_t l = 0; l < dims.layers; ++l) {
    const auto& layer = model.layout_.layers[l];
    fill(layer.input_weights, 4 * h * layer.input_dim, static_cast<double>(layer.input_dim));
    fill(layer.recurrent_weights, 4 * h * h, static_cast<double>(h));
    fill(layer.bias, 4 * h, static_cast<double>(h));
    model.bias(l).segment(static_cast<Eigen::Index>(h), static_cast<Eigen::Index>(h)).setConstant(1.0);
  }
  fill(model.layout_.dense_weights, dims.output_size * h, static_cast<double>(h));
  fill(model.layout_.dense_bias, dims.output_size, static_cast<double>(h));
  return model;
}

namespace {

using Index = Eigen::Index;

Index ix(std::size_t v) { return static_cast<Index>(v); }

}  // namespace

LstmModel::ConstMatMap LstmModel::input_weights(std::size_t l) const {
  return {params.data() + layout_.layers[l].input_weights, ix(4 * dims_.hidden_size), ix(layout_.layers[l].input_dim)};
}
LstmModel::ConstMatMap LstmModel::recurrent_weights(std::size_t l) const {
  return {params.data() + layout_.layers[l].recurrent_weights, ix(4 * dims_.hidden_size), ix(dims_.hidden_size)};
}
LstmModel::ConstVecMap LstmModel::bias(std::size_t l) const {
  return {params.data() + layout_.layers[l].bias, ix(4 * dims_.hidden_size)};
}
LstmModel::ConstMatMap LstmModel::dense_weights() const {
  return {params.data() + layout_.dense_weights, ix(dims_.output_size), ix(dims_.hidden_size)};
}
LstmModel::ConstVecMap LstmModel::dense_bias() const {
  return {params.data() + layout_.dense_bias, ix(dims_.output_size)};
}
LstmModel::MatMap LstmModel::input_weights(std::size_t l) {
  return {params.data() + layout_.layers[l].input_weights, ix(4 * dims_.hidden_size), ix(layout_.layers[l].input_dim)};
}
LstmModel::MatMap LstmModel::recurrent_weights(std::size_t l) {
  return {params.data() + layout_.layers[l].recurrent_weights, ix(4 * dims_.hidden_size), ix(dims_.hidden_size)};
}
LstmModel::VecMap LstmModel::bias(std::size_t l) { return {params.data() + layout_.layers[l].bias, ix(4 * dims_.hidden_size)}; }
LstmModel::MatMap LstmModel::dense_weights() {
  return {params.data() + layout_.dense_weights, ix(dims_.output_size), ix(dims_.hidden_size)};
}
LstmModel::VecMap LstmModel::dense_bias() { return {params.data() + layout_.dense_bias, ix(dims_.output_size)}; }

void LstmModel::validate() const {
  dims_.validate();
  if (params.size() != layout_.total) {
    throw Error(ErrorCategory::invalid_argument, "parameter vector does not match model dimensions");
  }
  if (!std::all_of(params.begin(), params.end(), [](double p) { return std::isfinite(p); })) {
    throw Error(ErrorCategory::invalid_argument, "model parameters must be finite");
  }
}

PredictionMask PredictionMask::leading(std::size_t valid, std::size_t length) {
  PredictionMask m;
  m.steps.assign(length, 0);
  m.outputs.assign(length, 0);
  std::fill_n(m.steps.begin(), std::min(valid, length), std::uint8_t{1});
  std::fill_n(m.outputs.begin(), std::min(valid, length), std::uint8_t{1});
  return m;
}

std::size_t PredictionMask::valid_outputs() const {
  return static_cast<std::size_t>(std::count(outputs.begin(), outputs.end(), std::uint8_t{1}));
}

namespace {

double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

struct LayerTrace {
  Eigen::MatrixXd inputs;   // in x T
  Eigen::MatrixXd gates;    // 4H x T, post-activation (i, f, g, o)
  Eigen::MatrixXd cells;    // H x (T + 1), column 0 is the initial state
  Eigen::MatrixXd hiddens;  // H x (T + 1)
};

struct ForwardTrace {
  std::vector<LayerTrace> layers;
  Eigen::VectorXd pre_activation;
  Eigen::VectorXd output;
};

void check_shapes(const LstmModel& model, const RowMatrix& input, const PredictionMask& mask) {
  const auto& d = model.dims();
  const auto rows = static_cast<std::size_t>(input.rows());
  const auto cols = static_cast<std::size_t>(input.cols());
  if (model.params.size() != model.layout().total) {
    throw Error(ErrorCategory::invalid_argument, "model parameters do not match its dimensions");
  }
  if (cols > d.input_size || cols > d.output_size) {
    throw Error(ErrorCategory::invalid_argument,
                "input has " + std::to_string(cols) + " columns, model accepts " + std::to_string(d.input_size));
  }
  if (mask.steps.size() != rows || mask.outputs.size() != cols) {
    throw Error(ErrorCategory::invalid_argument, "prediction mask does not match the input shape");
  }
}

ForwardTrace run_forward(const LstmModel& model, const RowMatrix& input, const PredictionMask& mask) {
  check_shapes(model, input, mask);
  const auto& d = model.dims();
  const Index h = ix(d.hidden_size);
  const Index cols = input.cols();

  std::vector<Index> steps;
  for (Index t = 0; t < input.rows(); ++t) {
    if (mask.steps[static_cast<std::size_t>(t)]) steps.push_back(t);
  }
  const Index count = ix(steps.size());

  ForwardTrace trace;
  trace.layers.resize(d.layers);
  for (std::size_t l = 0; l < d.layers; ++l) {
    LayerTrace& lt = trace.layers[l];
    if (l == 0) {
      lt.inputs.setZero(cols, count);
      for (Index k = 0; k < count; ++k) {
        for (Index c = 0; c < cols; ++c) {
          if (mask.outputs[static_cast<std::size_t>(c)]) lt.inputs(c, k) = input(steps[static_cast<std::size_t>(k)], c);
        }
      }
    } else {
      lt.inputs = trace.layers[l - 1].hiddens.rightCols(count);
    }
    const LstmModel::ConstMatMap wx_full = model.input_weights(l);
    const auto wx = wx_full.leftCols(l == 0 ? cols : h);
    const auto wh = model.recurrent_weights(l);
    const auto b = model.bias(l);
    lt.gates.resize(4 * h, count);
    lt.cells.setZero(h, count + 1);
    lt.hiddens.setZero(h, count + 1);
    Eigen::VectorXd pre(4 * h);
    for (Index k = 0; k < count; ++k) {
      pre.noalias() = wx * lt.inputs.col(k);
      pre.noalias() += wh * lt.hiddens.col(k);
      pre += b;
      for (Index j = 0; j < h; ++j) {
        pre[j] = sigmoid(pre[j]);
        pre[h + j] = sigmoid(pre[h + j]);
        pre[2 * h + j] = std::tanh(pre[2 * h + j]);
        pre[3 * h + j] = sigmoid(pre[3 * h + j]);
      }
      lt.gates.col(k) = pre;
      for (Index j = 0; j < h; ++j) {
        const double c = pre[h + j] * lt.cells(j, k) + pre[j] * pre[2 * h + j];
        lt.cells(j, k + 1) = c;
        lt.hiddens(j, k + 1) = pre[3 * h + j] * std::tanh(c);
      }
    }
  }
  trace.pre_activation = model.dense_weights() * trace.layers.back().hiddens.col(count) + model.dense_bias();
  trace.output = trace.pre_activation.cwiseMax(0.0);
  return trace;
}

void check_labels(const LstmModel& model, const Eigen::VectorXd& labels, const PredictionMask& mask) {
  if (labels.size() < ix(mask.outputs.size()) || labels.size() > ix(model.dims().output_size)) {
    throw Error(ErrorCategory::invalid_argument, "label vector does not match the prediction mask");
  }
  if (mask.valid_outputs() == 0) throw Error(ErrorCategory::invalid_argument, "prediction mask has no valid outputs");
}

}  // namespace

Eigen::VectorXd lstm_forward(const LstmModel& model, const RowMatrix& input, const PredictionMask& mask) {
  return run_forward(model, input, mask).output;
}

double mse_loss(const Eigen::VectorXd& prediction, const Eigen::VectorXd& labels, const PredictionMask& mask) {
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < mask.outputs.size(); ++i) {
    if (!mask.outputs[i]) continue;
    if (ix(i) >= prediction.size() || ix(i) >= labels.size()) {
      throw Error(ErrorCategory::invalid_argument, "prediction mask is longer than the predictions");
    }
    const double e = prediction[ix(i)] - labels[ix(i)];
    sum += e * e;
    ++count;
  }
  if (count == 0) throw Error(ErrorCategory::invalid_argument, "mse over an empty mask");
  return sum / static_cast<double>(count);
}

double accumulate_gradient(const LstmModel& model, const RowMatrix& input, const PredictionMask& mask,
                           const Eigen::VectorXd& labels, double scale, std::span<double> gradient) {
  check_labels(model, labels, mask);
  if (gradient.size() != model.params.size()) {
    throw Error(ErrorCategory::invalid_argument, "gradient buffer does not match the model");
  }
  const ForwardTrace trace = run_forward(model, input, mask);
  const auto& d = model.dims();
  const auto& layout = model.layout();
  const Index h = ix(d.hidden_size);
  const Index count = trace.layers.front().gates.cols();

  // Dense head.
  Eigen::VectorXd dz = Eigen::VectorXd::Zero(ix(d.output_size));
  double sse = 0.0;
  for (std::size_t i = 0; i < mask.outputs.size(); ++i) {
    if (!mask.outputs[i]) continue;
    const double e = trace.output[ix(i)] - labels[ix(i)];
    sse += e * e;
    if (trace.pre_activation[ix(i)] > 0.0) dz[ix(i)] = 2.0 * scale * e;
  }
  double* g = gradient.data();
  Eigen::Map<Eigen::MatrixXd> g_dense(g + layout.dense_weights, ix(d.output_size), h);
  Eigen::Map<Eigen::VectorXd> g_dense_bias(g + layout.dense_bias, ix(d.output_size));
  const auto& top = trace.layers.back();
  g_dense.noalias() += dz * top.hiddens.col(count).transpose();
  g_dense_bias += dz;

  // Upstream gradient on each layer's hidden outputs, per valid step.
  Eigen::MatrixXd dh_in = Eigen::MatrixXd::Zero(h, count);
  if (count > 0) dh_in.col(count - 1) = model.dense_weights().transpose() * dz;

  Eigen::VectorXd dh_next(h), dc_next(h), da(4 * h);
  for (std::size_t l = d.layers; l-- > 0;) {
    const LayerTrace& lt = trace.layers[l];
    const auto& pl = layout.layers[l];
    const Index in_rows = lt.inputs.rows();
    Eigen::Map<Eigen::MatrixXd> g_wx(g + pl.input_weights, 4 * h, ix(pl.input_dim));
    Eigen::Map<Eigen::MatrixXd> g_wh(g + pl.recurrent_weights, 4 * h, h);
    Eigen::Map<Eigen::VectorXd> g_b(g + pl.bias, 4 * h);
    const LstmModel::ConstMatMap wx_full = model.input_weights(l);
    const auto wx = wx_full.leftCols(in_rows);
    const auto wh = model.recurrent_weights(l);

    Eigen::MatrixXd dx = Eigen::MatrixXd::Zero(in_rows, count);
    dh_next.setZero();
    dc_next.setZero();
    for (Index k = count; k-- > 0;) {
      for (Index j = 0; j < h; ++j) {
        const double ig = lt.gates(j, k), fg = lt.gates(h + j, k), cg = lt.gates(2 * h + j, k),
                     og = lt.gates(3 * h + j, k);
        const double c = lt.cells(j, k + 1);
        const double tc = std::tanh(c);
        const double dh = dh_in(j, k) + dh_next[j];
        const double dc = dh * og * (1.0 - tc * tc) + dc_next[j];
        da[j] = dc * cg * ig * (1.0 - ig);
        da[h + j] = dc * lt.cells(j, k) * fg * (1.0 - fg);
        da[2 * h + j] = dc * ig * (1.0 - cg * cg);
        da[3 * h + j] = dh * tc * og * (1.0 - og);
        dc_next[j] = dc * fg;
      }
      g_wx.leftCols(in_rows).noalias() += da * lt.inputs.col(k).transpose();
      g_wh.noalias() += da * lt.hiddens.col(k).transpose();
      g_b += da;
      dh_next.noalias() = wh.transpose() * da;
      if (l > 0) dx.col(k).noalias() = wx.transpose() * da;
    }
    if (l > 0) dh_in = std::move(dx);
  }
  return sse;
}

std::vector<double> backward(const LstmModel& model, const RowMatrix& input, const PredictionMask& mask,
                             const Eigen::VectorXd& labels) {
  std::vector<double> grad(model.params.size(), 0.0);
  const double scale = 1.0 / static_cast<double>(mask.valid_outputs() == 0 ? 1 : mask.valid_outputs());
  accumulate_gradient(model, input, mask, labels, scale, grad);
  return grad;
}

}  // namespace satweight
