#include "rodflow/mlp.hpp"

#include "rodflow/error.hpp"

#include <cmath>
#include <random>

namespace rodflow {

std::size_t MlpArchitecture::parameter_count() const {
  std::size_t p = 0;
  for (std::size_t l = 0; l + 1 < layers.size(); ++l) p += layers[l] * layers[l + 1] + layers[l + 1];
  return p;
}

void MlpArchitecture::validate() const {
  require(layers.size() >= 2, ErrorCode::InvalidArgument, "mlp: need at least input and output layer sizes");
  for (std::size_t s : layers) require(s > 0, ErrorCode::InvalidArgument, "mlp: layer sizes must be positive");
}

TinyMlpModel::TinyMlpModel(MlpArchitecture arch, std::shared_ptr<const Dataset> data, MseReduction reduction)
    : arch_(std::move(arch)), data_(std::move(data)), reduction_(reduction) {
  arch_.validate();
  require(data_ != nullptr, ErrorCode::InvalidArgument, "mlp: dataset missing");
  data_->validate();
  require_same_dim(arch_.layers.front(), data_->input_dim(), "mlp input width vs dataset");
  require_same_dim(arch_.layers.back(), data_->output_dim(), "mlp output width vs dataset");
  dimension_ = arch_.parameter_count();
}

template <class T>
std::vector<T> TinyMlpModel::run(Tape<T>& tape, const std::vector<T>& params, T* loss_out, bool want_grad) const {
  const Dataset& d = *data_;
  Tensor<T> x(d.size(), d.input_dim());
  for (std::size_t i = 0; i < x.rows; ++i)
    for (std::size_t j = 0; j < x.cols; ++j)
      x(i, j) = T(d.inputs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));
  Tensor<T> y(d.size(), d.output_dim());
  for (std::size_t i = 0; i < y.rows; ++i)
    for (std::size_t j = 0; j < y.cols; ++j)
      y(i, j) = T(d.targets(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)));

  auto h = tape.constant(std::move(x));
  std::size_t offset = 0;
  const std::size_t depth = arch_.layers.size() - 1;
  for (std::size_t l = 0; l < depth; ++l) {
    const std::size_t fan_in = arch_.layers[l], fan_out = arch_.layers[l + 1];
    auto w = tape.parameter(params, offset, fan_in, fan_out);
    offset += fan_in * fan_out;
    auto b = tape.parameter(params, offset, 1, fan_out);
    offset += fan_out;
    h = tape.affine(h, w, b);
    if (l + 1 < depth) h = tape.activation(h, arch_.activation);
  }
  auto target = tape.constant(std::move(y));
  auto err = tape.squared_error(h, target);
  double denom = static_cast<double>(d.size());
  if (reduction_ == MseReduction::Mean) denom *= static_cast<double>(d.output_dim());
  auto loss = tape.scaled_sum(err, 1.0 / denom);
  if (loss_out) *loss_out = tape.value(loss).data[0];
  if (!want_grad) return {};
  return tape.gradient(loss, dimension_);
}

double TinyMlpModel::loss(const Weights& w) const {
  require_same_dim(dimension_, static_cast<std::size_t>(w.size()), "mlp loss weights");
  std::vector<double> params(w.data(), w.data() + w.size());
  Tape<double> tape;
  double value = 0.0;
  run(tape, params, &value, false);
  return value;
}

Weights TinyMlpModel::gradient(const Weights& w) const {
  require_same_dim(dimension_, static_cast<std::size_t>(w.size()), "mlp gradient weights");
  std::vector<double> params(w.data(), w.data() + w.size());
  Tape<double> tape;
  const std::vector<double> g = run<double>(tape, params, nullptr, true);
  return Eigen::Map<const Weights>(g.data(), static_cast<Eigen::Index>(g.size()));
}

Weights TinyMlpModel::hvp(const Weights& w, const Weights& v) const {
  require_same_dim(dimension_, static_cast<std::size_t>(w.size()), "mlp hvp weights");
  require_same_dim(dimension_, static_cast<std::size_t>(v.size()), "mlp hvp direction");
  std::vector<Dual> params(dimension_);
  for (std::size_t i = 0; i < dimension_; ++i)
    params[i] = Dual(w(static_cast<Eigen::Index>(i)), v(static_cast<Eigen::Index>(i)));
  Tape<Dual> tape;
  const std::vector<Dual> g = run<Dual>(tape, params, nullptr, true);
  Weights out(static_cast<Eigen::Index>(dimension_));
  for (std::size_t i = 0; i < dimension_; ++i) out(static_cast<Eigen::Index>(i)) = g[i].tangent;
  return out;
}

Weights mlp_init_weights(const MlpArchitecture& arch, std::uint64_t seed, double scale) {
  arch.validate();
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Weights w = Weights::Zero(static_cast<Eigen::Index>(arch.parameter_count()));
  Eigen::Index offset = 0;
  for (std::size_t l = 0; l + 1 < arch.layers.size(); ++l) {
    const std::size_t fan_in = arch.layers[l], fan_out = arch.layers[l + 1];
    const double sd = scale / std::sqrt(static_cast<double>(fan_in));
    for (std::size_t k = 0; k < fan_in * fan_out; ++k) w(offset++) = sd * normal(rng);
    offset += static_cast<Eigen::Index>(fan_out);
  }
  return w;
}

}  // namespace rodflow
