#pragma once

// Small reverse-mode tape over matrix-valued nodes. Instantiated with
// double it yields gradients; with Dual the reverse sweep is itself
// differentiated along the seed tangent, which gives Hessian-vector products.

#include "rodflow/error.hpp"

#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

namespace rodflow {

struct Dual {
  double value = 0.0;
  double tangent = 0.0;

  constexpr Dual() = default;
  constexpr Dual(double v) : value(v) {}  // NOLINT: implicit lift of constants
  constexpr Dual(double v, double t) : value(v), tangent(t) {}

  Dual& operator+=(const Dual& o) { value += o.value; tangent += o.tangent; return *this; }
  Dual& operator-=(const Dual& o) { value -= o.value; tangent -= o.tangent; return *this; }
  Dual& operator*=(const Dual& o) {
    tangent = tangent * o.value + value * o.tangent;
    value *= o.value;
    return *this;
  }
  Dual& operator/=(const Dual& o) {
    tangent = (tangent * o.value - value * o.tangent) / (o.value * o.value);
    value /= o.value;
    return *this;
  }
};

inline Dual operator+(Dual a, const Dual& b) { return a += b; }
inline Dual operator-(Dual a, const Dual& b) { return a -= b; }
inline Dual operator*(Dual a, const Dual& b) { return a *= b; }
inline Dual operator/(Dual a, const Dual& b) { return a /= b; }
inline Dual operator-(const Dual& a) { return {-a.value, -a.tangent}; }
inline Dual exp(const Dual& a) {
  const double e = std::exp(a.value);
  return {e, e * a.tangent};
}
inline Dual tanh(const Dual& a) {
  const double t = std::tanh(a.value);
  return {t, (1.0 - t * t) * a.tangent};
}

inline double primal(double x) { return x; }
inline double primal(const Dual& x) { return x.value; }

enum class Activation { Silu, Tanh };

template <class T>
T activate(Activation kind, const T& x) {
  using std::exp;
  using std::tanh;
  if (kind == Activation::Tanh) return tanh(x);
  return x / (T(1.0) + exp(-x));
}

template <class T>
T activate_derivative(Activation kind, const T& x) {
  using std::exp;
  using std::tanh;
  if (kind == Activation::Tanh) {
    const T t = tanh(x);
    return T(1.0) - t * t;
  }
  const T s = T(1.0) / (T(1.0) + exp(-x));
  return s * (T(1.0) + x * (T(1.0) - s));
}

template <class T>
struct Tensor {
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<T> data;  // row-major

  Tensor() = default;
  Tensor(std::size_t r, std::size_t c) : rows(r), cols(c), data(r * c, T(0.0)) {}
  T& operator()(std::size_t i, std::size_t j) { return data[i * cols + j]; }
  const T& operator()(std::size_t i, std::size_t j) const { return data[i * cols + j]; }
  std::size_t size() const { return data.size(); }
};

template <class T>
class Tape {
 public:
  using NodeId = std::size_t;

  NodeId constant(Tensor<T> value) { return push(std::move(value), Op::Constant, {}); }

  // rows x cols block of the flat parameter vector, row-major from offset.
  NodeId parameter(const std::vector<T>& params, std::size_t offset, std::size_t rows, std::size_t cols) {
    require(offset + rows * cols <= params.size(), ErrorCode::DimensionMismatch, "Tape::parameter: slice out of range");
    Tensor<T> t(rows, cols);
    for (std::size_t k = 0; k < rows * cols; ++k) t.data[k] = params[offset + k];
    const NodeId id = push(std::move(t), Op::Parameter, {});
    nodes_[id].offset = offset;
    return id;
  }

  // x (n x i) * W (i x o) + b (1 x o), bias broadcast over rows
  NodeId affine(NodeId x, NodeId w, NodeId b) {
    const Tensor<T>& X = value(x);
    const Tensor<T>& W = value(w);
    const Tensor<T>& B = value(b);
    require(X.cols == W.rows && B.rows == 1 && B.cols == W.cols, ErrorCode::DimensionMismatch,
            "Tape::affine: shape mismatch");
    Tensor<T> y(X.rows, W.cols);
    for (std::size_t n = 0; n < X.rows; ++n)
      for (std::size_t o = 0; o < W.cols; ++o) {
        T acc = B(0, o);
        for (std::size_t i = 0; i < X.cols; ++i) acc += X(n, i) * W(i, o);
        y(n, o) = acc;
      }
    return push(std::move(y), Op::Affine, {x, w, b});
  }

  NodeId activation(NodeId x, Activation kind) {
    Tensor<T> y = value(x);
    for (auto& e : y.data) e = activate(kind, e);
    const NodeId id = push(std::move(y), Op::Activation, {x});
    nodes_[id].activation = kind;
    return id;
  }

  NodeId squared_error(NodeId prediction, NodeId target) {
    const Tensor<T>& P = value(prediction);
    const Tensor<T>& Y = value(target);
    require(P.rows == Y.rows && P.cols == Y.cols, ErrorCode::DimensionMismatch, "Tape::squared_error: shape mismatch");
    Tensor<T> e(P.rows, P.cols);
    for (std::size_t k = 0; k < e.size(); ++k) {
      const T d = P.data[k] - Y.data[k];
      e.data[k] = d * d;
    }
    return push(std::move(e), Op::SquaredError, {prediction, target});
  }

  // Sum of all entries times scale, as a 1x1 node.
  NodeId scaled_sum(NodeId x, double scale) {
    Tensor<T> s(1, 1);
    T acc(0.0);
    for (const auto& e : value(x).data) acc += e;
    s(0, 0) = acc * T(scale);
    const NodeId id = push(std::move(s), Op::ScaledSum, {x});
    nodes_[id].scale = scale;
    return id;
  }

  const Tensor<T>& value(NodeId id) const { return nodes_.at(id).value; }
  std::size_t size() const { return nodes_.size(); }

  // Reverse sweep from a scalar node; parameter adjoints are scattered into
  // a flat vector of length parameter_count.
  std::vector<T> gradient(NodeId output, std::size_t parameter_count) const {
    require(value(output).size() == 1, ErrorCode::InvalidArgument, "Tape::gradient: output is not scalar");
    std::vector<Tensor<T>> adj(nodes_.size());
    for (std::size_t k = 0; k <= output; ++k) adj[k] = Tensor<T>(nodes_[k].value.rows, nodes_[k].value.cols);
    adj[output].data[0] = T(1.0);
    std::vector<T> grad(parameter_count, T(0.0));

    for (std::size_t idx = output + 1; idx-- > 0;) {
      const Node& node = nodes_[idx];
      const Tensor<T>& g = adj[idx];
      switch (node.op) {
        case Op::Constant:
          break;
        case Op::Parameter:
          require(node.offset + g.size() <= parameter_count, ErrorCode::DimensionMismatch,
                  "Tape::gradient: parameter slice out of range");
          for (std::size_t k = 0; k < g.size(); ++k) grad[node.offset + k] += g.data[k];
          break;
        case Op::Affine: {
          const Tensor<T>& X = nodes_[node.inputs[0]].value;
          const Tensor<T>& W = nodes_[node.inputs[1]].value;
          Tensor<T>& gx = adj[node.inputs[0]];
          Tensor<T>& gw = adj[node.inputs[1]];
          Tensor<T>& gb = adj[node.inputs[2]];
          for (std::size_t n = 0; n < g.rows; ++n)
            for (std::size_t o = 0; o < g.cols; ++o) {
              const T go = g(n, o);
              gb(0, o) += go;
              for (std::size_t i = 0; i < X.cols; ++i) {
                gx(n, i) += go * W(i, o);
                gw(i, o) += X(n, i) * go;
              }
            }
          break;
        }
        case Op::Activation: {
          const Tensor<T>& X = nodes_[node.inputs[0]].value;
          Tensor<T>& gx = adj[node.inputs[0]];
          for (std::size_t k = 0; k < g.size(); ++k) gx.data[k] += g.data[k] * activate_derivative(node.activation, X.data[k]);
          break;
        }
        case Op::SquaredError: {
          const Tensor<T>& P = nodes_[node.inputs[0]].value;
          const Tensor<T>& Y = nodes_[node.inputs[1]].value;
          Tensor<T>& gp = adj[node.inputs[0]];
          Tensor<T>& gy = adj[node.inputs[1]];
          for (std::size_t k = 0; k < g.size(); ++k) {
            const T d = T(2.0) * (P.data[k] - Y.data[k]) * g.data[k];
            gp.data[k] += d;
            gy.data[k] -= d;
          }
          break;
        }
        case Op::ScaledSum: {
          Tensor<T>& gx = adj[node.inputs[0]];
          const T s = g.data[0] * T(node.scale);
          for (auto& e : gx.data) e += s;
          break;
        }
      }
    }
    return grad;
  }

 private:
  enum class Op { Constant, Parameter, Affine, Activation, SquaredError, ScaledSum };

  struct Node {
    Tensor<T> value;
    Op op = Op::Constant;
    std::vector<NodeId> inputs;
    std::size_t offset = 0;
    Activation activation = Activation::Silu;
    double scale = 1.0;
  };

  NodeId push(Tensor<T> value, Op op, std::vector<NodeId> inputs) {
    nodes_.push_back(Node{std::move(value), op, std::move(inputs)});
    return nodes_.size() - 1;
  }

  std::vector<Node> nodes_;
};

}  // namespace rodflow
