#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "art/error.hpp"
#include "art/rng.hpp"

// Small fully connected networks with hand-written backpropagation and an
// Adam optimizer. Samples are columns: a batch is an (input_dim x B) matrix.
namespace art::mlp {

enum class Head {
  kSimplex,  // normalized exponential over the output units
  kSquash,   // independent logistic per output unit
};

struct DenseLayer {
  Eigen::MatrixXd weight;  // fan_in x fan_out
  Eigen::VectorXd bias;    // fan_out

  bool operator==(const DenseLayer& o) const { return weight == o.weight && bias == o.bias; }
};

struct DenseNet {
  std::vector<std::size_t> dims;  // input, hidden..., output
  std::vector<DenseLayer> layers;
  Head head = Head::kSimplex;

  std::size_t input_dim() const { return dims.front(); }
  std::size_t output_dim() const { return dims.back(); }

  std::size_t parameter_count() const {
    std::size_t c = 0;
    for (const auto& l : layers) c += static_cast<std::size_t>(l.weight.size() + l.bias.size());
    return c;
  }

  bool operator==(const DenseNet& o) const { return dims == o.dims && layers == o.layers && head == o.head; }
};

// Glorot-uniform weights, zero biases.
inline DenseNet init_net(std::span<const std::size_t> dims, Head head, Rng& rng) {
  if (dims.size() < 2) throw Error("init_net: need at least input and output dims");
  for (std::size_t d : dims)
    if (d < 1) throw Error("init_net: all layer dims must be >= 1");
  DenseNet net;
  net.dims.assign(dims.begin(), dims.end());
  net.head = head;
  for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
    const auto fan_in = static_cast<Eigen::Index>(dims[l]);
    const auto fan_out = static_cast<Eigen::Index>(dims[l + 1]);
    const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
    DenseLayer layer{Eigen::MatrixXd(fan_in, fan_out), Eigen::VectorXd::Zero(fan_out)};
    for (Eigen::Index c = 0; c < fan_out; ++c)
      for (Eigen::Index r = 0; r < fan_in; ++r) layer.weight(r, c) = rng.uniform(-limit, limit);
    net.layers.push_back(std::move(layer));
  }
  return net;
}

// Activations kept for the backward pass. inputs[l] is what layer l
// consumed (inputs[0] is the network input); output is the head output.
struct ForwardCache {
  std::vector<Eigen::MatrixXd> inputs;
  Eigen::MatrixXd output;
};

namespace detail {

inline void apply_head(Head head, Eigen::MatrixXd& z) {
  if (head == Head::kSimplex) {
    for (Eigen::Index c = 0; c < z.cols(); ++c) {
      auto col = z.col(c);
      col.array() -= col.maxCoeff();
      col = col.array().exp();
      col /= col.sum();
    }
  } else {
    // Logistic written to avoid overflow for large |z|.
    z = z.unaryExpr([](double v) {
      if (v >= 0.0) return 1.0 / (1.0 + std::exp(-v));
      const double e = std::exp(v);
      return e / (1.0 + e);
    });
  }
}

}  // namespace detail

inline ForwardCache forward_batch(const DenseNet& net, const Eigen::MatrixXd& x) {
  if (static_cast<std::size_t>(x.rows()) != net.input_dim())
    throw Error("forward: input has " + std::to_string(x.rows()) + " rows, net expects " +
                std::to_string(net.input_dim()));
  if (!x.allFinite()) throw Error("forward: non-finite input");
  ForwardCache cache;
  cache.inputs.reserve(net.layers.size());
  cache.inputs.push_back(x);
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const auto& layer = net.layers[l];
    Eigen::MatrixXd z = layer.weight.transpose() * cache.inputs.back();
    z.colwise() += layer.bias;
    if (l + 1 < net.layers.size()) {
      cache.inputs.push_back(z.cwiseMax(0.0));
    } else {
      detail::apply_head(net.head, z);
      cache.output = std::move(z);
    }
  }
  return cache;
}

inline ForwardCache forward(const DenseNet& net, const Eigen::VectorXd& x) {
  return forward_batch(net, Eigen::MatrixXd(x));
}

struct Gradients {
  std::vector<DenseLayer> layers;  // same shapes as the net
  Eigen::MatrixXd input;           // d/d(input), one column per sample
};

inline Gradients zero_gradients(const DenseNet& net) {
  Gradients g;
  for (const auto& l : net.layers)
    g.layers.push_back({Eigen::MatrixXd::Zero(l.weight.rows(), l.weight.cols()), Eigen::VectorXd::Zero(l.bias.size())});
  return g;
}

// Gradient of sum_b <output_b, upstream_b> with respect to every parameter
// and to the input.
inline Gradients backward(const DenseNet& net, const ForwardCache& cache, const Eigen::MatrixXd& upstream) {
  const auto& y = cache.output;
  if (upstream.rows() != y.rows() || upstream.cols() != y.cols())
    throw Error("backward: upstream shape " + std::to_string(upstream.rows()) + "x" + std::to_string(upstream.cols()) +
                " does not match output " + std::to_string(y.rows()) + "x" + std::to_string(y.cols()));
  if (cache.inputs.size() != net.layers.size()) throw Error("backward: cache does not belong to this net");

  Eigen::MatrixXd dz;
  if (net.head == Head::kSimplex) {
    const Eigen::RowVectorXd dot = (y.array() * upstream.array()).colwise().sum();
    dz = y.array() * (upstream.rowwise() - dot).array();
  } else {
    dz = upstream.array() * y.array() * (1.0 - y.array());
  }

  Gradients g;
  g.layers.resize(net.layers.size());
  for (std::size_t l = net.layers.size(); l-- > 0;) {
    const auto& a = cache.inputs[l];
    g.layers[l].weight.noalias() = a * dz.transpose();
    g.layers[l].bias = dz.rowwise().sum();
    Eigen::MatrixXd da = net.layers[l].weight * dz;
    if (l == 0) {
      g.input = std::move(da);
    } else {
      // ReLU derivative: the stored activation is positive exactly where the
      // pre-activation was.
      dz = (a.array() > 0.0).select(da, 0.0);
    }
  }
  return g;
}

struct AdamMoments {
  std::vector<DenseLayer> first;
  std::vector<DenseLayer> second;
};

struct OptimizerState {
  AdamMoments moments;
  long long step = 0;
  double learning_rate = 1e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;

  bool operator==(const OptimizerState& o) const {
    return moments.first == o.moments.first && moments.second == o.moments.second && step == o.step &&
           learning_rate == o.learning_rate && beta1 == o.beta1 && beta2 == o.beta2 && epsilon == o.epsilon;
  }
};

inline OptimizerState make_optimizer(const DenseNet& net, double learning_rate, double beta1 = 0.9,
                                     double beta2 = 0.999, double epsilon = 1e-8) {
  OptimizerState s;
  s.moments.first = zero_gradients(net).layers;
  s.moments.second = zero_gradients(net).layers;
  s.learning_rate = learning_rate;
  s.beta1 = beta1;
  s.beta2 = beta2;
  s.epsilon = epsilon;
  return s;
}

// One bias-corrected Adam update (descent direction).
inline void adam_step(OptimizerState& state, DenseNet& net, const Gradients& grads) {
  if (grads.layers.size() != net.layers.size() || state.moments.first.size() != net.layers.size())
    throw Error("adam_step: layer count mismatch");
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    const auto& g = grads.layers[l];
    if (g.weight.rows() != net.layers[l].weight.rows() || g.weight.cols() != net.layers[l].weight.cols() ||
        g.bias.size() != net.layers[l].bias.size())
      throw Error("adam_step: gradient shape mismatch in layer " + std::to_string(l));
    if (!g.weight.allFinite() || !g.bias.allFinite())
      throw Error("adam_step: non-finite gradient in layer " + std::to_string(l));
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  const double lr = state.learning_rate;
  const double b1 = state.beta1;
  const double b2 = state.beta2;
  const double eps = state.epsilon;

  auto update = [&](auto& param, auto& m, auto& v, const auto& g) {
    m = b1 * m + (1.0 - b1) * g;
    v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
    param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
  };
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    auto& m = state.moments.first[l];
    auto& v = state.moments.second[l];
    update(net.layers[l].weight, m.weight, v.weight, grads.layers[l].weight);
    update(net.layers[l].bias, m.bias, v.bias, grads.layers[l].bias);
  }
}

// Flat parameter views used by gradient checks.
inline std::vector<double*> parameter_pointers(DenseNet& net) {
  std::vector<double*> out;
  for (auto& l : net.layers) {
    for (Eigen::Index i = 0; i < l.weight.size(); ++i) out.push_back(l.weight.data() + i);
    for (Eigen::Index i = 0; i < l.bias.size(); ++i) out.push_back(l.bias.data() + i);
  }
  return out;
}

inline std::vector<double> flatten(const Gradients& g) {
  std::vector<double> out;
  for (const auto& l : g.layers) {
    out.insert(out.end(), l.weight.data(), l.weight.data() + l.weight.size());
    out.insert(out.end(), l.bias.data(), l.bias.data() + l.bias.size());
  }
  return out;
}

}  // namespace art::mlp
