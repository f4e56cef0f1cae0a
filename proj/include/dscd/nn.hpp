#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "errors.hpp"
#include "rng.hpp"

namespace dscd {

enum class Activation { identity, relu, tanh, softmax };

inline std::string to_string(Activation a) {
  switch (a) {
    case Activation::identity: return "identity";
    case Activation::relu: return "relu";
    case Activation::tanh: return "tanh";
    case Activation::softmax: return "softmax";
  }
  return "identity";
}

inline Activation activation_from_string(const std::string& name) {
  if (name == "identity") return Activation::identity;
  if (name == "relu") return Activation::relu;
  if (name == "tanh") return Activation::tanh;
  if (name == "softmax") return Activation::softmax;
  throw ConfigError("unknown activation '" + name + "'");
}

// Numerically stable softmax of finite logits.
inline std::vector<double> softmax(std::span<const double> logits) {
  std::vector<double> out(logits.size());
  if (logits.empty()) return out;
  const double top = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    out[i] = std::exp(logits[i] - top);
    sum += out[i];
  }
  for (double& p : out) p /= sum;
  return out;
}

// Softmax restricted to entries where mask is true; masked entries get 0.
// An empty mask means every entry is allowed.
inline std::vector<double> masked_softmax(std::span<const double> logits, const std::vector<bool>& mask) {
  if (mask.empty()) return softmax(logits);
  if (mask.size() != logits.size()) throw ConfigError("action mask size does not match logits");
  std::vector<double> out(logits.size(), 0.0);
  double top = -HUGE_VAL;
  for (std::size_t i = 0; i < logits.size(); ++i)
    if (mask[i]) top = std::max(top, logits[i]);
  if (top == -HUGE_VAL) throw ConfigError("action mask excludes every action");
  double sum = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    if (!mask[i]) continue;
    out[i] = std::exp(logits[i] - top);
    sum += out[i];
  }
  for (double& p : out) p /= sum;
  return out;
}

struct DenseLayer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weights;  // out x in, row-major
  std::vector<double> bias;
  Activation activation = Activation::identity;

  bool operator==(const DenseLayer&) const = default;
};

struct LayerGradient {
  std::vector<double> weights;
  std::vector<double> bias;
};

// Parameter gradient with the same layout as FeedForwardNet's layers.
using Gradient = std::vector<LayerGradient>;

inline double squared_norm(const Gradient& g) {
  double s = 0.0;
  for (const auto& layer : g) {
    for (double v : layer.weights) s += v * v;
    for (double v : layer.bias) s += v * v;
  }
  return s;
}

inline bool all_finite(const Gradient& g) {
  for (const auto& layer : g) {
    for (double v : layer.weights)
      if (!std::isfinite(v)) return false;
    for (double v : layer.bias)
      if (!std::isfinite(v)) return false;
  }
  return true;
}

inline void scale(Gradient& g, double factor) {
  for (auto& layer : g) {
    for (double& v : layer.weights) v *= factor;
    for (double& v : layer.bias) v *= factor;
  }
}

// Rescales g so that its global L2 norm is at most max_norm.
inline void clip_global_norm(Gradient& g, double max_norm) {
  const double norm = std::sqrt(squared_norm(g));
  if (norm > max_norm && norm > 0.0) scale(g, max_norm / norm);
}

// Dot product with four independent partial sums so the loop vectorises.
inline double dot(const double* a, const double* b, std::size_t n) {
  double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    s0 += a[i] * b[i];
    s1 += a[i + 1] * b[i + 1];
    s2 += a[i + 2] * b[i + 2];
    s3 += a[i + 3] * b[i + 3];
  }
  for (; i < n; ++i) s0 += a[i] * b[i];
  return (s0 + s1) + (s2 + s3);
}

// Intermediate values of one forward pass, kept for backpropagation.
struct ForwardTrace {
  std::vector<std::vector<double>> inputs;  // input fed to each layer
  std::vector<std::vector<double>> outputs; // post-activation output of each layer
  std::vector<double> logits;                // pre-activation of the output layer
  const std::vector<double>& output() const { return outputs.back(); }
};

class FeedForwardNet {
 public:
  FeedForwardNet() = default;

  // Zero-initialized net. hidden layers use activations[i], last layer the final entry.
  FeedForwardNet(const std::vector<std::size_t>& layer_dims, const std::vector<Activation>& activations) {
    if (layer_dims.size() < 2) throw ConfigError("a network needs at least input and output dimensions");
    if (activations.size() != layer_dims.size() - 1)
      throw ConfigError("one activation per layer is required");
    for (std::size_t d : layer_dims)
      if (d == 0) throw ConfigError("layer dimensions must be positive");
    for (std::size_t i = 0; i + 1 < activations.size(); ++i)
      if (activations[i] == Activation::softmax) throw ConfigError("softmax is only allowed on the output layer");
    layers_.resize(activations.size());
    for (std::size_t i = 0; i < layers_.size(); ++i) {
      DenseLayer& l = layers_[i];
      l.in = layer_dims[i];
      l.out = layer_dims[i + 1];
      l.weights.assign(l.in * l.out, 0.0);
      l.bias.assign(l.out, 0.0);
      l.activation = activations[i];
    }
  }

  // Weights uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)]; biases zero.
  static FeedForwardNet uniform_init(const std::vector<std::size_t>& layer_dims,
                                     const std::vector<Activation>& activations, Rng& rng) {
    FeedForwardNet net(layer_dims, activations);
    for (auto& l : net.layers_) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(l.in));
      for (double& w : l.weights) w = uniform(rng, -bound, bound);
    }
    return net;
  }

  std::size_t input_dim() const { return layers_.front().in; }
  std::size_t output_dim() const { return layers_.back().out; }
  const std::vector<DenseLayer>& layers() const { return layers_; }
  std::vector<DenseLayer>& layers() { return layers_; }

  std::vector<std::size_t> layer_dims() const {
    std::vector<std::size_t> dims{layers_.front().in};
    for (const auto& l : layers_) dims.push_back(l.out);
    return dims;
  }

  std::vector<double> forward(std::span<const double> x) const { return trace(x).outputs.back(); }

  ForwardTrace trace(std::span<const double> x) const {
    if (x.size() != input_dim())
      throw ConfigError("input has " + std::to_string(x.size()) + " features, network expects " +
                        std::to_string(input_dim()));
    ForwardTrace t;
    t.inputs.reserve(layers_.size());
    t.outputs.reserve(layers_.size());
    std::vector<double> current(x.begin(), x.end());
    for (const auto& l : layers_) {
      std::vector<double> z(l.bias);
      for (std::size_t o = 0; o < l.out; ++o) {
        z[o] += dot(l.weights.data() + o * l.in, current.data(), l.in);
      }
      if (&l == &layers_.back()) t.logits = z;
      activate(l.activation, z);
      t.inputs.push_back(std::move(current));
      current = z;
      t.outputs.push_back(std::move(z));
    }
    return t;
  }

  // Gradient of a scalar loss given dLoss/dOutput (post-activation).
  Gradient backward(const ForwardTrace& t, std::span<const double> output_grad) const {
    if (output_grad.size() != output_dim()) throw ConfigError("output gradient has wrong dimension");
    const DenseLayer& last = layers_.back();
    const auto& y = t.outputs.back();
    std::vector<double> delta(output_grad.begin(), output_grad.end());
    if (last.activation == Activation::softmax) {
      double dot = 0.0;
      for (std::size_t i = 0; i < y.size(); ++i) dot += delta[i] * y[i];
      for (std::size_t i = 0; i < y.size(); ++i) delta[i] = y[i] * (delta[i] - dot);
    } else {
      apply_derivative(last.activation, y, delta);
    }
    return backward_from_preactivation(t, std::move(delta));
  }

  // Gradient of a scalar loss given dLoss/dz for the output layer's pre-activation z.
  Gradient backward_from_preactivation(const ForwardTrace& t, std::vector<double> delta) const {
    const auto deltas = layer_deltas(t, std::move(delta));
    Gradient g(layers_.size());
    for (std::size_t k = 0; k < layers_.size(); ++k) {
      const DenseLayer& l = layers_[k];
      const auto& x = t.inputs[k];
      const auto& d = deltas[k];
      LayerGradient& lg = g[k];
      lg.bias = d;
      lg.weights.resize(l.weights.size());
      for (std::size_t o = 0; o < l.out; ++o) {
        double* row = lg.weights.data() + o * l.in;
        for (std::size_t i = 0; i < l.in; ++i) row[i] = d[o] * x[i];
      }
    }
    return g;
  }

  // dLoss/dz for every layer's pre-activation. For one sample, layer k's weight
  // gradient is the outer product deltas[k] x inputs[k] and its bias gradient is deltas[k].
  std::vector<std::vector<double>> layer_deltas(const ForwardTrace& t, std::vector<double> delta) const {
    if (delta.size() != output_dim()) throw ConfigError("pre-activation gradient has wrong dimension");
    std::vector<std::vector<double>> deltas(layers_.size());
    for (std::size_t k = layers_.size(); k-- > 0;) {
      const DenseLayer& l = layers_[k];
      if (k > 0) {
        std::vector<double> prev(l.in, 0.0);
        for (std::size_t o = 0; o < l.out; ++o) {
          const double* row = l.weights.data() + o * l.in;
          const double d = delta[o];
          if (d == 0.0) continue;
          for (std::size_t i = 0; i < l.in; ++i) prev[i] += row[i] * d;
        }
        apply_derivative(layers_[k - 1].activation, t.outputs[k - 1], prev);
        deltas[k] = std::move(delta);
        delta = std::move(prev);
      } else {
        deltas[k] = std::move(delta);
      }
    }
    return deltas;
  }

  // Squared L2 norm of the gradient given by layer_deltas without materialising it.
  static double factored_squared_norm(const ForwardTrace& t, const std::vector<std::vector<double>>& deltas) {
    double total = 0.0;
    for (std::size_t k = 0; k < deltas.size(); ++k) {
      double dn = 0.0, xn = 1.0;  // the bias acts as an input fixed at 1
      for (double d : deltas[k]) dn += d * d;
      for (double x : t.inputs[k]) xn += x * x;
      total += dn * xn;
    }
    return total;
  }

  // params += step * g for the gradient given by layer_deltas.
  void apply_factored(const ForwardTrace& t, const std::vector<std::vector<double>>& deltas, double step) {
    for (std::size_t k = 0; k < layers_.size(); ++k) {
      auto& l = layers_[k];
      const auto& x = t.inputs[k];
      for (std::size_t o = 0; o < l.out; ++o) {
        const double c = step * deltas[k][o];
        l.bias[o] += c;
        if (c == 0.0) continue;
        double* row = l.weights.data() + o * l.in;
        for (std::size_t i = 0; i < l.in; ++i) row[i] += c * x[i];
      }
    }
  }

  // params += step * g
  void apply(const Gradient& g, double step) {
    for (std::size_t k = 0; k < layers_.size(); ++k) {
      auto& l = layers_[k];
      for (std::size_t i = 0; i < l.weights.size(); ++i) l.weights[i] += step * g[k].weights[i];
      for (std::size_t i = 0; i < l.bias.size(); ++i) l.bias[i] += step * g[k].bias[i];
    }
  }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += l.weights.size() + l.bias.size();
    return n;
  }

  // Flat parameter view, layer by layer, weights before biases.
  double parameter(std::size_t index) const { return const_cast<FeedForwardNet*>(this)->parameter_ref(index); }
  void set_parameter(std::size_t index, double value) { parameter_ref(index) = value; }

  std::vector<double> flat_parameters() const {
    std::vector<double> flat;
    flat.reserve(parameter_count());
    for (const auto& l : layers_) {
      flat.insert(flat.end(), l.weights.begin(), l.weights.end());
      flat.insert(flat.end(), l.bias.begin(), l.bias.end());
    }
    return flat;
  }

  bool operator==(const FeedForwardNet&) const = default;

 private:
  static void activate(Activation a, std::vector<double>& z) {
    switch (a) {
      case Activation::identity: break;
      case Activation::relu:
        for (double& v : z) v = v > 0.0 ? v : 0.0;
        break;
      case Activation::tanh:
        for (double& v : z) v = std::tanh(v);
        break;
      case Activation::softmax: z = softmax(z); break;
    }
  }

  // grad *= f'(z) expressed through the activation output y.
  static void apply_derivative(Activation a, const std::vector<double>& y, std::vector<double>& grad) {
    switch (a) {
      case Activation::identity: break;
      case Activation::relu:
        for (std::size_t i = 0; i < grad.size(); ++i)
          if (y[i] <= 0.0) grad[i] = 0.0;
        break;
      case Activation::tanh:
        for (std::size_t i = 0; i < grad.size(); ++i) grad[i] *= 1.0 - y[i] * y[i];
        break;
      case Activation::softmax: throw ConfigError("softmax is only allowed on the output layer");
    }
  }

  double& parameter_ref(std::size_t index) {
    for (auto& l : layers_) {
      if (index < l.weights.size()) return l.weights[index];
      index -= l.weights.size();
      if (index < l.bias.size()) return l.bias[index];
      index -= l.bias.size();
    }
    throw ConfigError("parameter index out of range");
  }

  std::vector<DenseLayer> layers_;
};

// Flat checkpoint record: layer dims, activations and row-major weights.
inline nlohmann::json to_json(const FeedForwardNet& net) {
  nlohmann::json j;
  j["layer_dims"] = net.layer_dims();
  auto& layers = j["layers"] = nlohmann::json::array();
  for (const auto& l : net.layers())
    layers.push_back({{"activation", to_string(l.activation)}, {"weights", l.weights}, {"bias", l.bias}});
  return j;
}

inline FeedForwardNet net_from_json(const nlohmann::json& j) {
  const auto dims = j.at("layer_dims").get<std::vector<std::size_t>>();
  std::vector<Activation> acts;
  for (const auto& l : j.at("layers")) acts.push_back(activation_from_string(l.at("activation").get<std::string>()));
  FeedForwardNet net(dims, acts);
  for (std::size_t k = 0; k < acts.size(); ++k) {
    auto w = j["layers"][k].at("weights").get<std::vector<double>>();
    auto b = j["layers"][k].at("bias").get<std::vector<double>>();
    if (w.size() != net.layers()[k].weights.size() || b.size() != net.layers()[k].bias.size())
      throw ConfigError("checkpoint layer " + std::to_string(k) + " does not match its declared dims");
    net.layers()[k].weights = std::move(w);
    net.layers()[k].bias = std::move(b);
  }
  return net;
}

}  // namespace dscd
