#pragma once

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <istream>
#include <ostream>
#include <random>
#include <span>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include "fpinn/autodiff.hpp"

namespace fpinn {

enum class Activation { Tanh };

/// Architecture of the scalar-output MLP u_NN. "hidden_layers" counts hidden
/// layers only; the affine output layer is implicit.
struct NetworkConfig {
  int input_dim = 1;            // 1 (t), 2 (x,t) or 3 (x,y,t)
  int hidden_layers = 3;
  int neurons_per_layer = 10;
  Activation activation = Activation::Tanh;
  std::uint64_t seed = 0;

  void validate() const {
    if (input_dim < 1 || input_dim > 3) {
      throw std::invalid_argument("NetworkConfig: input_dim must be 1, 2 or 3");
    }
    if (hidden_layers < 1) throw std::invalid_argument("NetworkConfig: need at least one hidden layer");
    if (neurons_per_layer < 1) throw std::invalid_argument("NetworkConfig: need at least one neuron");
  }

  /// Exact parameter count: sum over layers of (fan_in + 1) * fan_out.
  std::size_t param_count() const {
    const std::size_t w = static_cast<std::size_t>(neurons_per_layer);
    std::size_t count = (static_cast<std::size_t>(input_dim) + 1) * w;
    for (int l = 1; l < hidden_layers; ++l) count += (w + 1) * w;
    count += w + 1;  // output layer
    return count;
  }
};

namespace detail {

/// Deterministic uniform double in [0,1) from a 64-bit engine draw; pinned to
/// an explicit bit mapping so initialization is reproducible bit-for-bit.
inline double uniform01(std::mt19937_64& eng) {
  return static_cast<double>(eng() >> 11) * 0x1.0p-53;
}

}  // namespace detail

/// The MLP parameter set with a flat layer-major layout:
/// for each layer, fan_out x fan_in weights (output-major rows) followed by
/// fan_out biases. Evaluation is pure in (params, input) and is templated so
/// the same code path runs on plain doubles, forward jets, tape variables, or
/// jets of tape variables.
struct Network {
  NetworkConfig config;
  std::vector<double> params;

  /// Glorot-uniform weights from the seeded generator, zero biases.
  static Network init(const NetworkConfig& cfg) {
    cfg.validate();
    Network net;
    net.config = cfg;
    net.params.assign(cfg.param_count(), 0.0);
    std::mt19937_64 eng(cfg.seed);
    std::size_t ofs = 0;
    const int n_layers = cfg.hidden_layers + 1;
    for (int l = 0; l < n_layers; ++l) {
      const int fan_in = (l == 0) ? cfg.input_dim : cfg.neurons_per_layer;
      const int fan_out = (l == cfg.hidden_layers) ? 1 : cfg.neurons_per_layer;
      const double limit = std::sqrt(6.0 / static_cast<double>(fan_in + fan_out));
      for (int k = 0; k < fan_in * fan_out; ++k) {
        net.params[ofs + static_cast<std::size_t>(k)] =
            (2.0 * detail::uniform01(eng) - 1.0) * limit;
      }
      ofs += static_cast<std::size_t>(fan_in * fan_out) + static_cast<std::size_t>(fan_out);
    }
    return net;
  }

  /// Forward pass with arbitrary parameter scalar P and input scalar X.
  /// P is double or ad::Var; X additionally admits jets of either.
  template <class P, class X>
  static auto eval(const NetworkConfig& cfg, std::span<const P> params,
                   std::span<const X> input) {
    using ad::fmadd;
    using R = decltype(std::declval<X>() * std::declval<P>() + std::declval<P>());
    if (input.size() != static_cast<std::size_t>(cfg.input_dim)) {
      throw std::invalid_argument("Network::eval: input dimension mismatch");
    }
    std::vector<R> act(input.begin(), input.end());
    std::vector<R> next;
    std::size_t ofs = 0;
    for (int l = 0; l < cfg.hidden_layers; ++l) {
      const int fan_in = (l == 0) ? cfg.input_dim : cfg.neurons_per_layer;
      const int fan_out = cfg.neurons_per_layer;
      const std::size_t bias_ofs = ofs + static_cast<std::size_t>(fan_in * fan_out);
      next.clear();
      next.reserve(static_cast<std::size_t>(fan_out));
      for (int o = 0; o < fan_out; ++o) {
        R acc(params[bias_ofs + static_cast<std::size_t>(o)]);
        const std::size_t row = ofs + static_cast<std::size_t>(o * fan_in);
        for (int i = 0; i < fan_in; ++i) {
          acc = fmadd(acc, params[row + static_cast<std::size_t>(i)],
                      act[static_cast<std::size_t>(i)]);
        }
        using std::tanh;
        using ad::tanh;
        next.push_back(tanh(acc));
      }
      act.swap(next);
      ofs = bias_ofs + static_cast<std::size_t>(fan_out);
    }
    const int fan_in = cfg.neurons_per_layer;
    const std::size_t bias_ofs = ofs + static_cast<std::size_t>(fan_in);
    R out(params[bias_ofs]);
    for (int i = 0; i < fan_in; ++i) {
      out = fmadd(out, params[ofs + static_cast<std::size_t>(i)],
                  act[static_cast<std::size_t>(i)]);
    }
    return out;
  }

  double forward(std::span<const double> input) const {
    return eval<double, double>(config, params, input);
  }

  // ---- checkpoint io (text, 17 significant digits, bit-exact round trip) ----

  void save(std::ostream& out) const {
    out << "fpinn-network v1\n";
    out << "input_dim " << config.input_dim << "\n";
    out << "hidden_layers " << config.hidden_layers << "\n";
    out << "neurons_per_layer " << config.neurons_per_layer << "\n";
    out << "activation tanh\n";
    out << "seed " << config.seed << "\n";
    out << "param_count " << params.size() << "\n";
    char buf[40];
    for (double p : params) {
      std::snprintf(buf, sizeof buf, "%.17g", p);
      out << buf << "\n";
    }
  }

  static Network load(std::istream& in) {
    std::string line;
    if (!std::getline(in, line) || line != "fpinn-network v1") {
      throw std::runtime_error("network checkpoint: bad magic line");
    }
    NetworkConfig cfg;
    std::size_t count = 0;
    auto expect = [&in, &line](const std::string& key) -> std::string {
      if (!std::getline(in, line)) throw std::runtime_error("network checkpoint: truncated header");
      std::istringstream ss(line);
      std::string k, v;
      ss >> k >> v;
      if (k != key) throw std::runtime_error("network checkpoint: expected key '" + key + "'");
      return v;
    };
    cfg.input_dim = std::stoi(expect("input_dim"));
    cfg.hidden_layers = std::stoi(expect("hidden_layers"));
    cfg.neurons_per_layer = std::stoi(expect("neurons_per_layer"));
    if (expect("activation") != "tanh") {
      throw std::runtime_error("network checkpoint: unsupported activation");
    }
    cfg.seed = std::stoull(expect("seed"));
    count = std::stoull(expect("param_count"));
    cfg.validate();
    if (count != cfg.param_count()) {
      throw std::runtime_error("network checkpoint: parameter count disagrees with config");
    }
    Network net;
    net.config = cfg;
    net.params.reserve(count);
    for (std::size_t i = 0; i < count; ++i) {
      if (!std::getline(in, line)) throw std::runtime_error("network checkpoint: truncated params");
      net.params.push_back(std::stod(line));
    }
    return net;
  }
};

/// Value, first, and second derivative of u_NN along one input axis at a
/// point, exact to roundoff (propagated jets, not finite differences).
struct SecondDerivative {
  double value;
  double d1;
  double d2;
};

inline SecondDerivative second_spatial(const Network& net, std::span<const double> point,
                                       int axis) {
  if (axis < 0 || axis >= net.config.input_dim) {
    throw std::invalid_argument("second_spatial: axis out of range");
  }
  if (point.size() != static_cast<std::size_t>(net.config.input_dim)) {
    throw std::invalid_argument("second_spatial: point dimension mismatch");
  }
  std::vector<ad::Jet2<double>> in;
  in.reserve(point.size());
  for (std::size_t i = 0; i < point.size(); ++i) {
    if (static_cast<int>(i) == axis) {
      in.push_back(ad::Jet2<double>::seed(point[i]));
    } else {
      in.push_back(ad::Jet2<double>(point[i]));
    }
  }
  const auto jet = Network::eval<double, ad::Jet2<double>>(net.config, net.params, in);
  return {jet.v, jet.d1, jet.d2};
}

}  // namespace fpinn
