#pragma once

// Small fully connected networks with tanh hidden units, hand-written
// backpropagation and an Adam optimizer. Samples are stored column-wise:
// an input batch is an (input_dim x batch) matrix.

#include <Eigen/Dense>
#include <cmath>
#include <vector>

#include "json.hpp"
#include "qaoaml/errors.hpp"
#include "qaoaml/rng.hpp"

namespace qaoaml {

struct MlpGrad {
  std::vector<Eigen::MatrixXd> weights;
  std::vector<Eigen::VectorXd> biases;
};

class Mlp {
 public:
  Mlp() = default;

  /// `sizes` = {in, hidden..., out}. Hidden layers use tanh; the output is
  /// `output_scale * tanh(.)` when `tanh_output`, linear otherwise.
  /// Weights start uniform in +-1/sqrt(fan_in), the output layer shrunk by
  /// `output_gain`; biases start at zero.
  Mlp(std::vector<int> sizes, bool tanh_output, double output_scale, Rng& rng,
      double output_gain = 1.0)
      : sizes_(std::move(sizes)), tanh_output_(tanh_output), output_scale_(output_scale) {
    if (sizes_.size() < 2) throw DomainError("mlp: need at least input and output sizes");
    for (std::size_t l = 0; l + 1 < sizes_.size(); ++l) {
      const int in = sizes_[l];
      const int out = sizes_[l + 1];
      const double bound = 1.0 / std::sqrt(static_cast<double>(in));
      const double gain = l + 2 == sizes_.size() ? output_gain : 1.0;
      Eigen::MatrixXd w(out, in);
      for (int r = 0; r < out; ++r)
        for (int c = 0; c < in; ++c) w(r, c) = gain * rng.uniform(-bound, bound);
      weights_.push_back(std::move(w));
      biases_.push_back(Eigen::VectorXd::Zero(out));
    }
  }

  [[nodiscard]] int input_dim() const { return sizes_.front(); }
  [[nodiscard]] int output_dim() const { return sizes_.back(); }
  [[nodiscard]] const std::vector<int>& sizes() const { return sizes_; }
  [[nodiscard]] bool tanh_output() const { return tanh_output_; }
  [[nodiscard]] double output_scale() const { return output_scale_; }
  [[nodiscard]] std::size_t layers() const { return weights_.size(); }
  std::vector<Eigen::MatrixXd>& weights() { return weights_; }
  std::vector<Eigen::VectorXd>& biases() { return biases_; }
  [[nodiscard]] const std::vector<Eigen::MatrixXd>& weights() const { return weights_; }
  [[nodiscard]] const std::vector<Eigen::VectorXd>& biases() const { return biases_; }

  /// Activations of every layer, kept for backward(). acts[0] is the input.
  struct Cache {
    std::vector<Eigen::MatrixXd> acts;
  };

  [[nodiscard]] Eigen::MatrixXd forward(const Eigen::MatrixXd& x, Cache* cache = nullptr) const {
    if (x.rows() != input_dim()) throw DomainError("mlp: input dimension mismatch");
    Eigen::MatrixXd a = x;
    if (cache) cache->acts.assign(1, a);
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      Eigen::MatrixXd z = weights_[l] * a;
      z.colwise() += biases_[l];
      const bool last = l + 1 == weights_.size();
      if (!last || tanh_output_) z = z.array().tanh().matrix();
      a = std::move(z);
      if (cache) cache->acts.push_back(a);
    }
    if (tanh_output_) a *= output_scale_;
    return a;
  }

  /// Gradient of sum_ij upstream(i,j) * output(i,j) with respect to the parameters.
  [[nodiscard]] MlpGrad backward(const Cache& cache, const Eigen::MatrixXd& upstream) const {
    MlpGrad g = zero_grad();
    Eigen::MatrixXd delta = upstream;
    for (std::size_t l = weights_.size(); l-- > 0;) {
      const Eigen::MatrixXd& out = cache.acts[l + 1];
      const bool last = l + 1 == weights_.size();
      if (last && tanh_output_) {
        delta = (output_scale_ * delta.array() * (1.0 - out.array().square())).matrix();
      } else if (!last) {
        delta = (delta.array() * (1.0 - out.array().square())).matrix();
      }
      g.weights[l] = delta * cache.acts[l].transpose();
      g.biases[l] = delta.rowwise().sum();
      if (l > 0) delta = weights_[l].transpose() * delta;
    }
    return g;
  }

  [[nodiscard]] MlpGrad zero_grad() const {
    MlpGrad g;
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      g.weights.push_back(Eigen::MatrixXd::Zero(weights_[l].rows(), weights_[l].cols()));
      g.biases.push_back(Eigen::VectorXd::Zero(biases_[l].size()));
    }
    return g;
  }

  [[nodiscard]] std::size_t parameter_count() const {
    std::size_t n = 0;
    for (std::size_t l = 0; l < weights_.size(); ++l) n += weights_[l].size() + biases_[l].size();
    return n;
  }

  /// Flat parameter k (layer-major, weights column-major, then biases).
  double& parameter(std::size_t k) {
    for (std::size_t l = 0; l < weights_.size(); ++l) {
      if (k < static_cast<std::size_t>(weights_[l].size())) return weights_[l].data()[k];
      k -= weights_[l].size();
      if (k < static_cast<std::size_t>(biases_[l].size())) return biases_[l][k];
      k -= biases_[l].size();
    }
    throw DomainError("mlp: parameter index out of range");
  }

  friend bool operator==(const Mlp& a, const Mlp& b) {
    if (a.sizes_ != b.sizes_ || a.tanh_output_ != b.tanh_output_ || a.output_scale_ != b.output_scale_)
      return false;
    for (std::size_t l = 0; l < a.weights_.size(); ++l)
      if (a.weights_[l] != b.weights_[l] || a.biases_[l] != b.biases_[l]) return false;
    return true;
  }

 private:
  std::vector<int> sizes_;
  bool tanh_output_ = false;
  double output_scale_ = 1.0;
  std::vector<Eigen::MatrixXd> weights_;
  std::vector<Eigen::VectorXd> biases_;
};

inline double grad_entry(MlpGrad& g, std::size_t k) {
  for (std::size_t l = 0; l < g.weights.size(); ++l) {
    if (k < static_cast<std::size_t>(g.weights[l].size())) return g.weights[l].data()[k];
    k -= g.weights[l].size();
    if (k < static_cast<std::size_t>(g.biases[l].size())) return g.biases[l][k];
    k -= g.biases[l].size();
  }
  throw DomainError("mlp: gradient index out of range");
}

/// Adam, descending the supplied gradient.
class Adam {
 public:
  Adam() = default;
  Adam(const Mlp& net, double lr) : lr_(lr), m_(net.zero_grad()), v_(net.zero_grad()) {}

  void step(Mlp& net, const MlpGrad& g) {
    ++t_;
    const double c1 = 1.0 - std::pow(kBeta1, t_);
    const double c2 = 1.0 - std::pow(kBeta2, t_);
    for (std::size_t l = 0; l < net.layers(); ++l) {
      update(net.weights()[l].array(), g.weights[l].array(), m_.weights[l].array(),
             v_.weights[l].array(), c1, c2);
      update(net.biases()[l].array(), g.biases[l].array(), m_.biases[l].array(),
             v_.biases[l].array(), c1, c2);
    }
  }

 private:
  static constexpr double kBeta1 = 0.9;
  static constexpr double kBeta2 = 0.999;
  static constexpr double kEps = 1e-8;

  template <class P, class G, class M, class V>
  void update(P&& p, const G& g, M&& m, V&& v, double c1, double c2) const {
    m = kBeta1 * m + (1.0 - kBeta1) * g;
    v = kBeta2 * v + (1.0 - kBeta2) * g.square();
    p -= lr_ * (m / c1) / ((v / c2).sqrt() + kEps);
  }

  double lr_ = 1e-3;
  int t_ = 0;
  MlpGrad m_;
  MlpGrad v_;
};

inline nlohmann::json to_json(const Mlp& net) {
  nlohmann::json layers = nlohmann::json::array();
  for (std::size_t l = 0; l < net.layers(); ++l) {
    const auto& w = net.weights()[l];
    std::vector<std::vector<double>> rows(w.rows(), std::vector<double>(w.cols()));
    for (Eigen::Index r = 0; r < w.rows(); ++r)
      for (Eigen::Index c = 0; c < w.cols(); ++c) rows[r][c] = w(r, c);
    const auto& b = net.biases()[l];
    layers.push_back({{"W", rows}, {"b", std::vector<double>(b.data(), b.data() + b.size())}});
  }
  return layers;
}

/// Restores weights into a network whose shape is already set.
inline void load_weights(Mlp& net, const nlohmann::json& layers) {
  if (layers.size() != net.layers()) throw DomainError("mlp weights: layer count mismatch");
  for (std::size_t l = 0; l < net.layers(); ++l) {
    const auto rows = layers[l].at("W").get<std::vector<std::vector<double>>>();
    const auto b = layers[l].at("b").get<std::vector<double>>();
    auto& w = net.weights()[l];
    if (rows.size() != static_cast<std::size_t>(w.rows()) ||
        b.size() != static_cast<std::size_t>(w.rows()))
      throw DomainError("mlp weights: shape mismatch");
    for (Eigen::Index r = 0; r < w.rows(); ++r) {
      if (rows[r].size() != static_cast<std::size_t>(w.cols()))
        throw DomainError("mlp weights: shape mismatch");
      for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = rows[r][c];
      net.biases()[l][r] = b[r];
    }
  }
}

}  // namespace qaoaml
