#pragma once

// Small dense networks with manual backpropagation. The shapes in this project
// are a few thousand parameters, so the math is hand-rolled over Eigen
// matrices instead of pulling in an ML runtime. Batches are stored
// column-wise: an input matrix is (in_dim x batch).

#include <Eigen/Dense>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

namespace uavsim::mlp {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct DimensionMismatch : std::runtime_error {
  explicit DimensionMismatch(const std::string& what) : std::runtime_error(what) {}
};

enum class Activation : std::uint8_t { Identity = 0, Relu = 1, Tanh = 2 };

inline MatrixXd apply_activation(Activation a, const MatrixXd& z) {
  switch (a) {
    case Activation::Relu:
      return z.cwiseMax(0.0);
    case Activation::Tanh:
      return z.array().tanh().matrix();
    case Activation::Identity:
      return z;
  }
  return z;
}

/// Derivative expressed through the activation output.
inline MatrixXd activation_grad(Activation a, const MatrixXd& out) {
  switch (a) {
    case Activation::Relu:
      return (out.array() > 0.0).cast<double>().matrix();
    case Activation::Tanh:
      return (1.0 - out.array().square()).matrix();
    case Activation::Identity:
      return MatrixXd::Ones(out.rows(), out.cols());
  }
  return MatrixXd::Ones(out.rows(), out.cols());
}

struct Layer {
  MatrixXd w;  // (out x in)
  VectorXd b;  // (out)
  Activation act = Activation::Relu;
};

struct Grads {
  std::vector<MatrixXd> dw;
  std::vector<VectorXd> db;
};

struct ForwardCache {
  // acts[0] is the input, acts[l+1] the output of layer l.
  std::vector<MatrixXd> acts;
};

class Mlp {
 public:
  Mlp() = default;

  /// He-style fan-in initialization, deterministic under the seed.
  static Mlp random(const std::vector<int>& dims,
                    const std::vector<Activation>& acts, std::uint64_t seed) {
    if (dims.size() < 2 || acts.size() != dims.size() - 1)
      throw DimensionMismatch("layer dims/activations mismatch");
    Mlp net;
    std::mt19937_64 rng(seed);
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
      const double scale = std::sqrt(2.0 / dims[l]);
      std::normal_distribution<double> dist(0.0, scale);
      Layer layer;
      layer.w = MatrixXd::NullaryExpr(dims[l + 1], dims[l],
                                      [&]() { return dist(rng); });
      layer.b = VectorXd::Zero(dims[l + 1]);
      layer.act = acts[l];
      net.layers_.push_back(std::move(layer));
    }
    return net;
  }

  static Mlp zeros(const std::vector<int>& dims, const std::vector<Activation>& acts) {
    Mlp net = random(dims, acts, 0);
    for (auto& l : net.layers_) l.w.setZero();
    return net;
  }

  [[nodiscard]] int input_dim() const { return static_cast<int>(layers_.front().w.cols()); }
  [[nodiscard]] int output_dim() const { return static_cast<int>(layers_.back().w.rows()); }
  [[nodiscard]] const std::vector<Layer>& layers() const { return layers_; }
  [[nodiscard]] std::vector<Layer>& layers() { return layers_; }

  [[nodiscard]] MatrixXd forward(const MatrixXd& x, ForwardCache* cache = nullptr) const {
    if (x.rows() != input_dim())
      throw DimensionMismatch("forward input dim " + std::to_string(x.rows()) +
                              " != " + std::to_string(input_dim()));
    MatrixXd a = x;
    if (cache) cache->acts = {a};
    for (const auto& l : layers_) {
      a = apply_activation(l.act, (l.w * a).colwise() + l.b);
      if (cache) cache->acts.push_back(a);
    }
    return a;
  }

  /// Backpropagates dL/d(output); returns dL/d(input) and accumulates
  /// parameter gradients (averaged over nothing -- caller scales).
  MatrixXd backward(const ForwardCache& cache, const MatrixXd& dout, Grads* grads) const {
    if (grads) {
      grads->dw.assign(layers_.size(), MatrixXd());
      grads->db.assign(layers_.size(), VectorXd());
    }
    MatrixXd delta = dout;
    for (int l = static_cast<int>(layers_.size()) - 1; l >= 0; --l) {
      const auto& layer = layers_[static_cast<std::size_t>(l)];
      const MatrixXd& out = cache.acts[static_cast<std::size_t>(l) + 1];
      const MatrixXd& in = cache.acts[static_cast<std::size_t>(l)];
      delta = delta.cwiseProduct(activation_grad(layer.act, out));
      if (grads) {
        grads->dw[static_cast<std::size_t>(l)] = delta * in.transpose();
        grads->db[static_cast<std::size_t>(l)] = delta.rowwise().sum();
      }
      if (l > 0) delta = layer.w.transpose() * delta;
    }
    return layers_.front().w.transpose() * delta;
  }

  [[nodiscard]] std::size_t parameter_count() const {
    std::size_t n = 0;
    for (const auto& l : layers_) n += static_cast<std::size_t>(l.w.size() + l.b.size());
    return n;
  }

  [[nodiscard]] VectorXd flatten() const {
    VectorXd v(parameter_count());
    Eigen::Index k = 0;
    for (const auto& l : layers_) {
      v.segment(k, l.w.size()) = Eigen::Map<const VectorXd>(l.w.data(), l.w.size());
      k += l.w.size();
      v.segment(k, l.b.size()) = l.b;
      k += l.b.size();
    }
    return v;
  }

  void unflatten(const VectorXd& v) {
    Eigen::Index k = 0;
    for (auto& l : layers_) {
      Eigen::Map<VectorXd>(l.w.data(), l.w.size()) = v.segment(k, l.w.size());
      k += l.w.size();
      l.b = v.segment(k, l.b.size());
      k += l.b.size();
    }
  }

 private:
  std::vector<Layer> layers_;
};

/// target <- tau * target + (1 - tau) * online, elementwise.
inline void polyak_update(const Mlp& online, Mlp& target, double tau) {
  if (online.parameter_count() != target.parameter_count())
    throw DimensionMismatch("polyak shapes differ");
  for (std::size_t l = 0; l < online.layers().size(); ++l) {
    target.layers()[l].w = tau * target.layers()[l].w + (1.0 - tau) * online.layers()[l].w;
    target.layers()[l].b = tau * target.layers()[l].b + (1.0 - tau) * online.layers()[l].b;
  }
}

/// Adam state for one network.
class Adam {
 public:
  explicit Adam(double lr = 1e-3, double beta1 = 0.9, double beta2 = 0.999,
                double eps = 1e-8)
      : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

  void step(Mlp& net, const Grads& grads) {
    if (m_w.empty()) init(net);
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, t_);
    const double bc2 = 1.0 - std::pow(beta2_, t_);
    for (std::size_t l = 0; l < net.layers().size(); ++l) {
      update(net.layers()[l].w, grads.dw[l], m_w[l], v_w[l], bc1, bc2);
      update(net.layers()[l].b, grads.db[l], m_b[l], v_b[l], bc1, bc2);
    }
  }

 private:
  template <typename M, typename G>
  void update(M& param, const G& grad, G& m, G& v, double bc1, double bc2) {
    m = beta1_ * m + (1.0 - beta1_) * grad;
    v = (beta2_ * v.array() + (1.0 - beta2_) * grad.array().square()).matrix();
    param.array() -= lr_ * (m.array() / bc1) / ((v.array() / bc2).sqrt() + eps_);
  }
  void init(const Mlp& net) {
    for (const auto& l : net.layers()) {
      m_w.push_back(MatrixXd::Zero(l.w.rows(), l.w.cols()));
      v_w.push_back(MatrixXd::Zero(l.w.rows(), l.w.cols()));
      m_b.push_back(VectorXd::Zero(l.b.size()));
      v_b.push_back(VectorXd::Zero(l.b.size()));
    }
  }

  double lr_, beta1_, beta2_, eps_;
  long t_ = 0;
  std::vector<MatrixXd> m_w, v_w;
  std::vector<VectorXd> m_b, v_b;
};

}  // namespace uavsim::mlp
