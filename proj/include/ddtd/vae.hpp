#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "ddtd/binary_io.hpp"
#include "ddtd/error.hpp"

namespace ddtd {

inline constexpr int kHiddenDim = 500;
inline constexpr int kLatentDim = 8;

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vec = Eigen::VectorXd;
// Samples are columns.
using Batch = Eigen::MatrixXd;

// Weights are stored out x in. Also used as the gradient container.
struct VaeParams {
  RowMat enc_w1;  Vec enc_b1;
  RowMat enc_wmu; Vec enc_bmu;
  RowMat enc_wlv; Vec enc_blv;
  RowMat dec_w1;  Vec dec_b1;
  RowMat dec_w2;  Vec dec_b2;

  int input_dim() const { return static_cast<int>(enc_w1.cols()); }

  // Every tensor as a flat span, in declaration order.
  std::array<std::span<double>, 10> tensors() {
    return {span(enc_w1), span(enc_b1), span(enc_wmu), span(enc_bmu), span(enc_wlv),
            span(enc_blv), span(dec_w1), span(dec_b1), span(dec_w2), span(dec_b2)};
  }
  std::array<std::span<const double>, 10> tensors() const {
    auto t = const_cast<VaeParams*>(this)->tensors();
    std::array<std::span<const double>, 10> out;
    for (std::size_t i = 0; i < t.size(); ++i) out[i] = t[i];
    return out;
  }
  std::size_t parameter_count() const {
    std::size_t n = 0;
    for (auto t : tensors()) n += t.size();
    return n;
  }

  // Same shapes, all zero.
  VaeParams zeros_like() const {
    VaeParams z = *this;
    for (auto t : z.tensors()) std::fill(t.begin(), t.end(), 0.0);
    return z;
  }

  bool all_finite() const {
    for (auto t : tensors())
      for (double v : t)
        if (!std::isfinite(v)) return false;
    return true;
  }

  friend bool operator==(const VaeParams& a, const VaeParams& b) {
    const auto ta = a.tensors(), tb = b.tensors();
    for (std::size_t i = 0; i < ta.size(); ++i)
      if (ta[i].size() != tb[i].size() || !std::equal(ta[i].begin(), ta[i].end(), tb[i].begin()))
        return false;
    return a.enc_w1.rows() == b.enc_w1.rows() && a.dec_w2.cols() == b.dec_w2.cols();
  }

 private:
  template <class M>
  static std::span<double> span(M& m) {
    return {m.data(), static_cast<std::size_t>(m.size())};
  }
};

namespace detail {

template <class Rng>
void xavier(RowMat& w, int out, int in, Rng& rng) {
  const double bound = std::sqrt(6.0 / (in + out));
  std::uniform_real_distribution<double> u(-bound, bound);
  w.resize(out, in);
  for (Eigen::Index i = 0; i < w.size(); ++i) w.data()[i] = u(rng);
}

inline double sigmoid(double a) {
  // Kept strictly inside (0, 1) so downstream code can rely on the open range.
  constexpr double lo = 1e-300, hi = 1.0 - 0x1p-53;
  const double s = a >= 0.0 ? 1.0 / (1.0 + std::exp(-a)) : std::exp(a) / (1.0 + std::exp(a));
  return std::clamp(s, lo, hi);
}

}  // namespace detail

template <class Rng>
VaeParams init_params(int d, Rng& rng) {
  detail::require(d >= 1, "input dimension must be at least 1");
  VaeParams p;
  detail::xavier(p.enc_w1, kHiddenDim, d, rng);
  detail::xavier(p.enc_wmu, kLatentDim, kHiddenDim, rng);
  detail::xavier(p.enc_wlv, kLatentDim, kHiddenDim, rng);
  detail::xavier(p.dec_w1, kHiddenDim, kLatentDim, rng);
  detail::xavier(p.dec_w2, d, kHiddenDim, rng);
  p.enc_b1 = Vec::Zero(kHiddenDim);
  p.enc_bmu = Vec::Zero(kLatentDim);
  p.enc_blv = Vec::Zero(kLatentDim);
  p.dec_b1 = Vec::Zero(kHiddenDim);
  p.dec_b2 = Vec::Zero(d);
  return p;
}

inline void check_shapes(const VaeParams& p) {
  const int d = p.input_dim();
  const bool ok = p.enc_w1.rows() == kHiddenDim && p.enc_b1.size() == kHiddenDim &&
                  p.enc_wmu.rows() == kLatentDim && p.enc_wmu.cols() == kHiddenDim &&
                  p.enc_bmu.size() == kLatentDim && p.enc_wlv.rows() == kLatentDim &&
                  p.enc_wlv.cols() == kHiddenDim && p.enc_blv.size() == kLatentDim &&
                  p.dec_w1.rows() == kHiddenDim && p.dec_w1.cols() == kLatentDim &&
                  p.dec_b1.size() == kHiddenDim && p.dec_w2.rows() == d &&
                  p.dec_w2.cols() == kHiddenDim && p.dec_b2.size() == d && d >= 1;
  detail::require(ok, "inconsistent VAE parameter shapes");
}

struct Forward {
  Eigen::MatrixXd a1, h1, mu, lv, z, a2, h2, y;
};

inline Eigen::MatrixXd relu(const Eigen::MatrixXd& a) { return a.cwiseMax(0.0); }

inline void encode_batch(const VaeParams& p, const Batch& x, Forward& f) {
  f.a1 = p.enc_w1 * x;
  f.a1.colwise() += p.enc_b1;
  f.h1 = relu(f.a1);
  f.mu = p.enc_wmu * f.h1;
  f.mu.colwise() += p.enc_bmu;
  f.lv = p.enc_wlv * f.h1;
  f.lv.colwise() += p.enc_blv;
}

inline Eigen::MatrixXd decode_batch(const VaeParams& p, const Eigen::MatrixXd& z, Forward* keep = nullptr) {
  Eigen::MatrixXd a2 = p.dec_w1 * z;
  a2.colwise() += p.dec_b1;
  Eigen::MatrixXd h2 = relu(a2);
  Eigen::MatrixXd y = p.dec_w2 * h2;
  y.colwise() += p.dec_b2;
  y = y.unaryExpr([](double a) { return detail::sigmoid(a); });
  if (keep) {
    keep->a2 = std::move(a2);
    keep->h2 = std::move(h2);
  }
  return y;
}

struct Encoding {
  Vec mu;
  Vec logvar;
};

inline Encoding encode(const VaeParams& p, std::span<const double> x) {
  check_shapes(p);
  detail::require(static_cast<int>(x.size()) == p.input_dim(), "input length does not match the VAE");
  Forward f;
  encode_batch(p, Eigen::Map<const Vec>(x.data(), static_cast<Eigen::Index>(x.size())), f);
  return {f.mu.col(0), f.lv.col(0)};
}

inline std::vector<double> decode(const VaeParams& p, std::span<const double> z) {
  check_shapes(p);
  detail::require(z.size() == static_cast<std::size_t>(kLatentDim), "latent vector must have 8 entries");
  for (double v : z) detail::require(std::isfinite(v), "latent vector must be finite");
  const Eigen::MatrixXd y = decode_batch(p, Eigen::Map<const Vec>(z.data(), kLatentDim));
  return {y.data(), y.data() + y.size()};
}

// Standard normal reparameterization noise, latent x batch.
template <class Rng>
Eigen::MatrixXd draw_noise(Rng& rng, int batch) {
  std::normal_distribution<double> n(0.0, 1.0);
  Eigen::MatrixXd e(kLatentDim, batch);
  for (Eigen::Index j = 0; j < e.cols(); ++j)
    for (Eigen::Index i = 0; i < e.rows(); ++i) e(i, j) = n(rng);
  return e;
}

// Reduction of the squared reconstruction error. Mean: over batch and
// components. SumComponents: summed over components, mean over the batch.
enum class RcnReduction : unsigned char { Mean, SumComponents };

inline double rcn_divisor(RcnReduction r, Eigen::Index batch, Eigen::Index dim) {
  const double b = static_cast<double>(batch);
  return r == RcnReduction::Mean ? b * static_cast<double>(dim) : b;
}

struct LossTerms {
  double total = 0.0;
  double rcn = 0.0;
  double kl = 0.0;
};

namespace detail {

inline LossTerms forward_loss(const VaeParams& p, const Batch& x, double beta,
                              const Eigen::MatrixXd& eps, Forward& f, RcnReduction red) {
  detail::require(x.cols() >= 1, "empty batch");
  detail::require(x.rows() == p.input_dim(), "batch rows do not match the VAE input");
  detail::require(eps.rows() == kLatentDim && eps.cols() == x.cols(), "noise shape mismatch");
  encode_batch(p, x, f);
  f.z = f.mu + ((0.5 * f.lv.array()).exp() * eps.array()).matrix();
  f.y = decode_batch(p, f.z, &f);
  const double b = static_cast<double>(x.cols());
  LossTerms t;
  t.rcn = (f.y - x).squaredNorm() / rcn_divisor(red, x.cols(), x.rows());
  // -1/2 (1 + lv - mu^2 - e^lv) written with expm1 so it cannot round below 0.
  const auto& lv = f.lv.array();
  t.kl = 0.5 * (lv.unaryExpr([](double v) { return std::expm1(v); }) - lv + f.mu.array().square()).sum() / b;
  t.total = t.rcn + beta * t.kl;
  return t;
}

}  // namespace detail

inline LossTerms loss(const VaeParams& p, const Batch& x, double beta, const Eigen::MatrixXd& eps,
                      RcnReduction red = RcnReduction::Mean) {
  check_shapes(p);
  Forward f;
  return detail::forward_loss(p, x, beta, eps, f, red);
}

struct GradResult {
  LossTerms loss;
  VaeParams grad;
};

// Buffers reused across training steps; the large matrices are not
// reallocated once sized.
struct GradWorkspace {
  Forward f;
  Eigen::MatrixXd da3, dh2, da2, dz, dmu, dlv, dh1, da1;
  GradResult out;
};

// Exact gradient of loss() for the given noise.
inline const GradResult& gradients(const VaeParams& p, const Batch& x, double beta,
                                   const Eigen::MatrixXd& eps, GradWorkspace& ws,
                                   RcnReduction red = RcnReduction::Mean) {
  check_shapes(p);
  Forward& f = ws.f;
  ws.out.loss = detail::forward_loss(p, x, beta, eps, f, red);
  const double b = static_cast<double>(x.cols());
  const double scale = 2.0 / rcn_divisor(red, x.cols(), x.rows());
  VaeParams& g = ws.out.grad;

  ws.da3 = (scale * (f.y - x).array() * f.y.array() * (1.0 - f.y.array())).matrix();
  g.dec_w2.noalias() = ws.da3 * f.h2.transpose();
  g.dec_b2 = ws.da3.rowwise().sum();
  ws.dh2.noalias() = p.dec_w2.transpose() * ws.da3;
  ws.da2 = (f.a2.array() > 0.0).select(ws.dh2, 0.0);
  g.dec_w1.noalias() = ws.da2 * f.z.transpose();
  g.dec_b1 = ws.da2.rowwise().sum();
  ws.dz.noalias() = p.dec_w1.transpose() * ws.da2;

  ws.dmu = ws.dz + (beta / b) * f.mu;
  ws.dlv = (ws.dz.array() * eps.array() * 0.5 * (0.5 * f.lv.array()).exp() +
            (beta / b) * 0.5 * f.lv.array().unaryExpr([](double v) { return std::expm1(v); }))
               .matrix();
  g.enc_wmu.noalias() = ws.dmu * f.h1.transpose();
  g.enc_bmu = ws.dmu.rowwise().sum();
  g.enc_wlv.noalias() = ws.dlv * f.h1.transpose();
  g.enc_blv = ws.dlv.rowwise().sum();
  ws.dh1.noalias() = p.enc_wmu.transpose() * ws.dmu;
  ws.dh1.noalias() += p.enc_wlv.transpose() * ws.dlv;
  ws.da1 = (f.a1.array() > 0.0).select(ws.dh1, 0.0);
  g.enc_w1.noalias() = ws.da1 * x.transpose();
  g.enc_b1 = ws.da1.rowwise().sum();
  return ws.out;
}

inline GradResult gradients(const VaeParams& p, const Batch& x, double beta, const Eigen::MatrixXd& eps,
                            RcnReduction red = RcnReduction::Mean) {
  GradWorkspace ws;
  return gradients(p, x, beta, eps, ws, red);
}

struct TrainConfig {
  int epochs = 400;
  double learning_rate = 1e-4;
  int batch_size = 20;
  double beta = 0.5;
  int training_set_size = 400;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  RcnReduction reduction = RcnReduction::Mean;

  void validate() const {
    detail::require(epochs >= 1 && batch_size >= 1 && training_set_size >= 1,
                    "epochs, batch_size and training_set_size must be positive");
    detail::require(learning_rate > 0.0 && beta > 0.0, "learning_rate and beta must be positive");
    detail::require(adam_beta1 >= 0.0 && adam_beta1 < 1.0 && adam_beta2 >= 0.0 && adam_beta2 < 1.0 &&
                        adam_eps > 0.0,
                    "invalid Adam constants");
  }
  friend bool operator==(const TrainConfig&, const TrainConfig&) = default;
};

struct EpochLoss {
  double total = 0.0;
  double rcn = 0.0;
  double kl = 0.0;
};

// Per epoch: batch-size weighted means of the losses seen before each update.
struct TrainReport {
  std::vector<EpochLoss> epochs;
};

class Adam {
 public:
  Adam(const VaeParams& shape, const TrainConfig& cfg)
      : m_(shape.zeros_like()), v_(shape.zeros_like()), cfg_(cfg) {}

  void step(VaeParams& p, const VaeParams& g) {
    ++t_;
    const double c1 = 1.0 / (1.0 - std::pow(cfg_.adam_beta1, t_));
    const double c2 = 1.0 / (1.0 - std::pow(cfg_.adam_beta2, t_));
    const double b1 = cfg_.adam_beta1, b2 = cfg_.adam_beta2, lr = cfg_.learning_rate, e = cfg_.adam_eps;
    auto tp = p.tensors();
    const auto tg = g.tensors();
    auto tm = m_.tensors(), tv = v_.tensors();
    for (std::size_t k = 0; k < tp.size(); ++k) {
      double* __restrict pp = tp[k].data();
      const double* __restrict gg = tg[k].data();
      double* __restrict mm = tm[k].data();
      double* __restrict vv = tv[k].data();
      const std::size_t n = tp[k].size();
      for (std::size_t i = 0; i < n; ++i) {
        mm[i] = b1 * mm[i] + (1.0 - b1) * gg[i];
        vv[i] = b2 * vv[i] + (1.0 - b2) * gg[i] * gg[i];
        pp[i] -= lr * (mm[i] * c1) / (std::sqrt(vv[i] * c2) + e);
      }
    }
  }

 private:
  VaeParams m_, v_;
  TrainConfig cfg_;
  int t_ = 0;
};

struct TrainResult {
  VaeParams params;
  TrainReport report;
};

// Shuffled mini-batch Adam on the loss above. Each batch draws its noise from
// rng after the epoch's shuffle.
template <class Rng>
TrainResult train(VaeParams params, const Batch& data, const TrainConfig& cfg, Rng& rng) {
  cfg.validate();
  check_shapes(params);
  detail::require(data.cols() == cfg.training_set_size, "training set size does not match config");
  detail::require(data.rows() == params.input_dim(), "training data rows do not match the VAE input");

  Adam opt(params, cfg);
  TrainReport report;
  std::vector<int> order(static_cast<std::size_t>(data.cols()));
  Batch x;
  GradWorkspace ws;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    EpochLoss acc;
    for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t n = std::min<std::size_t>(cfg.batch_size, order.size() - start);
      x.resize(data.rows(), static_cast<Eigen::Index>(n));
      for (std::size_t j = 0; j < n; ++j) x.col(static_cast<Eigen::Index>(j)) = data.col(order[start + j]);
      const Eigen::MatrixXd eps = draw_noise(rng, static_cast<int>(n));
      const GradResult& gr = gradients(params, x, cfg.beta, eps, ws, cfg.reduction);
      if (!std::isfinite(gr.loss.total))
        throw NumericalError("non-finite VAE loss at epoch " + std::to_string(epoch));
      if (!(gr.loss.kl >= 0.0))
        throw NumericalError("negative KL term at epoch " + std::to_string(epoch));
      const double w = static_cast<double>(n) / static_cast<double>(order.size());
      acc.rcn += w * gr.loss.rcn;
      acc.kl += w * gr.loss.kl;
      opt.step(params, gr.grad);
    }
    acc.total = acc.rcn + cfg.beta * acc.kl;
    report.epochs.push_back(acc);
  }
  if (!params.all_finite()) throw NumericalError("VAE parameters became non-finite");
  return {std::move(params), std::move(report)};
}

// Latents uniform in [-range, range] per coordinate, decoded; one column per sample.
template <class Rng>
Batch sample_latent(const VaeParams& p, int count, Rng& rng, double range = 4.0) {
  check_shapes(p);
  detail::require(count >= 1, "sample count must be at least 1");
  detail::require(range > 0.0, "latent range must be positive");
  std::uniform_real_distribution<double> u(-range, range);
  Eigen::MatrixXd z(kLatentDim, count);
  for (Eigen::Index j = 0; j < z.cols(); ++j)
    for (Eigen::Index i = 0; i < z.rows(); ++i) z(i, j) = u(rng);
  return decode_batch(p, z);
}

// Cyclic replication up to target: out[i] = elites[i mod n].
inline Batch augment(const Batch& elites, int target) {
  const auto n = elites.cols();
  if (n == 0) throw InvalidArgument("cannot augment an empty elite set");
  detail::require(target >= n, "more elites than the augmentation target");
  Batch out(elites.rows(), target);
  for (int i = 0; i < target; ++i) out.col(i) = elites.col(i % n);
  return out;
}

inline constexpr char kVaeMagic[8] = {'D', 'D', 'T', 'D', 'V', 'A', 'E', '1'};

inline void write_vae(binio::Writer& w, const VaeParams& p) {
  check_shapes(p);
  w.bytes(kVaeMagic, sizeof kVaeMagic);
  w.put<std::uint32_t>(static_cast<std::uint32_t>(p.input_dim()));
  for (auto t : p.tensors())
    for (double v : t) w.put<double>(v);
}

inline VaeParams read_vae(binio::Reader& r) {
  char magic[8];
  r.bytes(magic, sizeof magic);
  if (!std::equal(magic, magic + 8, kVaeMagic)) throw FormatError("not a VAE parameter file");
  const auto d = r.get<std::uint32_t>();
  if (d == 0 || d > (1u << 24)) throw FormatError("implausible VAE input dimension");
  const int di = static_cast<int>(d);
  VaeParams p;
  p.enc_w1.resize(kHiddenDim, di);
  p.enc_b1.resize(kHiddenDim);
  p.enc_wmu.resize(kLatentDim, kHiddenDim);
  p.enc_bmu.resize(kLatentDim);
  p.enc_wlv.resize(kLatentDim, kHiddenDim);
  p.enc_blv.resize(kLatentDim);
  p.dec_w1.resize(kHiddenDim, kLatentDim);
  p.dec_b1.resize(kHiddenDim);
  p.dec_w2.resize(di, kHiddenDim);
  p.dec_b2.resize(di);
  for (auto t : p.tensors())
    for (double& v : t) v = r.get<double>();
  return p;
}

inline void save_vae(const std::string& path, const VaeParams& p) {
  binio::Writer w;
  write_vae(w, p);
  binio::write_file_atomic(path, w.data());
}

inline VaeParams load_vae(const std::string& path) {
  const std::string data = binio::read_file(path);
  binio::Reader r(data, path);
  VaeParams p = read_vae(r);
  r.expect_end();
  return p;
}

}  // namespace ddtd
