#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <numeric>
#include <optional>
#include <span>
#include <vector>

#include "ciforge/core.hpp"
#include "ciforge/datagen.hpp"

namespace ciforge::nn {

enum class Loss { squared, logistic };

inline double sigmoid(double v) {
  if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
  const double e = std::exp(v);
  return e / (1.0 + e);
}

/// log(1 + exp(v)) without overflow.
inline double softplus(double v) { return v > 0 ? v + std::log1p(std::exp(-v)) : std::log1p(std::exp(v)); }

/// Fully connected network: tanh hidden layers, identity (squared loss) or
/// logistic (logistic loss) output. Inputs are standardized with statistics
/// baked into the model; for squared loss the targets are too, so the loss
/// and its gradient live on the standardized scale.
class Mlp {
 public:
  Mlp() = default;

  Mlp(std::size_t n_in, std::vector<std::size_t> hidden, std::size_t n_out, Loss loss, std::uint64_t seed)
      : loss_(loss) {
    if (n_in == 0 || n_out == 0) throw Error(ErrorCode::invalid_argument, "network needs inputs and outputs");
    if (loss == Loss::logistic && n_out != 1) throw Error(ErrorCode::invalid_argument, "logistic output must be scalar");
    widths_.push_back(n_in);
    widths_.insert(widths_.end(), hidden.begin(), hidden.end());
    widths_.push_back(n_out);
    std::size_t total = 0;
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
      w_off_.push_back(total);
      total += widths_[l] * widths_[l + 1];
      b_off_.push_back(total);
      total += widths_[l + 1];
    }
    params_.assign(total, 0.0);
    Rng rng(seed);
    for (std::size_t l = 0; l + 1 < widths_.size(); ++l) {
      const double limit = std::sqrt(6.0 / static_cast<double>(widths_[l] + widths_[l + 1]));
      for (std::size_t k = 0; k < widths_[l] * widths_[l + 1]; ++k)
        params_[w_off_[l] + k] = (2.0 * uniform_open01(rng) - 1.0) * limit;
    }
    in_mean_.assign(n_in, 0.0);
    in_scale_.assign(n_in, 1.0);
    out_mean_.assign(n_out, 0.0);
    out_scale_.assign(n_out, 1.0);
  }

  std::size_t n_in() const { return widths_.front(); }
  std::size_t n_out() const { return widths_.back(); }
  std::size_t n_layers() const { return widths_.size() - 1; }
  const std::vector<std::size_t>& widths() const { return widths_; }
  Loss loss() const { return loss_; }

  std::span<double> params() { return params_; }
  std::span<const double> params() const { return params_; }

  /// Sets input (and, for squared loss, target) standardization from
  /// row-major training data.
  void fit_scaling(std::span<const double> x, std::span<const double> t) {
    const std::size_t n = x.size() / n_in();
    fit_columns(x, n, n_in(), in_mean_, in_scale_);
    if (loss_ == Loss::squared) fit_columns(t, n, n_out(), out_mean_, out_scale_);
  }

  /// Prediction on the caller's scale: regression values or P(label = 1).
  std::vector<double> predict(std::span<const double> x) const {
    auto acts = forward_internal(standardize(x));
    std::vector<double> out = acts.back();
    for (std::size_t k = 0; k < out.size(); ++k) {
      out[k] = loss_ == Loss::logistic ? sigmoid(out[k]) : out[k] * out_scale_[k] + out_mean_[k];
    }
    return out;
  }

  /// Per-sample loss on the internal scale.
  double sample_loss(std::span<const double> x, std::span<const double> t) const {
    const auto acts = forward_internal(standardize(x));
    return loss_from_output(acts.back(), t);
  }

  /// Gradient of sample_loss with respect to params(), by backpropagation.
  std::vector<double> gradient(std::span<const double> x, std::span<const double> t) const {
    std::vector<double> g(params_.size(), 0.0);
    accumulate_gradient(x, t, 1.0, g);
    return g;
  }

  void accumulate_gradient(std::span<const double> x, std::span<const double> t, double weight,
                           std::vector<double>& g) const {
    const auto acts = forward_internal(standardize(x));
    const std::size_t L = n_layers();
    std::vector<double> delta(n_out());
    const auto& out = acts.back();
    for (std::size_t k = 0; k < n_out(); ++k) {
      if (loss_ == Loss::logistic) delta[k] = sigmoid(out[k]) - t[k];
      else delta[k] = 2.0 * (out[k] - (t[k] - out_mean_[k]) / out_scale_[k]);
    }
    for (std::size_t l = L; l-- > 0;) {
      const std::size_t in = widths_[l], outw = widths_[l + 1];
      const auto& a = acts[l];
      for (std::size_t o = 0; o < outw; ++o) {
        const double d = weight * delta[o];
        g[b_off_[l] + o] += d;
        double* gw = &g[w_off_[l] + o * in];
        for (std::size_t i = 0; i < in; ++i) gw[i] += d * a[i];
      }
      if (l == 0) break;
      std::vector<double> prev(in, 0.0);
      for (std::size_t o = 0; o < outw; ++o) {
        const double* w = &params_[w_off_[l] + o * in];
        for (std::size_t i = 0; i < in; ++i) prev[i] += w[i] * delta[o];
      }
      for (std::size_t i = 0; i < in; ++i) prev[i] *= 1.0 - a[i] * a[i];
      delta = std::move(prev);
    }
  }

 private:
  static void fit_columns(std::span<const double> m, std::size_t n, std::size_t w, std::vector<double>& mean,
                          std::vector<double>& scale) {
    mean.assign(w, 0.0);
    scale.assign(w, 1.0);
    if (n == 0) return;
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < w; ++j) mean[j] += m[i * w + j];
    for (auto& v : mean) v /= static_cast<double>(n);
    std::vector<double> var(w, 0.0);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < w; ++j) var[j] += (m[i * w + j] - mean[j]) * (m[i * w + j] - mean[j]);
    for (std::size_t j = 0; j < w; ++j) {
      const double sd = std::sqrt(var[j] / static_cast<double>(n));
      scale[j] = sd > 1e-12 ? sd : 1.0;
    }
  }

  std::vector<double> standardize(std::span<const double> x) const {
    std::vector<double> s(n_in());
    for (std::size_t j = 0; j < n_in(); ++j) s[j] = (x[j] - in_mean_[j]) / in_scale_[j];
    return s;
  }

  // Activations per layer; the last entry holds output pre-activations.
  std::vector<std::vector<double>> forward_internal(std::vector<double> a0) const {
    std::vector<std::vector<double>> acts;
    acts.push_back(std::move(a0));
    const std::size_t L = n_layers();
    for (std::size_t l = 0; l < L; ++l) {
      const std::size_t in = widths_[l], outw = widths_[l + 1];
      const auto& a = acts.back();
      std::vector<double> next(outw);
      for (std::size_t o = 0; o < outw; ++o) {
        const double* w = &params_[w_off_[l] + o * in];
        double s = params_[b_off_[l] + o];
        for (std::size_t i = 0; i < in; ++i) s += w[i] * a[i];
        next[o] = (l + 1 < L) ? std::tanh(s) : s;
      }
      acts.push_back(std::move(next));
    }
    return acts;
  }

  double loss_from_output(const std::vector<double>& out, std::span<const double> t) const {
    double s = 0;
    for (std::size_t k = 0; k < out.size(); ++k) {
      if (loss_ == Loss::logistic) {
        // -[t log sigma(o) + (1-t) log(1 - sigma(o))]
        s += t[k] * softplus(-out[k]) + (1.0 - t[k]) * softplus(out[k]);
      } else {
        const double d = out[k] - (t[k] - out_mean_[k]) / out_scale_[k];
        s += d * d;
      }
    }
    return s;
  }

  Loss loss_ = Loss::squared;
  std::vector<std::size_t> widths_;
  std::vector<std::size_t> w_off_, b_off_;
  std::vector<double> params_;
  std::vector<double> in_mean_, in_scale_, out_mean_, out_scale_;
};

struct MlpConfig {
  std::vector<std::size_t> hidden{32, 32};
  std::size_t epochs = 100;
  std::size_t batch = 32;
  double lr = 0.01;
  std::uint64_t seed = 0;
  Loss loss = Loss::squared;
};

struct MlpFit {
  Mlp model;
  std::vector<double> train_loss;       // full-data mean loss; index 0 is the initial model
  std::vector<double> validation_loss;  // empty without validation data
  std::size_t best_epoch = 0;
};

inline double mean_loss(const Mlp& m, const Matrix& x, const Matrix& t) {
  double s = 0;
  for (std::size_t i = 0; i < x.rows(); ++i) s += m.sample_loss(x.row(i), t.row(i));
  return s / static_cast<double>(x.rows());
}

/// Mini-batch SGD. The returned model is the epoch with the lowest
/// validation loss (or training loss without validation data), so its
/// training loss never exceeds the initial one when selected on training.
inline MlpFit mlp_fit(const Matrix& x, const Matrix& t, const MlpConfig& cfg,
                      std::optional<std::pair<const Matrix*, const Matrix*>> validation = std::nullopt) {
  if (x.rows() < 2 || x.cols < 1) throw Error(ErrorCode::empty_data, "training needs >= 2 rows and >= 1 feature");
  if (t.rows() != x.rows() || t.cols < 1) throw Error(ErrorCode::invalid_argument, "targets do not match features");
  if (cfg.batch < 1 || !(cfg.lr > 0)) throw Error(ErrorCode::invalid_argument, "batch and learning rate must be positive");

  MlpFit fit;
  fit.model = Mlp(x.cols, cfg.hidden, t.cols, cfg.loss, derive_seed(cfg.seed, Stream::nn, 7));
  fit.model.fit_scaling(x.values, t.values);
  Mlp& m = fit.model;

  auto val_loss = [&]() { return mean_loss(m, *validation->first, *validation->second); };
  fit.train_loss.push_back(mean_loss(m, x, t));
  if (validation) fit.validation_loss.push_back(val_loss());
  auto score = [&](std::size_t e) { return validation ? fit.validation_loss[e] : fit.train_loss[e]; };

  std::vector<double> best(m.params().begin(), m.params().end());
  double best_score = score(0);

  const std::size_t n = x.rows();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  Rng rng = make_rng(cfg.seed, Stream::nn, 11);
  std::vector<double> g(m.params().size());

  for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
    if (cfg.batch < n) shuffle_in_place(order, rng);
    for (std::size_t start = 0; start < n; start += cfg.batch) {
      const std::size_t end = std::min(n, start + cfg.batch);
      std::fill(g.begin(), g.end(), 0.0);
      const double w = 1.0 / static_cast<double>(end - start);
      for (std::size_t k = start; k < end; ++k) m.accumulate_gradient(x.row(order[k]), t.row(order[k]), w, g);
      auto p = m.params();
      for (std::size_t k = 0; k < p.size(); ++k) p[k] -= cfg.lr * g[k];
    }
    const double tl = mean_loss(m, x, t);
    if (!std::isfinite(tl))
      throw Error(ErrorCode::non_finite_loss, "training loss diverged at epoch " + std::to_string(epoch));
    fit.train_loss.push_back(tl);
    if (validation) fit.validation_loss.push_back(val_loss());
    if (score(epoch) < best_score) {
      best_score = score(epoch);
      best.assign(m.params().begin(), m.params().end());
      fit.best_epoch = epoch;
    }
  }
  std::copy(best.begin(), best.end(), m.params().begin());
  return fit;
}

inline Mlp mlp_train(const Matrix& x, const Matrix& t, const MlpConfig& cfg) { return mlp_fit(x, t, cfg).model; }

/// Relative error |g - g_fd| / max(1, |g|, |g_fd|) per parameter, comparing
/// backprop against central finite differences.
inline std::vector<double> mlp_grad_errors(const Mlp& model, std::span<const double> x, std::span<const double> t,
                                           double eps) {
  if (!(eps >= 1e-7 && eps <= 1e-3)) throw Error(ErrorCode::invalid_argument, "eps must lie in [1e-7, 1e-3]");
  const auto g = model.gradient(x, t);
  Mlp probe = model;
  std::vector<double> err(g.size());
  for (std::size_t k = 0; k < g.size(); ++k) {
    auto p = probe.params();
    const double orig = p[k];
    p[k] = orig + eps;
    const double up = probe.sample_loss(x, t);
    p[k] = orig - eps;
    const double down = probe.sample_loss(x, t);
    p[k] = orig;
    const double fd = (up - down) / (2 * eps);
    err[k] = std::abs(g[k] - fd) / std::max({1.0, std::abs(g[k]), std::abs(fd)});
  }
  return err;
}

inline double mlp_grad_check(const Mlp& model, std::span<const double> x, std::span<const double> t, double eps) {
  const auto e = mlp_grad_errors(model, x, t, eps);
  return e.empty() ? 0.0 : *std::max_element(e.begin(), e.end());
}

}  // namespace ciforge::nn
