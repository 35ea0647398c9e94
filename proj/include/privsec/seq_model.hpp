#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <numbers>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "privsec/error.hpp"
#include "privsec/geo.hpp"
#include "privsec/rng.hpp"
#include "privsec/roc.hpp"
#include "privsec/trajectory.hpp"

namespace privsec {

using Vec2 = std::array<double, 2>;
using Sequence = std::vector<Vec2>;

// ---------------------------------------------------------------------------
// Preprocessing

/// Min-max normalisation of planar coordinates by the corpus region.
class Normalizer {
 public:
  Normalizer(const BBox& bbox, const GeoPoint& origin) : origin_(origin) {
    if (bbox.degenerate()) throw ValidationError("preprocess: degenerate bounding box");
    lo_ = project(bbox.min_corner(), origin);
    const PlanarPoint hi = project(bbox.max_corner(), origin);
    span_ = {hi.x - lo_.x, hi.y - lo_.y};
  }
  Vec2 to_unit(const PlanarPoint& p) const { return {(p.x - lo_.x) / span_.x, (p.y - lo_.y) / span_.y}; }
  PlanarPoint from_unit(const Vec2& v) const { return {lo_.x + v[0] * span_.x, lo_.y + v[1] * span_.y}; }
  const GeoPoint& origin() const { return origin_; }
  double width_m() const { return span_.x; }
  double height_m() const { return span_.y; }
  double diagonal_m() const { return std::hypot(span_.x, span_.y); }

 private:
  GeoPoint origin_;
  PlanarPoint lo_;
  PlanarPoint span_;
};

/// `len` points evenly spaced by arc length along `path` (endpoints kept).
inline PlanarPath resample(const PlanarPath& path, std::size_t len) {
  if (path.size() < 2 || len < 2) throw ValidationError("resample: need >= 2 points");
  std::vector<double> cum(path.size(), 0.0);
  for (std::size_t i = 1; i < path.size(); ++i) cum[i] = cum[i - 1] + distance(path[i - 1], path[i]);
  const double total = cum.back();
  PlanarPath out;
  out.reserve(len);
  std::size_t seg = 1;
  for (std::size_t k = 0; k < len; ++k) {
    if (k + 1 == len) {
      out.push_back(path.back());
      break;
    }
    const double s = total * static_cast<double>(k) / static_cast<double>(len - 1);
    while (seg + 1 < path.size() && cum[seg] < s) ++seg;
    const double seg_len = cum[seg] - cum[seg - 1];
    const double f = seg_len > 0 ? (s - cum[seg - 1]) / seg_len : 0.0;
    out.push_back(path[seg - 1] + (path[seg] - path[seg - 1]) * std::clamp(f, 0.0, 1.0));
  }
  return out;
}

inline Sequence preprocess(const std::vector<GeoPoint>& pts, const Normalizer& norm,
                           std::size_t max_len) {
  PlanarPath path;
  path.reserve(pts.size());
  for (const auto& p : pts) path.push_back(project(p, norm.origin()));
  Sequence seq;
  for (const auto& p : resample(path, max_len)) seq.push_back(norm.to_unit(p));
  return seq;
}

inline Sequence preprocess(const Trajectory& t, const BBox& bbox, const GeoPoint& origin,
                           std::size_t max_len) {
  return preprocess(t.points, Normalizer(bbox, origin), max_len);
}

// ---------------------------------------------------------------------------
// Model

struct SeqModelConfig {
  int hidden_dim = 32;
  int latent_dim = 8;
  int n_mixture = 1;         // Gaussian prior components
  bool variational = false;  // sample the latent and add the KL term
  double beta = 0.1;         // KL weight; 0 reduces to the plain autoencoder
  double learning_rate = 3e-3;
  int epochs = 30;
  int batch_size = 32;
  std::uint64_t seed = 7;
  int max_len = 32;
  double grad_clip = 5.0;    // global gradient norm clip; <= 0 disables
  double final_lr_fraction = 0.05;  // cosine decay from learning_rate to this share of it

  bool sample_latent() const { return variational && beta > 0; }

  void validate() const {
    if (hidden_dim <= 0 || latent_dim <= 0 || n_mixture < 1 || !(learning_rate > 0) ||
        epochs < 0 || batch_size <= 0 || max_len < 2 || beta < 0 ||
        !(final_lr_fraction > 0 && final_lr_fraction <= 1)) {
      throw ValidationError("seq model: invalid configuration");
    }
  }
};

inline nlohmann::ordered_json to_json(const SeqModelConfig& c) {
  return {{"hidden_dim", c.hidden_dim}, {"latent_dim", c.latent_dim},
          {"n_mixture", c.n_mixture},   {"variational", c.variational},
          {"beta", c.beta},             {"learning_rate", c.learning_rate},
          {"epochs", c.epochs},         {"batch_size", c.batch_size},
          {"seed", c.seed},             {"max_len", c.max_len},
          {"grad_clip", c.grad_clip},   {"final_lr_fraction", c.final_lr_fraction}};
}

inline SeqModelConfig seq_config_from_json(const nlohmann::json& j) {
  SeqModelConfig c;
  for (auto it = j.begin(); it != j.end(); ++it) {
    const std::string& k = it.key();
    if (k == "hidden_dim") c.hidden_dim = it->get<int>();
    else if (k == "latent_dim") c.latent_dim = it->get<int>();
    else if (k == "n_mixture") c.n_mixture = it->get<int>();
    else if (k == "variational") c.variational = it->get<bool>();
    else if (k == "beta") c.beta = it->get<double>();
    else if (k == "learning_rate") c.learning_rate = it->get<double>();
    else if (k == "epochs") c.epochs = it->get<int>();
    else if (k == "batch_size") c.batch_size = it->get<int>();
    else if (k == "seed") c.seed = it->get<std::uint64_t>();
    else if (k == "max_len") c.max_len = it->get<int>();
    else if (k == "grad_clip") c.grad_clip = it->get<double>();
    else if (k == "final_lr_fraction") c.final_lr_fraction = it->get<double>();
    else throw ValidationError("seq config: unknown key '" + k + "'");
  }
  c.validate();
  return c;
}

struct Tensor {
  std::string name;
  std::size_t offset = 0;
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::size_t size() const { return rows * cols; }
};

namespace detail {

struct GruLayout {
  std::size_t in = 0, hid = 0;
  std::size_t Wr = 0, Ur = 0, br = 0, Wu = 0, Uu = 0, bu = 0, Wn = 0, Un = 0, bn = 0;
};

// y[0..rows) += W x  with W row-major rows x cols.
inline void gemv_acc(const double* W, const double* x, double* y, std::size_t rows,
                     std::size_t cols) {
  // Four fixed partial sums: vectorisable and still order-deterministic.
  const std::size_t c4 = cols & ~std::size_t{3};
  for (std::size_t i = 0; i < rows; ++i) {
    const double* w = W + i * cols;
    double s0 = 0.0, s1 = 0.0, s2 = 0.0, s3 = 0.0;
    for (std::size_t j = 0; j < c4; j += 4) {
      s0 += w[j] * x[j];
      s1 += w[j + 1] * x[j + 1];
      s2 += w[j + 2] * x[j + 2];
      s3 += w[j + 3] * x[j + 3];
    }
    for (std::size_t j = c4; j < cols; ++j) s0 += w[j] * x[j];
    y[i] += (s0 + s1) + (s2 + s3);
  }
}

// y[0..cols) += W^T x
inline void gemv_t_acc(const double* W, const double* x, double* y, std::size_t rows,
                       std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i) {
    const double xi = x[i];
    if (xi == 0.0) continue;
    const double* w = W + i * cols;
    for (std::size_t j = 0; j < cols; ++j) y[j] += w[j] * xi;
  }
}

// G += a b^T
inline void outer_acc(double* G, const double* a, const double* b, std::size_t rows,
                      std::size_t cols) {
  for (std::size_t i = 0; i < rows; ++i) {
    const double ai = a[i];
    if (ai == 0.0) continue;
    double* g = G + i * cols;
    for (std::size_t j = 0; j < cols; ++j) g[j] += ai * b[j];
  }
}

inline double sigmoid(double x) { return 1.0 / (1.0 + std::exp(-x)); }

// Per-step activations kept for backpropagation.
struct GruTrace {
  std::vector<double> r, u, n, unh, h;  // each steps x hid; h[t] is the output of step t
  void resize(std::size_t steps, std::size_t hid) {
    r.assign(steps * hid, 0.0);
    u.assign(steps * hid, 0.0);
    n.assign(steps * hid, 0.0);
    unh.assign(steps * hid, 0.0);
    h.assign(steps * hid, 0.0);
  }
};

// h' = (1-u) n + u h,  r = s(Wr x + Ur h + br),  u = s(Wu x + Uu h + bu),
// n = tanh(Wn x + bn + r * (Un h)).
inline void gru_forward(const double* P, const GruLayout& g, const double* x, const double* h,
                        double* r, double* u, double* n, double* unh, double* h_out) {
  const std::size_t H = g.hid, I = g.in;
  for (std::size_t i = 0; i < H; ++i) {
    r[i] = P[g.br + i];
    u[i] = P[g.bu + i];
    n[i] = P[g.bn + i];
    unh[i] = 0.0;
  }
  gemv_acc(P + g.Wr, x, r, H, I);
  gemv_acc(P + g.Ur, h, r, H, H);
  gemv_acc(P + g.Wu, x, u, H, I);
  gemv_acc(P + g.Uu, h, u, H, H);
  gemv_acc(P + g.Wn, x, n, H, I);
  gemv_acc(P + g.Un, h, unh, H, H);
  for (std::size_t i = 0; i < H; ++i) {
    r[i] = sigmoid(r[i]);
    u[i] = sigmoid(u[i]);
    n[i] = std::tanh(n[i] + r[i] * unh[i]);
    h_out[i] = (1.0 - u[i]) * n[i] + u[i] * h[i];
  }
}

struct GruScratch {
  std::vector<double> da_r, da_u, da_n, tmp;
  void resize(std::size_t hid) {
    da_r.assign(hid, 0.0);
    da_u.assign(hid, 0.0);
    da_n.assign(hid, 0.0);
    tmp.assign(hid, 0.0);
  }
};

// Accumulates parameter gradients into G, adds dL/dh into dh_prev and
// (if non-null) dL/dx into dx.
inline void gru_backward(const double* P, double* G, const GruLayout& g, const double* x,
                         const double* h, const double* r, const double* u, const double* n,
                         const double* unh, const double* dh_out, double* dh_prev, double* dx,
                         GruScratch& s) {
  const std::size_t H = g.hid, I = g.in;
  for (std::size_t i = 0; i < H; ++i) {
    const double dn = dh_out[i] * (1.0 - u[i]);
    const double du = dh_out[i] * (h[i] - n[i]);
    dh_prev[i] += dh_out[i] * u[i];
    s.da_n[i] = dn * (1.0 - n[i] * n[i]);
    s.da_u[i] = du * u[i] * (1.0 - u[i]);
    const double dr = s.da_n[i] * unh[i];
    s.da_r[i] = dr * r[i] * (1.0 - r[i]);
    s.tmp[i] = s.da_n[i] * r[i];  // gradient wrt Un h
  }
  outer_acc(G + g.Wr, s.da_r.data(), x, H, I);
  outer_acc(G + g.Ur, s.da_r.data(), h, H, H);
  outer_acc(G + g.Wu, s.da_u.data(), x, H, I);
  outer_acc(G + g.Uu, s.da_u.data(), h, H, H);
  outer_acc(G + g.Wn, s.da_n.data(), x, H, I);
  outer_acc(G + g.Un, s.tmp.data(), h, H, H);
  for (std::size_t i = 0; i < H; ++i) {
    G[g.br + i] += s.da_r[i];
    G[g.bu + i] += s.da_u[i];
    G[g.bn + i] += s.da_n[i];
  }
  gemv_t_acc(P + g.Ur, s.da_r.data(), dh_prev, H, H);
  gemv_t_acc(P + g.Uu, s.da_u.data(), dh_prev, H, H);
  gemv_t_acc(P + g.Un, s.tmp.data(), dh_prev, H, H);
  if (dx) {
    gemv_t_acc(P + g.Wr, s.da_r.data(), dx, H, I);
    gemv_t_acc(P + g.Wu, s.da_u.data(), dx, H, I);
    gemv_t_acc(P + g.Wn, s.da_n.data(), dx, H, I);
  }
}

inline constexpr double kLogVarMin = -8.0;
inline constexpr double kLogVarMax = 8.0;
inline const double kHalfLog2Pi = 0.5 * std::log(2.0 * std::numbers::pi);

}  // namespace detail

/// GRU sequence autoencoder.
///
/// Encoder GRU over the (centred) normalised points; its last state maps to
/// latent mean and log-variance. The decoder GRU starts from
/// tanh(Wz z + bz) and at step t reads [z, t/(T-1)]; a linear map gives the
/// reconstructed point. With `variational` the latent is sampled by
/// reparameterisation and a single-sample KL estimate against a Gaussian
/// mixture prior (unit-variance components with learnable means and
/// weights) is added with weight beta.
class SeqModel {
 public:
  explicit SeqModel(const SeqModelConfig& cfg) : cfg_(cfg) {
    cfg.validate();
    const auto H = static_cast<std::size_t>(cfg.hidden_dim);
    const auto L = static_cast<std::size_t>(cfg.latent_dim);
    const auto K = static_cast<std::size_t>(cfg.n_mixture);
    enc_ = add_gru("enc", 2, H);
    mu_w_ = add("mu.W", L, H);
    mu_b_ = add("mu.b", L, 1);
    lv_w_ = add("logvar.W", L, H);
    lv_b_ = add("logvar.b", L, 1);
    prior_mean_ = add("prior.means", K, L);
    prior_logit_ = add("prior.logits", K, 1);
    init_w_ = add("dec.init.W", H, L);
    init_b_ = add("dec.init.b", H, 1);
    dec_ = add_gru("dec", L + 1, H);
    out_w_ = add("out.W", 2, H);
    out_b_ = add("out.b", 2, 1);
    params_.assign(total_, 0.0);

    Rng rng(derive_seed(cfg.seed, "init"));
    for (const auto& t : tensors_) {
      const bool bias = t.cols == 1 && t.name.find(".b") != std::string::npos;
      if (bias) continue;
      const double a = std::sqrt(6.0 / static_cast<double>(t.rows + t.cols));
      for (std::size_t i = 0; i < t.size(); ++i) params_[t.offset + i] = rng.uniform(-a, a);
    }
    for (std::size_t i = 0; i < K * L; ++i) params_[prior_mean_ + i] = rng.normal();
    for (std::size_t i = 0; i < K; ++i) params_[prior_logit_ + i] = 0.0;
    params_[out_b_] = 0.5;
    params_[out_b_ + 1] = 0.5;
  }

  const SeqModelConfig& config() const { return cfg_; }
  const std::vector<Tensor>& tensors() const { return tensors_; }
  std::vector<double>& params() { return params_; }
  const std::vector<double>& params() const { return params_; }
  std::size_t parameter_count() const { return total_; }

  bool finite() const {
    return std::all_of(params_.begin(), params_.end(), [](double v) { return std::isfinite(v); });
  }

  /// Workspace for one trip; reused across calls.
  struct Trace {
    std::size_t T = 0;
    std::vector<double> enc_in;  // T x 2
    detail::GruTrace enc;
    std::vector<double> h_enc, mu, lv_raw, lv, z, xi;
    std::vector<double> s0;
    std::vector<double> dec_in;  // T x (L+1)
    detail::GruTrace dec;
    std::vector<double> y;  // T x 2
    std::vector<double> gamma;
    double recon = 0.0;
    double kl = 0.0;
  };

  /// Forward pass. `xi` (latent noise) is used only when the latent is
  /// sampled; pass nullptr for the posterior mean.
  void forward(const Sequence& x, const double* xi, Trace& tr) const {
    const std::size_t T = x.size();
    const auto H = static_cast<std::size_t>(cfg_.hidden_dim);
    const auto L = static_cast<std::size_t>(cfg_.latent_dim);
    const double* P = params_.data();
    tr.T = T;
    tr.enc_in.resize(T * 2);
    for (std::size_t t = 0; t < T; ++t) {
      tr.enc_in[2 * t] = x[t][0] - 0.5;
      tr.enc_in[2 * t + 1] = x[t][1] - 0.5;
    }
    tr.enc.resize(T, H);
    const std::vector<double> zero(H, 0.0);
    for (std::size_t t = 0; t < T; ++t) {
      const double* hp = t ? &tr.enc.h[(t - 1) * H] : zero.data();
      detail::gru_forward(P, enc_, &tr.enc_in[2 * t], hp, &tr.enc.r[t * H], &tr.enc.u[t * H],
                          &tr.enc.n[t * H], &tr.enc.unh[t * H], &tr.enc.h[t * H]);
    }
    tr.h_enc.assign(tr.enc.h.end() - static_cast<std::ptrdiff_t>(H), tr.enc.h.end());

    tr.mu.assign(P + mu_b_, P + mu_b_ + L);
    detail::gemv_acc(P + mu_w_, tr.h_enc.data(), tr.mu.data(), L, H);
    tr.lv_raw.assign(P + lv_b_, P + lv_b_ + L);
    detail::gemv_acc(P + lv_w_, tr.h_enc.data(), tr.lv_raw.data(), L, H);
    tr.lv.resize(L);
    tr.z.resize(L);
    tr.xi.assign(L, 0.0);
    const bool sample = cfg_.sample_latent() && xi != nullptr;
    for (std::size_t d = 0; d < L; ++d) {
      tr.lv[d] = std::clamp(tr.lv_raw[d], detail::kLogVarMin, detail::kLogVarMax);
      if (sample) tr.xi[d] = xi[d];
      tr.z[d] = tr.mu[d] + (sample ? std::exp(0.5 * tr.lv[d]) * xi[d] : 0.0);
    }

    tr.s0.assign(P + init_b_, P + init_b_ + H);
    detail::gemv_acc(P + init_w_, tr.z.data(), tr.s0.data(), H, L);
    for (auto& v : tr.s0) v = std::tanh(v);

    const std::size_t DI = L + 1;
    tr.dec_in.resize(T * DI);
    tr.dec.resize(T, H);
    tr.y.assign(T * 2, 0.0);
    tr.recon = 0.0;
    for (std::size_t t = 0; t < T; ++t) {
      double* in = &tr.dec_in[t * DI];
      std::copy(tr.z.begin(), tr.z.end(), in);
      in[L] = T > 1 ? static_cast<double>(t) / static_cast<double>(T - 1) : 0.0;
      const double* sp = t ? &tr.dec.h[(t - 1) * H] : tr.s0.data();
      detail::gru_forward(P, dec_, in, sp, &tr.dec.r[t * H], &tr.dec.u[t * H], &tr.dec.n[t * H],
                          &tr.dec.unh[t * H], &tr.dec.h[t * H]);
      double* y = &tr.y[2 * t];
      y[0] = P[out_b_];
      y[1] = P[out_b_ + 1];
      detail::gemv_acc(P + out_w_, &tr.dec.h[t * H], y, 2, H);
      const double ex = y[0] - x[t][0];
      const double ey = y[1] - x[t][1];
      tr.recon += ex * ex + ey * ey;
    }
    tr.recon /= static_cast<double>(T);

    tr.kl = 0.0;
    if (sample) tr.kl = kl_estimate(tr);
  }

  /// Adds weight * d(recon + beta * kl)/dparams into `grad`.
  void backward(const Sequence& x, const Trace& tr, double weight, std::vector<double>& grad,
                detail::GruScratch& scratch) const {
    const std::size_t T = tr.T;
    const auto H = static_cast<std::size_t>(cfg_.hidden_dim);
    const auto L = static_cast<std::size_t>(cfg_.latent_dim);
    const auto K = static_cast<std::size_t>(cfg_.n_mixture);
    const std::size_t DI = L + 1;
    const double* P = params_.data();
    double* G = grad.data();
    scratch.resize(H);

    std::vector<double> dz(L, 0.0), ds(H, 0.0), ds_prev(H, 0.0), din(DI, 0.0);
    for (std::size_t t = T; t-- > 0;) {
      const double* y = &tr.y[2 * t];
      const double dy[2] = {weight * 2.0 * (y[0] - x[t][0]) / static_cast<double>(T),
                            weight * 2.0 * (y[1] - x[t][1]) / static_cast<double>(T)};
      const double* s = &tr.dec.h[t * H];
      detail::outer_acc(G + out_w_, dy, s, 2, H);
      G[out_b_] += dy[0];
      G[out_b_ + 1] += dy[1];
      detail::gemv_t_acc(P + out_w_, dy, ds.data(), 2, H);
      const double* sp = t ? &tr.dec.h[(t - 1) * H] : tr.s0.data();
      std::fill(ds_prev.begin(), ds_prev.end(), 0.0);
      std::fill(din.begin(), din.end(), 0.0);
      detail::gru_backward(P, G, dec_, &tr.dec_in[t * DI], sp, &tr.dec.r[t * H], &tr.dec.u[t * H],
                           &tr.dec.n[t * H], &tr.dec.unh[t * H], ds.data(), ds_prev.data(),
                           din.data(), scratch);
      for (std::size_t d = 0; d < L; ++d) dz[d] += din[d];
      ds.swap(ds_prev);
    }
    // ds now holds dL/ds0.
    for (std::size_t i = 0; i < H; ++i) ds[i] *= 1.0 - tr.s0[i] * tr.s0[i];
    detail::outer_acc(G + init_w_, ds.data(), tr.z.data(), H, L);
    for (std::size_t i = 0; i < H; ++i) G[init_b_ + i] += ds[i];
    detail::gemv_t_acc(P + init_w_, ds.data(), dz.data(), H, L);

    std::vector<double> dmu(L, 0.0), dlv(L, 0.0);
    const bool sample = cfg_.sample_latent();
    if (sample) {
      const double w = weight * cfg_.beta;
      // d(-log p(z)): responsibilities gamma_k.
      for (std::size_t k = 0; k < K; ++k) {
        const double* m = P + prior_mean_ + k * L;
        for (std::size_t d = 0; d < L; ++d) {
          const double diff = tr.z[d] - m[d];
          dz[d] += w * tr.gamma[k] * diff;
          G[prior_mean_ + k * L + d] -= w * tr.gamma[k] * diff;
        }
      }
      std::vector<double> pi(K);
      softmax(P + prior_logit_, pi);
      for (std::size_t k = 0; k < K; ++k) G[prior_logit_ + k] += w * (pi[k] - tr.gamma[k]);
      for (std::size_t d = 0; d < L; ++d) dlv[d] += -0.5 * w;  // from log q
    }
    for (std::size_t d = 0; d < L; ++d) {
      dmu[d] = dz[d];
      if (sample) dlv[d] += dz[d] * 0.5 * std::exp(0.5 * tr.lv[d]) * tr.xi[d];
      const bool inside = tr.lv_raw[d] > detail::kLogVarMin && tr.lv_raw[d] < detail::kLogVarMax;
      if (!inside) dlv[d] = 0.0;
    }
    std::vector<double> dh(H, 0.0);
    detail::outer_acc(G + mu_w_, dmu.data(), tr.h_enc.data(), L, H);
    detail::outer_acc(G + lv_w_, dlv.data(), tr.h_enc.data(), L, H);
    for (std::size_t d = 0; d < L; ++d) {
      G[mu_b_ + d] += dmu[d];
      G[lv_b_ + d] += dlv[d];
    }
    detail::gemv_t_acc(P + mu_w_, dmu.data(), dh.data(), L, H);
    detail::gemv_t_acc(P + lv_w_, dlv.data(), dh.data(), L, H);

    const std::vector<double> zero(H, 0.0);
    std::vector<double> dh_prev(H, 0.0);
    for (std::size_t t = T; t-- > 0;) {
      const double* hp = t ? &tr.enc.h[(t - 1) * H] : zero.data();
      std::fill(dh_prev.begin(), dh_prev.end(), 0.0);
      detail::gru_backward(P, G, enc_, &tr.enc_in[2 * t], hp, &tr.enc.r[t * H], &tr.enc.u[t * H],
                           &tr.enc.n[t * H], &tr.enc.unh[t * H], dh.data(), dh_prev.data(),
                           nullptr, scratch);
      dh.swap(dh_prev);
    }
  }

  /// Mean over points of the squared Euclidean reconstruction error, latent
  /// at its posterior mean.
  double score(const Sequence& x) const {
    Trace tr;
    forward(x, nullptr, tr);
    return tr.recon;
  }

  /// Reconstruction in normalised coordinates (posterior-mean latent).
  Sequence reconstruct(const Sequence& x) const {
    Trace tr;
    forward(x, nullptr, tr);
    Sequence out(x.size());
    for (std::size_t t = 0; t < x.size(); ++t) out[t] = {tr.y[2 * t], tr.y[2 * t + 1]};
    return out;
  }

  void save(const std::string& path) const {
    std::ofstream out(path, std::ios::trunc);
    if (!out) throw IoError("cannot write " + path);
    out << "privsec-seqmodel 1\n" << to_json(cfg_).dump() << "\n";
    char buf[40];
    for (const auto& t : tensors_) {
      out << t.name << " " << t.rows << " " << t.cols << "\n";
      for (std::size_t i = 0; i < t.size(); ++i) {
        std::snprintf(buf, sizeof buf, "%.17g", params_[t.offset + i]);
        out << (i ? " " : "") << buf;
      }
      out << "\n";
    }
    if (!out) throw IoError("write failed: " + path);
  }

  static SeqModel load(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::string magic, cfg_line;
    int version = 0;
    in >> magic >> version;
    std::getline(in, cfg_line);
    std::getline(in, cfg_line);
    if (magic != "privsec-seqmodel" || version != 1) {
      throw ValidationError(path + ": not a sequence model checkpoint");
    }
    const auto j = nlohmann::json::parse(cfg_line, nullptr, false);
    if (j.is_discarded()) throw ValidationError(path + ": bad config header");
    SeqModel m(seq_config_from_json(j));
    for (const auto& t : m.tensors_) {
      std::string name;
      std::size_t rows = 0, cols = 0;
      in >> name >> rows >> cols;
      if (name != t.name || rows != t.rows || cols != t.cols) {
        throw ValidationError(path + ": tensor layout mismatch at " + t.name);
      }
      for (std::size_t i = 0; i < t.size(); ++i) in >> m.params_[t.offset + i];
    }
    if (!in) throw ValidationError(path + ": truncated checkpoint");
    return m;
  }

 private:
  std::size_t add(const std::string& name, std::size_t rows, std::size_t cols) {
    tensors_.push_back({name, total_, rows, cols});
    total_ += rows * cols;
    return tensors_.back().offset;
  }

  detail::GruLayout add_gru(const std::string& p, std::size_t in, std::size_t hid) {
    detail::GruLayout g;
    g.in = in;
    g.hid = hid;
    g.Wr = add(p + ".Wr", hid, in);
    g.Ur = add(p + ".Ur", hid, hid);
    g.br = add(p + ".br", hid, 1);
    g.Wu = add(p + ".Wu", hid, in);
    g.Uu = add(p + ".Uu", hid, hid);
    g.bu = add(p + ".bu", hid, 1);
    g.Wn = add(p + ".Wn", hid, in);
    g.Un = add(p + ".Un", hid, hid);
    g.bn = add(p + ".bn", hid, 1);
    return g;
  }

  static void softmax(const double* logits, std::vector<double>& out) {
    const double mx = *std::max_element(logits, logits + out.size());
    double s = 0.0;
    for (std::size_t k = 0; k < out.size(); ++k) s += (out[k] = std::exp(logits[k] - mx));
    for (auto& v : out) v /= s;
  }

  // log q(z|x) - log p(z), single sample; fills responsibilities.
  double kl_estimate(Trace& tr) const {
    const auto L = static_cast<std::size_t>(cfg_.latent_dim);
    const auto K = static_cast<std::size_t>(cfg_.n_mixture);
    const double* P = params_.data();
    double log_q = 0.0;
    for (std::size_t d = 0; d < L; ++d) {
      log_q += -detail::kHalfLog2Pi - 0.5 * tr.lv[d] - 0.5 * tr.xi[d] * tr.xi[d];
    }
    std::vector<double> pi(K);
    softmax(P + prior_logit_, pi);
    std::vector<double> comp(K);
    for (std::size_t k = 0; k < K; ++k) {
      const double* m = P + prior_mean_ + k * L;
      double lp = std::log(pi[k]);
      for (std::size_t d = 0; d < L; ++d) {
        const double diff = tr.z[d] - m[d];
        lp += -detail::kHalfLog2Pi - 0.5 * diff * diff;
      }
      comp[k] = lp;
    }
    const double mx = *std::max_element(comp.begin(), comp.end());
    double s = 0.0;
    for (double c : comp) s += std::exp(c - mx);
    const double log_p = mx + std::log(s);
    tr.gamma.resize(K);
    for (std::size_t k = 0; k < K; ++k) tr.gamma[k] = std::exp(comp[k] - log_p);
    return log_q - log_p;
  }

  SeqModelConfig cfg_;
  std::vector<Tensor> tensors_;
  std::size_t total_ = 0;
  std::vector<double> params_;
  detail::GruLayout enc_, dec_;
  std::size_t mu_w_ = 0, mu_b_ = 0, lv_w_ = 0, lv_b_ = 0, prior_mean_ = 0, prior_logit_ = 0;
  std::size_t init_w_ = 0, init_b_ = 0, out_w_ = 0, out_b_ = 0;
};

// ---------------------------------------------------------------------------
// Training

/// Mean over the batch of recon + beta * kl; gradient written to `grad`.
/// `noise` holds latent_dim normals per trip (ignored without sampling).
inline double batch_loss_and_grad(const SeqModel& model, const std::vector<const Sequence*>& batch,
                                  const std::vector<double>& noise, std::vector<double>* grad) {
  const auto L = static_cast<std::size_t>(model.config().latent_dim);
  const double w = 1.0 / static_cast<double>(batch.size());
  if (grad) grad->assign(model.parameter_count(), 0.0);
  SeqModel::Trace tr;
  detail::GruScratch scratch;
  double loss = 0.0;
  for (std::size_t b = 0; b < batch.size(); ++b) {
    const double* xi = noise.empty() ? nullptr : &noise[b * L];
    model.forward(*batch[b], xi, tr);
    loss += w * (tr.recon + model.config().beta * tr.kl);
    if (grad) model.backward(*batch[b], tr, w, *grad, scratch);
  }
  return loss;
}

struct GradientCheckEntry {
  std::string tensor;
  double max_rel_error = 0.0;
  double max_abs_error = 0.0;
};

struct GradientCheckReport {
  std::vector<GradientCheckEntry> entries;
  double max_rel_error() const {
    double m = 0.0;
    for (const auto& e : entries) m = std::max(m, e.max_rel_error);
    return m;
  }
};

/// Compares backpropagated gradients with central finite differences for
/// every parameter. Relative error per element is
/// |g - fd| / max(|g|, |fd|, floor).
inline GradientCheckReport gradient_check(SeqModel& model, const std::vector<const Sequence*>& batch,
                                          const std::vector<double>& noise, double step = 1e-5,
                                          double floor = 1e-7) {
  std::vector<double> grad;
  batch_loss_and_grad(model, batch, noise, &grad);
  GradientCheckReport rep;
  auto& p = model.params();
  for (const auto& t : model.tensors()) {
    GradientCheckEntry e{t.name, 0.0, 0.0};
    for (std::size_t i = 0; i < t.size(); ++i) {
      const std::size_t k = t.offset + i;
      const double saved = p[k];
      p[k] = saved + step;
      const double up = batch_loss_and_grad(model, batch, noise, nullptr);
      p[k] = saved - step;
      const double down = batch_loss_and_grad(model, batch, noise, nullptr);
      p[k] = saved;
      const double fd = (up - down) / (2 * step);
      const double abs_err = std::abs(fd - grad[k]);
      const double rel = abs_err / std::max({std::abs(fd), std::abs(grad[k]), floor});
      e.max_abs_error = std::max(e.max_abs_error, abs_err);
      e.max_rel_error = std::max(e.max_rel_error, rel);
    }
    rep.entries.push_back(e);
  }
  return rep;
}

struct TrainReport {
  std::vector<double> epoch_loss;
  double heldout_recon = std::numeric_limits<double>::quiet_NaN();
  std::size_t parameter_count = 0;
  std::optional<GradientCheckReport> gradient_check;
};

/// Adam on mini-batches in seeded shuffled order. Throws TrainingError on a
/// non-finite loss.
inline TrainReport train(SeqModel& model, const std::vector<Sequence>& data,
                         const std::vector<Sequence>& heldout = {}) {
  const SeqModelConfig& cfg = model.config();
  TrainReport rep;
  rep.parameter_count = model.parameter_count();
  if (cfg.epochs == 0 || data.empty()) return rep;

  const auto L = static_cast<std::size_t>(cfg.latent_dim);
  const std::size_t n = model.parameter_count();
  std::vector<double> m1(n, 0.0), m2(n, 0.0), grad;
  const double b1 = 0.9, b2 = 0.999, adam_eps = 1e-8;
  long step = 0;
  Rng rng(derive_seed(cfg.seed, "train"));
  std::vector<std::size_t> order(data.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double phase = cfg.epochs > 1 ? static_cast<double>(epoch) / (cfg.epochs - 1) : 0.0;
    const double lr = cfg.learning_rate * (cfg.final_lr_fraction + (1 - cfg.final_lr_fraction) * 0.5 *
                                                                       (1 + std::cos(std::numbers::pi * phase)));
    rng.shuffle(order.begin(), order.end());
    double epoch_loss = 0.0;
    for (std::size_t start = 0, bi = 0; start < order.size();
         start += static_cast<std::size_t>(cfg.batch_size), ++bi) {
      const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(cfg.batch_size));
      std::vector<const Sequence*> batch;
      for (std::size_t i = start; i < end; ++i) batch.push_back(&data[order[i]]);
      std::vector<double> noise;
      if (cfg.sample_latent()) {
        noise.resize(batch.size() * L);
        for (auto& v : noise) v = rng.normal();
      }
      const double loss = batch_loss_and_grad(model, batch, noise, &grad);
      if (!std::isfinite(loss)) {
        throw TrainingError("non-finite loss at epoch " + std::to_string(epoch) + ", batch " +
                            std::to_string(bi));
      }
      epoch_loss += loss * static_cast<double>(batch.size());
      if (cfg.grad_clip > 0) {
        double norm = 0.0;
        for (double g : grad) norm += g * g;
        norm = std::sqrt(norm);
        if (norm > cfg.grad_clip) {
          for (auto& g : grad) g *= cfg.grad_clip / norm;
        }
      }
      ++step;
      const double c1 = 1.0 - std::pow(b1, static_cast<double>(step));
      const double c2 = 1.0 - std::pow(b2, static_cast<double>(step));
      auto& p = model.params();
      for (std::size_t k = 0; k < n; ++k) {
        m1[k] = b1 * m1[k] + (1 - b1) * grad[k];
        m2[k] = b2 * m2[k] + (1 - b2) * grad[k] * grad[k];
        p[k] -= lr * (m1[k] / c1) / (std::sqrt(m2[k] / c2) + adam_eps);
      }
    }
    rep.epoch_loss.push_back(epoch_loss / static_cast<double>(data.size()));
  }
  if (!heldout.empty()) {
    double s = 0.0;
    for (const auto& x : heldout) s += model.score(x);
    rep.heldout_recon = s / static_cast<double>(heldout.size());
  }
  return rep;
}

// ---------------------------------------------------------------------------
// Detector

struct SeqDetectResult {
  std::vector<ScoredTrip> scores;
  TrainReport train;
};

/// Trains on the train split (normal trips only by construction) and scores
/// every test trip. The detector never sees labels.
inline SeqModel train_seq_detector(const Corpus& c, const SeqModelConfig& cfg, TrainReport* report) {
  const Normalizer norm(c.bbox, c.projection_origin);
  std::vector<Sequence> data;
  for (const auto& t : c.trajectories) {
    if (t.split == Split::Train) data.push_back(preprocess(t.points, norm, static_cast<std::size_t>(cfg.max_len)));
  }
  SeqModel model(cfg);
  TrainReport rep = train(model, data);
  if (report) *report = std::move(rep);
  return model;
}

inline std::vector<ScoredTrip> seq_score_tests(const SeqModel& model, const Corpus& c) {
  const Normalizer norm(c.bbox, c.projection_origin);
  std::vector<ScoredTrip> out;
  for (const auto& t : c.trajectories) {
    if (t.split != Split::Test) continue;
    const Sequence s = preprocess(t.points, norm, static_cast<std::size_t>(model.config().max_len));
    out.push_back({t.id, Label::Normal, model.score(s), ""});
  }
  return out;
}

}  // namespace privsec
