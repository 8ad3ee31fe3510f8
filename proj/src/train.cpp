#include "pecan/train.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "pecan/prng.hpp"

namespace pecan {

void TrainConfig::validate(std::uint32_t feature_dim,
                           std::uint32_t num_classes) const {
  if (layer_dims.size() < 2)
    throw std::invalid_argument("train: layer_dims needs at least 2 entries");
  for (std::uint32_t d : layer_dims)
    if (d == 0) throw std::invalid_argument("train: zero layer width");
  if (feature_dim != 0 && layer_dims.front() != feature_dim)
    throw std::invalid_argument("train: layer_dims[0] != feature_dim");
  if (num_classes != 0 && layer_dims.back() < num_classes)
    throw std::invalid_argument("train: output width < num_classes");
  if (total_epochs() == 0)
    throw std::invalid_argument("train: at least one epoch required");
  if (batch_size == 0)
    throw std::invalid_argument("train: batch_size must be >= 1");
  if (!(learning_rate > 0.0f))
    throw std::invalid_argument("train: learning_rate must be > 0");
  if (!(momentum >= 0.0f) || momentum >= 1.0f)
    throw std::invalid_argument("train: momentum must be in [0, 1)");
  if (!(eps_train >= 0.0))
    throw std::invalid_argument("train: eps_train must be >= 0");
  if (region_kind == RegionKind::L0 && s_train > layer_dims.front())
    throw std::invalid_argument("train: s_train exceeds feature_dim");
  for (double k : {kappa_start, kappa_end})
    if (!(k >= 0.0) || k > 1.0)
      throw std::invalid_argument("train: kappa must be in [0, 1]");
}

ModelGrads zero_grads(const MlpModel& m) {
  ModelGrads g;
  g.dW.reserve(m.num_layers());
  g.db.reserve(m.num_layers());
  for (std::size_t l = 0; l < m.num_layers(); ++l) {
    g.dW.emplace_back(m.weights[l].size(), 0.0);
    g.db.emplace_back(m.biases[l].size(), 0.0);
  }
  return g;
}

namespace {

void clear_grads(ModelGrads& g) {
  for (auto& v : g.dW) std::fill(v.begin(), v.end(), 0.0);
  for (auto& v : g.db) std::fill(v.begin(), v.end(), 0.0);
}

// softmax gradient seed: scale * (softmax(z) - onehot(y)); returns CE loss.
double softmax_grad(std::span<const double> z, std::uint32_t y, double scale,
                    std::vector<double>& out) {
  const std::size_t C = z.size();
  double mx = z[0];
  for (double v : z) mx = std::max(mx, v);
  double sum = 0.0;
  out.resize(C);
  for (std::size_t k = 0; k < C; ++k) {
    out[k] = std::exp(z[k] - mx);
    sum += out[k];
  }
  for (std::size_t k = 0; k < C; ++k) {
    out[k] = scale * (out[k] / sum);
    if (k == y) out[k] -= scale;
  }
  return mx + std::log(sum) - z[y];
}

}  // namespace

double accumulate_natural_grad(const MlpModel& m, std::span<const float> x,
                               std::uint32_t y, double scale, ModelGrads& g) {
  if (x.size() != m.input_dim())
    throw std::invalid_argument("natural_grad: input size mismatch");
  if (y >= m.output_dim())
    throw std::invalid_argument("natural_grad: label out of range");
  const std::size_t L = m.num_layers();
  // Forward, recording activations. acts[l] feeds layer l; pre[l] = z_l.
  std::vector<std::vector<float>> acts(L);
  std::vector<std::vector<float>> pre(L);
  acts[0].assign(x.begin(), x.end());
  for (std::size_t l = 0; l < L; ++l) {
    const std::uint32_t d_in = m.layer_dims[l];
    const std::uint32_t d_out = m.layer_dims[l + 1];
    pre[l].assign(d_out, 0.0f);
    for (std::uint32_t j = 0; j < d_out; ++j) {
      float z = m.biases[l][j];
      const float* row = m.weights[l].data() + std::size_t(j) * d_in;
      for (std::uint32_t i = 0; i < d_in; ++i) z += row[i] * acts[l][i];
      pre[l][j] = z;
    }
    if (l + 1 < L) {
      acts[l + 1].resize(d_out);
      for (std::uint32_t j = 0; j < d_out; ++j)
        acts[l + 1][j] = std::max(pre[l][j], 0.0f);
    }
  }
  std::vector<double> logits(pre[L - 1].begin(), pre[L - 1].end());
  std::vector<double> grad;
  const double loss = softmax_grad(logits, y, scale, grad);
  // Backward.
  std::vector<double> grad_in;
  for (std::size_t l = L; l-- > 0;) {
    const std::uint32_t d_in = m.layer_dims[l];
    const std::uint32_t d_out = m.layer_dims[l + 1];
    grad_in.assign(d_in, 0.0);
    for (std::uint32_t j = 0; j < d_out; ++j) {
      const double gj = grad[j];
      if (gj == 0.0) continue;
      g.db[l][j] += gj;
      const float* row = m.weights[l].data() + std::size_t(j) * d_in;
      double* gw = g.dW[l].data() + std::size_t(j) * d_in;
      for (std::uint32_t i = 0; i < d_in; ++i) {
        gw[i] += gj * acts[l][i];
        grad_in[i] += gj * row[i];
      }
    }
    if (l > 0) {
      grad.assign(d_in, 0.0);
      for (std::uint32_t i = 0; i < d_in; ++i)
        grad[i] = pre[l - 1][i] > 0.0f ? grad_in[i] : 0.0;
    }
  }
  return loss;
}

namespace {

// Gradient bookkeeping for the worst-case loss. The bound network is the
// function being differentiated: pre-activation intervals from
// propagate_layers are its intermediate values.
struct BoundGradCtx {
  const MlpModel& m;
  const Region& region;
  const BoundStack& stack;
  ModelGrads& g;
};

// Backpropagates (gl, gu) -- gradients w.r.t. the lower/upper output bounds
// of affine layer l -- through that layer given its input interval, adding
// parameter gradients and producing gradients w.r.t. the input bounds.
void backprop_ibp_affine(BoundGradCtx& ctx, std::size_t l,
                         const std::vector<double>& in_lo,
                         const std::vector<double>& in_hi,
                         const std::vector<double>& gl,
                         const std::vector<double>& gu,
                         std::vector<double>& gl_in,
                         std::vector<double>& gu_in) {
  const std::uint32_t d_in = ctx.m.layer_dims[l];
  const std::uint32_t d_out = ctx.m.layer_dims[l + 1];
  gl_in.assign(d_in, 0.0);
  gu_in.assign(d_in, 0.0);
  for (std::uint32_t j = 0; j < d_out; ++j) {
    const double a = gl[j];
    const double b = gu[j];
    if (a == 0.0 && b == 0.0) continue;
    ctx.g.db[l][j] += a + b;
    const float* row = ctx.m.weights[l].data() + std::size_t(j) * d_in;
    double* gw = ctx.g.dW[l].data() + std::size_t(j) * d_in;
    for (std::uint32_t i = 0; i < d_in; ++i) {
      const double w = row[i];
      if (w >= 0.0) {
        // lower_j uses w*l_i, upper_j uses w*u_i
        gw[i] += a * in_lo[i] + b * in_hi[i];
        gl_in[i] += w * a;
        gu_in[i] += w * b;
      } else {
        gw[i] += a * in_hi[i] + b * in_lo[i];
        gu_in[i] += w * a;
        gl_in[i] += w * b;
      }
    }
  }
}

// First-layer L0 bounds: z_j(x) +/- top-s gains. Gradient of the z part is
// dense; the gain part only touches the selected coordinates, through
// whichever branch of max(0, w(1-x), -wx) is active.
void backprop_l0_first_layer(BoundGradCtx& ctx,
                             const std::vector<double>& gl,
                             const std::vector<double>& gu) {
  const std::uint32_t d_in = ctx.m.layer_dims[0];
  const std::uint32_t d_out = ctx.m.layer_dims[1];
  const std::uint32_t s = ctx.region.spec.s;
  const std::vector<float>& x = ctx.region.center;
  std::vector<std::pair<double, std::uint32_t>> up(d_in), dn(d_in);
  for (std::uint32_t j = 0; j < d_out; ++j) {
    const double a = gl[j];
    const double b = gu[j];
    if (a == 0.0 && b == 0.0) continue;
    ctx.g.db[0][j] += a + b;
    const float* row = ctx.m.weights[0].data() + std::size_t(j) * d_in;
    double* gw = ctx.g.dW[0].data() + std::size_t(j) * d_in;
    for (std::uint32_t i = 0; i < d_in; ++i) {
      gw[i] += (a + b) * x[i];  // the anchor term z_j
      const double w = row[i];
      const double xi = x[i];
      up[i] = {std::max({0.0, w * (1.0 - xi), -w * xi}), i};
      dn[i] = {std::max({0.0, -w * (1.0 - xi), w * xi}), i};
    }
    if (s == 0) continue;
    auto desc = [](const auto& p, const auto& q) {
      return p.first > q.first || (p.first == q.first && p.second < q.second);
    };
    const std::uint32_t k = std::min<std::uint32_t>(s, d_in);
    std::nth_element(up.begin(), up.begin() + k, up.end(), desc);
    for (std::uint32_t t = 0; t < k; ++t) {
      const auto [gain, i] = up[t];
      if (gain <= 0.0) continue;  // zero gains carry zero derivative
      const double w = row[i];
      const double xi = x[i];
      // active branch of max(0, w(1-x), -wx)
      const double d = (w * (1.0 - xi) >= -w * xi) ? (1.0 - xi) : -xi;
      gw[i] += b * d;
    }
    std::nth_element(dn.begin(), dn.begin() + k, dn.end(), desc);
    for (std::uint32_t t = 0; t < k; ++t) {
      const auto [gain, i] = dn[t];
      if (gain <= 0.0) continue;
      const double w = row[i];
      const double xi = x[i];
      // active branch of max(0, -w(1-x), wx); it enters lower_j negated
      const double d = (-w * (1.0 - xi) >= w * xi) ? -(1.0 - xi) : xi;
      gw[i] -= a * d;
    }
  }
}

}  // namespace

double accumulate_worst_grad(const MlpModel& m, std::span<const float> x,
                             std::uint32_t y, const RegionSpec& spec,
                             double scale, ModelGrads& g) {
  if (y >= m.output_dim())
    throw std::invalid_argument("worst_grad: label out of range");
  const Region region = anchor(spec, x);
  const BoundStack stack = propagate_layers(m, region);
  const std::size_t L = m.num_layers();
  const std::uint32_t C = m.output_dim();

  // Worst-case logits and the loss seed.
  std::vector<double> z_hat(C);
  for (std::uint32_t k = 0; k < C; ++k)
    z_hat[k] = (k == y) ? stack.pre[L - 1].lower[k] : stack.pre[L - 1].upper[k];
  std::vector<double> seed;
  const double loss = softmax_grad(z_hat, y, scale, seed);
  std::vector<double> gl(C, 0.0), gu(C, 0.0);
  for (std::uint32_t k = 0; k < C; ++k)
    (k == y ? gl : gu)[k] = seed[k];

  BoundGradCtx ctx{m, region, stack, g};
  std::vector<double> gl_in, gu_in;
  for (std::size_t l = L; l-- > 1;) {
    // Input interval of layer l is relu(pre[l-1]).
    const Interval& p = stack.pre[l - 1];
    std::vector<double> in_lo(p.size()), in_hi(p.size());
    for (std::size_t i = 0; i < p.size(); ++i) {
      in_lo[i] = std::max(p.lower[i], 0.0);
      in_hi[i] = std::max(p.upper[i], 0.0);
    }
    backprop_ibp_affine(ctx, l, in_lo, in_hi, gl, gu, gl_in, gu_in);
    // Through the ReLU clamp onto the pre-activation bounds.
    gl.assign(p.size(), 0.0);
    gu.assign(p.size(), 0.0);
    for (std::size_t i = 0; i < p.size(); ++i) {
      gl[i] = p.lower[i] > 0.0 ? gl_in[i] : 0.0;
      gu[i] = p.upper[i] > 0.0 ? gu_in[i] : 0.0;
    }
  }
  if (region.spec.kind == RegionKind::LInf) {
    const Interval box = input_interval(region);
    backprop_ibp_affine(ctx, 0, box.lower, box.upper, gl, gu, gl_in, gu_in);
  } else {
    backprop_l0_first_layer(ctx, gl, gu);
  }
  return loss;
}

double natural_loss_grad(const MlpModel& m, std::span<const float> x,
                         std::uint32_t y, ModelGrads& g) {
  g = zero_grads(m);
  return accumulate_natural_grad(m, x, y, 1.0, g);
}

double robust_loss_grad(const MlpModel& m, std::span<const float> x,
                        std::uint32_t y, const RegionSpec& spec, double kappa,
                        ModelGrads& g) {
  if (kappa < 0.0 || kappa > 1.0)
    throw std::invalid_argument("robust_loss_grad: kappa must be in [0, 1]");
  g = zero_grads(m);
  double loss = 0.0;
  if (kappa > 0.0)
    loss += kappa * accumulate_natural_grad(m, x, y, kappa, g);
  if (kappa < 1.0)
    loss += (1.0 - kappa) *
            accumulate_worst_grad(m, x, y, spec, 1.0 - kappa, g);
  return loss;
}

MlpModel train(const Dataset& d, const TrainConfig& cfg,
               std::uint64_t model_seed,
               std::vector<double>* epoch_natural_loss) {
  cfg.validate(d.feature_dim, d.num_classes);
  if (d.empty()) return make_sentinel(cfg.layer_dims);
  for (const auto& e : d.examples)
    if (e.label >= cfg.layer_dims.back())
      throw std::invalid_argument("train: label exceeds output width");

  std::uint64_t rng_state = cfg.seed ^ model_seed;
  const std::uint64_t shuffle_seed = splitmix64_next(rng_state);
  const std::uint64_t init_seed = splitmix64_next(rng_state);
  MlpModel m = init_model(cfg.layer_dims, init_seed);
  Prng shuffle_rng(shuffle_seed);

  const std::size_t N = d.size();
  const std::size_t B = cfg.batch_size;
  const std::uint64_t steps_per_epoch = (N + B - 1) / B;
  const std::uint64_t mixed_steps = std::uint64_t(cfg.epochs_mixed) * steps_per_epoch;
  const std::uint64_t mf_steps =
      (std::uint64_t(cfg.epochs_mixed) + cfg.epochs_full) * steps_per_epoch;

  // Momentum buffers, float32 like the weights.
  std::vector<std::vector<float>> vW, vb;
  for (std::size_t l = 0; l < m.num_layers(); ++l) {
    vW.emplace_back(m.weights[l].size(), 0.0f);
    vb.emplace_back(m.biases[l].size(), 0.0f);
  }
  ModelGrads grads = zero_grads(m);
  std::vector<std::size_t> order(N);
  std::iota(order.begin(), order.end(), 0);

  std::uint64_t mixed_step = 0;  // steps taken inside the mixed phase
  std::uint64_t mf_step = 0;     // steps taken inside mixed+full
  for (std::uint32_t epoch = 0; epoch < cfg.total_epochs(); ++epoch) {
    shuffle_rng.shuffle(order);
    const bool warm = epoch < cfg.epochs_warmup;
    const bool mixed = !warm && epoch < cfg.epochs_warmup + cfg.epochs_mixed;
    double epoch_loss = 0.0;
    for (std::size_t start = 0; start < N; start += B) {
      const std::size_t stop = std::min(N, start + B);
      const double inv = 1.0 / double(stop - start);
      // Per-step schedule state.
      double nat_coeff = 1.0;
      double worst_coeff = 0.0;
      RegionSpec spec = cfg.train_region();
      if (!warm) {
        const double kf = double(mf_step + 1) / double(mf_steps);
        const double kappa =
            cfg.kappa_start + (cfg.kappa_end - cfg.kappa_start) * kf;
        if (mixed) {
          const double beta = double(mixed_step + 1) / double(mixed_steps);
          nat_coeff = (1.0 - beta) + beta * kappa;
          worst_coeff = beta * (1.0 - kappa);
          if (spec.kind == RegionKind::LInf)
            spec.eps = cfg.eps_train * beta;
          else
            spec.s = std::uint32_t(beta * cfg.s_train + 1e-9);
          ++mixed_step;
        } else {
          nat_coeff = kappa;
          worst_coeff = 1.0 - kappa;
        }
        ++mf_step;
      }
      clear_grads(grads);
      for (std::size_t idx = start; idx < stop; ++idx) {
        const Example& e = d.examples[order[idx]];
        if (nat_coeff > 0.0 || epoch_natural_loss) {
          const double scale = nat_coeff > 0.0 ? nat_coeff * inv : 0.0;
          epoch_loss +=
              accumulate_natural_grad(m, e.features, e.label, scale, grads);
        }
        if (worst_coeff > 0.0)
          accumulate_worst_grad(m, e.features, e.label, spec,
                                worst_coeff * inv, grads);
      }
      // SGD + momentum in float32.
      for (std::size_t l = 0; l < m.num_layers(); ++l) {
        for (std::size_t i = 0; i < m.weights[l].size(); ++i) {
          const float gf = static_cast<float>(grads.dW[l][i]);
          vW[l][i] = cfg.momentum * vW[l][i] + gf;
          m.weights[l][i] -= cfg.learning_rate * vW[l][i];
        }
        for (std::size_t i = 0; i < m.biases[l].size(); ++i) {
          const float gf = static_cast<float>(grads.db[l][i]);
          vb[l][i] = cfg.momentum * vb[l][i] + gf;
          m.biases[l][i] -= cfg.learning_rate * vb[l][i];
        }
      }
    }
    if (epoch_natural_loss)
      epoch_natural_loss->push_back(epoch_loss / double(N));
  }
  return m;
}

}  // namespace pecan
