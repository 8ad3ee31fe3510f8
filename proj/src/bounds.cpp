#include "pecan/bounds.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "pecan/errors.hpp"

namespace pecan {

RegionKind region_kind_from_string(const std::string& s) {
  if (s == "l0") return RegionKind::L0;
  if (s == "linf") return RegionKind::LInf;
  throw config_error("unknown norm '" + s + "' (expected l0 or linf)");
}

std::string to_string(RegionKind k) {
  return k == RegionKind::L0 ? "l0" : "linf";
}

void RegionSpec::validate(std::uint32_t feature_dim) const {
  if (kind == RegionKind::LInf) {
    if (!(eps >= 0.0) || !std::isfinite(eps))
      throw std::invalid_argument("region eps must be finite and >= 0");
  } else {
    if (s > feature_dim)
      throw std::invalid_argument("region s exceeds feature_dim");
  }
}

Interval input_interval(const Region& r) {
  if (r.spec.kind != RegionKind::LInf)
    throw std::invalid_argument("input_interval: only defined for LInf");
  Interval iv;
  iv.lower.reserve(r.center.size());
  iv.upper.reserve(r.center.size());
  for (float c : r.center) {
    iv.lower.push_back(std::max(0.0, double(c) - r.spec.eps));
    iv.upper.push_back(std::min(1.0, double(c) + r.spec.eps));
  }
  return iv;
}

Interval ibp_affine(const Interval& in, std::span<const float> W,
                    std::span<const float> b) {
  const std::size_t d_in = in.size();
  const std::size_t d_out = b.size();
  if (W.size() != d_in * d_out)
    throw std::invalid_argument("ibp_affine: weight shape mismatch");
  Interval out;
  out.lower.resize(d_out);
  out.upper.resize(d_out);
  for (std::size_t j = 0; j < d_out; ++j) {
    double lo = b[j];
    double hi = b[j];
    const float* row = W.data() + j * d_in;
    for (std::size_t i = 0; i < d_in; ++i) {
      const double w = row[i];
      if (w >= 0.0) {
        lo += w * in.lower[i];
        hi += w * in.upper[i];
      } else {
        lo += w * in.upper[i];
        hi += w * in.lower[i];
      }
    }
    out.lower[j] = lo;
    out.upper[j] = hi;
  }
  return out;
}

Interval ibp_relu(Interval in) {
  for (auto& v : in.lower) v = std::max(v, 0.0);
  for (auto& v : in.upper) v = std::max(v, 0.0);
  return in;
}

double sum_top_s(std::vector<double>& gains, std::uint32_t s) {
  if (s == 0 || gains.empty()) return 0.0;
  const std::size_t k = std::min<std::size_t>(s, gains.size());
  if (k < gains.size())
    std::nth_element(gains.begin(), gains.begin() + k, gains.end(),
                     std::greater<double>());
  // Fixed summation order (descending) so the result does not depend on the
  // permutation nth_element happened to leave behind.
  std::sort(gains.begin(), gains.begin() + k, std::greater<double>());
  double sum = 0.0;
  for (std::size_t i = 0; i < k; ++i) sum += gains[i];
  return sum;
}

Interval l0_first_layer_bounds(std::span<const float> x,
                               std::span<const float> W,
                               std::span<const float> b, std::uint32_t s) {
  const std::size_t d_in = x.size();
  const std::size_t d_out = b.size();
  if (W.size() != d_in * d_out)
    throw std::invalid_argument("l0_first_layer_bounds: weight shape mismatch");
  Interval out;
  out.lower.resize(d_out);
  out.upper.resize(d_out);
  std::vector<double> gain_up(d_in), gain_dn(d_in);
  for (std::size_t j = 0; j < d_out; ++j) {
    const float* row = W.data() + j * d_in;
    double z = b[j];
    for (std::size_t i = 0; i < d_in; ++i) {
      const double w = row[i];
      const double xi = x[i];
      z += w * xi;
      // Moving x_i anywhere in [0,1] changes z_j by w*(t - x_i), t in [0,1];
      // the extremes are at t = 0 or t = 1.
      gain_up[i] = std::max({0.0, w * (1.0 - xi), -w * xi});
      gain_dn[i] = std::max({0.0, -w * (1.0 - xi), w * xi});
    }
    out.upper[j] = z + sum_top_s(gain_up, s);
    out.lower[j] = z - sum_top_s(gain_dn, s);
  }
  return out;
}

BoundStack propagate_layers(const MlpModel& m, const Region& r) {
  if (r.center.size() != m.input_dim())
    throw std::invalid_argument("propagate: input size mismatch");
  r.spec.validate(m.input_dim());
  BoundStack stack;
  stack.pre.reserve(m.num_layers());
  Interval act;
  if (r.spec.kind == RegionKind::LInf) {
    act = input_interval(r);
    stack.pre.push_back(ibp_affine(act, m.weights[0], m.biases[0]));
  } else {
    stack.pre.push_back(
        l0_first_layer_bounds(r.center, m.weights[0], m.biases[0], r.spec.s));
  }
  for (std::size_t l = 1; l < m.num_layers(); ++l) {
    act = ibp_relu(stack.pre.back());
    stack.pre.push_back(ibp_affine(act, m.weights[l], m.biases[l]));
  }
  return stack;
}

Interval propagate(const MlpModel& m, const Region& r) {
  return propagate_layers(m, r).pre.back();
}

namespace {

// Concretize one row of a linear bound c + sum_i A_i * x~_i over the region.
// maximize=true gives the max, else the min.
double concretize_row(std::span<const double> A, double c, const Region& r,
                      const Interval* box, std::vector<double>& scratch,
                      bool maximize) {
  double v = c;
  if (r.spec.kind == RegionKind::LInf) {
    for (std::size_t i = 0; i < A.size(); ++i) {
      const double a = A[i];
      if ((a >= 0.0) == maximize)
        v += a * box->upper[i];
      else
        v += a * box->lower[i];
    }
    return v;
  }
  // L0: anchor value plus the s best per-coordinate gains.
  scratch.resize(A.size());
  for (std::size_t i = 0; i < A.size(); ++i) {
    const double a = A[i];
    const double xi = r.center[i];
    v += a * xi;
    scratch[i] = maximize ? std::max({0.0, a * (1.0 - xi), -a * xi})
                          : std::max({0.0, -a * (1.0 - xi), a * xi});
  }
  const double delta = sum_top_s(scratch, r.spec.s);
  return maximize ? v + delta : v - delta;
}

}  // namespace

Interval crown_tighten(const MlpModel& m, const Region& r) {
  const BoundStack stack = propagate_layers(m, r);
  const Interval& ibp = stack.pre.back();
  const std::size_t L = m.num_layers();
  if (L == 1) return ibp;  // single affine layer: propagate() is already exact

  const std::size_t n_out = m.output_dim();
  // Linear bounds of each logit as a function of the activation feeding the
  // last layer: logit_j <= Au[j]·x + cu[j] and >= Al[j]·x + cl[j].
  std::size_t dim = m.layer_dims[L - 1];
  std::vector<double> Au(n_out * dim), Al(n_out * dim);
  std::vector<double> cu(n_out), cl(n_out);
  for (std::size_t j = 0; j < n_out; ++j) {
    for (std::size_t i = 0; i < dim; ++i) {
      const double w = m.weights[L - 1][j * dim + i];
      Au[j * dim + i] = w;
      Al[j * dim + i] = w;
    }
    cu[j] = m.biases[L - 1][j];
    cl[j] = m.biases[L - 1][j];
  }

  for (std::size_t t = L - 1; t-- > 0;) {
    // The current linear bounds are over relu(z_t). Relax each ReLU using its
    // pre-activation interval, then substitute z_t = W_t x_t + b_t.
    const Interval& pre = stack.pre[t];
    const std::size_t width = m.layer_dims[t + 1];
    std::vector<double> su(width), bu(width), sl(width);
    for (std::size_t i = 0; i < width; ++i) {
      const double lo = pre.lower[i];
      const double hi = pre.upper[i];
      if (lo >= 0.0) {
        su[i] = 1.0;
        bu[i] = 0.0;
        sl[i] = 1.0;
      } else if (hi <= 0.0) {
        su[i] = 0.0;
        bu[i] = 0.0;
        sl[i] = 0.0;
      } else {
        su[i] = hi / (hi - lo);
        bu[i] = -lo * hi / (hi - lo);
        sl[i] = (hi >= -lo) ? 1.0 : 0.0;  // adaptive lower line
      }
    }
    // Apply the relaxation coefficient-wise.
    for (std::size_t j = 0; j < n_out; ++j) {
      for (std::size_t i = 0; i < width; ++i) {
        double& au = Au[j * width + i];
        double& al = Al[j * width + i];
        if (au >= 0.0) {
          cu[j] += au * bu[i];
          au *= su[i];
        } else {
          au *= sl[i];
        }
        if (al >= 0.0) {
          al *= sl[i];
        } else {
          cl[j] += al * bu[i];
          al *= su[i];
        }
      }
    }
    // Substitute the affine layer.
    const std::size_t d_in = m.layer_dims[t];
    const std::vector<float>& W = m.weights[t];
    const std::vector<float>& b = m.biases[t];
    std::vector<double> Au2(n_out * d_in, 0.0), Al2(n_out * d_in, 0.0);
    for (std::size_t j = 0; j < n_out; ++j) {
      for (std::size_t i = 0; i < width; ++i) {
        const double au = Au[j * width + i];
        const double al = Al[j * width + i];
        cu[j] += au * b[i];
        cl[j] += al * b[i];
        const float* row = W.data() + i * d_in;
        if (au != 0.0)
          for (std::size_t k = 0; k < d_in; ++k)
            Au2[j * d_in + k] += au * row[k];
        if (al != 0.0)
          for (std::size_t k = 0; k < d_in; ++k)
            Al2[j * d_in + k] += al * row[k];
      }
    }
    Au.swap(Au2);
    Al.swap(Al2);
    dim = d_in;
  }

  // Concretize over the input region and intersect with IBP.
  Interval out;
  out.lower.resize(n_out);
  out.upper.resize(n_out);
  Interval box;
  if (r.spec.kind == RegionKind::LInf) box = input_interval(r);
  std::vector<double> scratch;
  for (std::size_t j = 0; j < n_out; ++j) {
    const std::span<const double> rowu(Au.data() + j * dim, dim);
    const std::span<const double> rowl(Al.data() + j * dim, dim);
    const double up = concretize_row(rowu, cu[j], r, &box, scratch, true);
    const double lo = concretize_row(rowl, cl[j], r, &box, scratch, false);
    out.upper[j] = std::min(up, ibp.upper[j]);
    out.lower[j] = std::max(lo, ibp.lower[j]);
  }
  return out;
}

}  // namespace pecan
