#include <doctest.h>

#include <algorithm>
#include <bit>
#include <cmath>
#include <limits>

#include "helpers.hpp"
#include "pecan/bounds.hpp"
#include "pecan/errors.hpp"
#include "pecan/prng.hpp"

using namespace pecan;
using testutil::make_model;
using testutil::random_model;
using testutil::random_point;

namespace {

// True min/max of affine unit j over the L0 region: enumerate every subset of
// at most s coordinates and every {0,1} corner of that subset (the extremes of
// an affine map over independent [0,1] coordinates).
std::pair<double, double> brute_l0(std::span<const float> x,
                                   std::span<const float> W,
                                   std::span<const float> b, std::uint32_t s,
                                   std::size_t j) {
  const std::size_t d = x.size();
  double lo = std::numeric_limits<double>::infinity();
  double hi = -lo;
  for (std::uint32_t mask = 0; mask < (1u << d); ++mask) {
    if (std::popcount(mask) > int(s)) continue;
    std::vector<std::size_t> idx;
    for (std::size_t i = 0; i < d; ++i)
      if (mask & (1u << i)) idx.push_back(i);
    for (std::uint32_t corner = 0; corner < (1u << idx.size()); ++corner) {
      double z = b[j];
      for (std::size_t i = 0; i < d; ++i) {
        double xi = x[i];
        for (std::size_t t = 0; t < idx.size(); ++t)
          if (idx[t] == i) xi = (corner & (1u << t)) ? 1.0 : 0.0;
        z += double(W[j * d + i]) * xi;
      }
      lo = std::min(lo, z);
      hi = std::max(hi, z);
    }
  }
  return {lo, hi};
}

// Draw a point inside the region and check forward() lands within the bounds.
void check_containment(const MlpModel& m, const Region& r, const Interval& iv,
                       Prng& rng, int samples) {
  for (int t = 0; t < samples; ++t) {
    std::vector<float> x = r.center;
    if (r.spec.kind == RegionKind::LInf) {
      for (auto& v : x)
        v = std::clamp(float(v + rng.uniform(-r.spec.eps, r.spec.eps)), 0.0f,
                       1.0f);
    } else {
      const std::uint32_t count = rng.next_below(r.spec.s + 1);
      for (std::uint32_t c = 0; c < count; ++c)
        x[rng.next_below(std::uint64_t(x.size()))] = float(rng.next_double());
    }
    const std::vector<float> out = forward(m, x);
    for (std::size_t k = 0; k < out.size(); ++k) {
      CHECK(out[k] >= iv.lower[k] - 1e-4);
      CHECK(out[k] <= iv.upper[k] + 1e-4);
    }
  }
}

}  // namespace

TEST_CASE("input_interval clips the LInf box to [0,1]") {
  Region r{{RegionKind::LInf, 0.2, 0}, {0.1f, 0.95f}};
  Interval iv = input_interval(r);
  CHECK(iv.lower[0] == doctest::Approx(0.0));
  CHECK(iv.upper[0] == doctest::Approx(0.3));
  CHECK(iv.lower[1] == doctest::Approx(0.75));
  CHECK(iv.upper[1] == doctest::Approx(1.0));

  Region zero{{RegionKind::LInf, 0.0, 0}, {0.25f}};
  Interval pt = input_interval(zero);
  CHECK(pt.lower[0] == pt.upper[0]);

  Region l0{{RegionKind::L0, 0.0, 1}, {0.25f}};
  CHECK_THROWS_AS((void)input_interval(l0), std::invalid_argument);
}

TEST_CASE("ibp_affine branch form") {
  SUBCASE("golden: W=[[1,-1]] over [0.4,0.6]^2") {
    Interval in{{0.4, 0.4}, {0.6, 0.6}};
    std::vector<float> W = {1.0f, -1.0f};
    std::vector<float> b = {0.0f};
    Interval out = ibp_affine(in, W, b);
    CHECK(out.lower[0] == doctest::Approx(-0.2));
    CHECK(out.upper[0] == doctest::Approx(0.2));
  }
  SUBCASE("degenerate input stays degenerate") {
    Interval in{{0.3, 0.7}, {0.3, 0.7}};
    std::vector<float> W = {0.5f, -1.5f, 2.0f, 0.0f};
    std::vector<float> b = {0.1f, -0.2f};
    Interval out = ibp_affine(in, W, b);
    CHECK(out.lower[0] == out.upper[0]);  // identical summation both sides
    CHECK(out.lower[1] == out.upper[1]);
  }
  SUBCASE("identity passes the interval through") {
    Interval in{{-1.0, 0.0}, {2.0, 0.5}};
    std::vector<float> W = {1, 0, 0, 1};
    std::vector<float> b = {0, 0};
    Interval out = ibp_affine(in, W, b);
    CHECK(out.lower == in.lower);
    CHECK(out.upper == in.upper);
  }
  SUBCASE("shape mismatch throws") {
    Interval in{{0.0}, {1.0}};
    std::vector<float> W = {1, 2, 3};
    std::vector<float> b = {0};
    CHECK_THROWS_AS((void)ibp_affine(in, W, b), std::invalid_argument);
  }
}

TEST_CASE("ibp_relu clamps the negative part") {
  Interval straddle = ibp_relu(Interval{{-1.0}, {2.0}});
  CHECK(straddle.lower[0] == 0.0);
  CHECK(straddle.upper[0] == 2.0);

  Interval positive = ibp_relu(Interval{{0.5}, {1.0}});
  CHECK(positive.lower[0] == 0.5);
  CHECK(positive.upper[0] == 1.0);

  Interval negative = ibp_relu(Interval{{-3.0}, {-1.0}});
  CHECK(negative.lower[0] == 0.0);
  CHECK(negative.upper[0] == 0.0);
}

TEST_CASE("sum_top_s") {
  std::vector<double> g = {3.0, 1.0, 2.0};
  CHECK(sum_top_s(g, 2) == 5.0);
  g = {3.0, 1.0, 2.0};
  CHECK(sum_top_s(g, 0) == 0.0);
  g = {3.0, 1.0, 2.0};
  CHECK(sum_top_s(g, 10) == 6.0);
  g.clear();
  CHECK(sum_top_s(g, 3) == 0.0);
}

TEST_CASE("l0_first_layer_bounds goldens (dyadic, exact)") {
  // z(x) = 0.5 + x0 - x1 at x = (0.25, 0.25) -> 0.5.
  std::vector<float> x = {0.25f, 0.25f};
  std::vector<float> W = {1.0f, -1.0f};
  std::vector<float> b = {0.5f};

  Interval s0 = l0_first_layer_bounds(x, W, b, 0);
  CHECK(s0.lower[0] == 0.5);
  CHECK(s0.upper[0] == 0.5);

  Interval s1 = l0_first_layer_bounds(x, W, b, 1);
  CHECK(s1.lower[0] == -0.25);
  CHECK(s1.upper[0] == 1.25);

  Interval s2 = l0_first_layer_bounds(x, W, b, 2);
  CHECK(s2.lower[0] == -0.5);
  CHECK(s2.upper[0] == 1.5);
}

TEST_CASE("l0 bounds with s = dim match the full [0,1] box") {
  Prng rng(91);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t d_in = 4, d_out = 3;
    std::vector<float> W(d_in * d_out), b(d_out), x(d_in);
    for (auto& v : W) v = float(rng.uniform(-2.0, 2.0));
    for (auto& v : b) v = float(rng.uniform(-1.0, 1.0));
    for (auto& v : x) v = float(rng.next_double());
    Interval box{std::vector<double>(d_in, 0.0), std::vector<double>(d_in, 1.0)};
    Interval want = ibp_affine(box, W, b);
    Interval got = l0_first_layer_bounds(x, W, b, d_in);
    for (std::size_t j = 0; j < d_out; ++j) {
      CHECK(std::abs(got.lower[j] - want.lower[j]) <= 1e-9);
      CHECK(std::abs(got.upper[j] - want.upper[j]) <= 1e-9);
    }
  }
}

TEST_CASE("l0 first-layer bounds are exact (brute force)") {
  Prng rng(17);
  for (int trial = 0; trial < 20; ++trial) {
    const std::size_t d_in = 3, d_out = 2;
    std::vector<float> W(d_in * d_out), b(d_out), x(d_in);
    for (auto& v : W) v = float(rng.uniform(-2.0, 2.0));
    for (auto& v : b) v = float(rng.uniform(-1.0, 1.0));
    for (auto& v : x) v = float(rng.next_double());
    for (std::uint32_t s = 0; s <= d_in; ++s) {
      Interval got = l0_first_layer_bounds(x, W, b, s);
      for (std::size_t j = 0; j < d_out; ++j) {
        auto [lo, hi] = brute_l0(x, W, b, s, j);
        CHECK(std::abs(got.lower[j] - lo) <= 1e-9);
        CHECK(std::abs(got.upper[j] - hi) <= 1e-9);
      }
    }
  }
}

TEST_CASE("zero-width regions collapse to the forward pass") {
  Prng rng(5);
  MlpModel m = random_model({3, 5, 4, 2}, 31);
  for (int t = 0; t < 5; ++t) {
    std::vector<float> x = random_point(3, rng);
    const std::vector<float> out = forward(m, x);
    for (RegionSpec spec : {RegionSpec{RegionKind::LInf, 0.0, 0},
                            RegionSpec{RegionKind::L0, 0.0, 0}}) {
      Interval iv = propagate(m, anchor(spec, x));
      for (std::size_t k = 0; k < out.size(); ++k) {
        CHECK(iv.lower[k] == iv.upper[k]);
        CHECK(iv.lower[k] == doctest::Approx(out[k]));
      }
    }
  }
}

TEST_CASE("interval propagation contains sampled perturbations") {
  Prng rng(23);
  for (int trial = 0; trial < 6; ++trial) {
    MlpModel m = random_model({4, 6, 5, 3}, 100 + trial, 1.5f);
    std::vector<float> x = random_point(4, rng);
    Region linf = anchor(RegionSpec{RegionKind::LInf, 0.08, 0}, x);
    check_containment(m, linf, propagate(m, linf), rng, 40);
    Region l0 = anchor(RegionSpec{RegionKind::L0, 0.0, 2}, x);
    check_containment(m, l0, propagate(m, l0), rng, 40);
  }
}

TEST_CASE("bounds widen monotonically with the region") {
  Prng rng(29);
  for (int trial = 0; trial < 5; ++trial) {
    MlpModel m = random_model({4, 6, 3}, 200 + trial, 1.5f);
    std::vector<float> x = random_point(4, rng);
    Interval small =
        propagate(m, anchor(RegionSpec{RegionKind::LInf, 0.02, 0}, x));
    Interval large =
        propagate(m, anchor(RegionSpec{RegionKind::LInf, 0.05, 0}, x));
    Interval s1 = propagate(m, anchor(RegionSpec{RegionKind::L0, 0.0, 1}, x));
    Interval s2 = propagate(m, anchor(RegionSpec{RegionKind::L0, 0.0, 2}, x));
    for (std::size_t k = 0; k < 3; ++k) {
      CHECK(large.lower[k] <= small.lower[k]);
      CHECK(large.upper[k] >= small.upper[k]);
      CHECK(s2.lower[k] <= s1.lower[k]);
      CHECK(s2.upper[k] >= s1.upper[k]);
    }
  }
}

TEST_CASE("crown_tighten") {
  SUBCASE("single affine layer returns the exact IBP result") {
    MlpModel m = make_model({2, 2}, {{1, -1, 0.5f, 0.5f}}, {{0, 0}});
    Region r = anchor(RegionSpec{RegionKind::LInf, 0.1, 0},
                      std::vector<float>{0.5f, 0.5f});
    Interval ibp = propagate(m, r);
    Interval crown = crown_tighten(m, r);
    CHECK(crown.lower == ibp.lower);
    CHECK(crown.upper == ibp.upper);
  }
  SUBCASE("cancellation golden: CROWN sees h1 - h2 = 0, IBP cannot") {
    // h1 = h2 = relu(x + 0.5), stable positive over x in [0,1].
    MlpModel m =
        make_model({1, 2, 1}, {{1, 1}, {1, -1}}, {{0.5f, 0.5f}, {0}});
    Region r =
        anchor(RegionSpec{RegionKind::LInf, 0.5, 0}, std::vector<float>{0.5f});
    Interval ibp = propagate(m, r);
    CHECK(ibp.lower[0] == -1.0);
    CHECK(ibp.upper[0] == 1.0);
    Interval crown = crown_tighten(m, r);
    CHECK(crown.lower[0] == 0.0);
    CHECK(crown.upper[0] == 0.0);
  }
  SUBCASE("never looser than IBP, still contains samples") {
    Prng rng(41);
    for (int trial = 0; trial < 6; ++trial) {
      MlpModel m = random_model({4, 6, 5, 3}, 300 + trial, 1.5f);
      std::vector<float> x = random_point(4, rng);
      for (Region r : {anchor(RegionSpec{RegionKind::LInf, 0.1, 0}, x),
                       anchor(RegionSpec{RegionKind::L0, 0.0, 2}, x)}) {
        Interval ibp = propagate(m, r);
        Interval crown = crown_tighten(m, r);
        for (std::size_t k = 0; k < 3; ++k) {
          CHECK(crown.lower[k] >= ibp.lower[k]);
          CHECK(crown.upper[k] <= ibp.upper[k]);
        }
        check_containment(m, r, crown, rng, 30);
      }
    }
  }
}

TEST_CASE("RegionSpec validation") {
  RegionSpec neg_eps{RegionKind::LInf, -0.1, 0};
  CHECK_THROWS_AS(neg_eps.validate(3), std::invalid_argument);
  RegionSpec nan_eps{RegionKind::LInf,
                     std::numeric_limits<double>::quiet_NaN(), 0};
  CHECK_THROWS_AS(nan_eps.validate(3), std::invalid_argument);
  RegionSpec s_too_big{RegionKind::L0, 0.0, 5};
  CHECK_THROWS_AS(s_too_big.validate(3), std::invalid_argument);
  RegionSpec s_full{RegionKind::L0, 0.0, 3};
  CHECK_NOTHROW(s_full.validate(3));
  RegionSpec eps_ok{RegionKind::LInf, 0.3, 0};
  CHECK_NOTHROW(eps_ok.validate(3));

  CHECK(region_kind_from_string("l0") == RegionKind::L0);
  CHECK(region_kind_from_string("linf") == RegionKind::LInf);
  CHECK_THROWS_AS((void)region_kind_from_string("l2"), config_error);
  CHECK(to_string(RegionKind::L0) == "l0");
  CHECK(to_string(RegionKind::LInf) == "linf");

  MlpModel m = random_model({3, 2}, 1);
  Region wrong_dim = anchor(RegionSpec{RegionKind::L0, 0.0, 1},
                            std::vector<float>{0.1f, 0.2f});
  CHECK_THROWS_AS((void)propagate(m, wrong_dim), std::invalid_argument);
}
