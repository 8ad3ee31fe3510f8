#include <doctest.h>

#include <cmath>
#include <fstream>

#include "helpers.hpp"
#include "pecan/errors.hpp"
#include "pecan/mlp.hpp"

using namespace pecan;
using testutil::TempDir;
using testutil::make_model;

TEST_CASE("init_model determinism, shapes, and Glorot range") {
  MlpModel a = init_model({2, 3, 2}, 77);
  MlpModel b = init_model({2, 3, 2}, 77);
  REQUIRE(a.weights.size() == 2);
  CHECK(a.weights[0].size() == 6);  // 3x2
  CHECK(a.weights[1].size() == 6);  // 2x3
  CHECK(a.weights == b.weights);
  CHECK(a.biases == b.biases);

  for (float v : a.biases[0]) CHECK(v == 0.0f);
  for (float v : a.biases[1]) CHECK(v == 0.0f);

  const float bound0 = std::sqrt(6.0f / (2 + 3));
  for (float v : a.weights[0]) {
    CHECK(v >= -bound0);
    CHECK(v <= bound0);
  }

  MlpModel c = init_model({2, 3, 2}, 78);
  CHECK(a.weights != c.weights);
}

TEST_CASE("forward composes affine and ReLU") {
  SUBCASE("identity single layer") {
    MlpModel m = make_model({2, 2}, {{1, 0, 0, 1}}, {{0, 0}});
    auto out = forward(m, std::vector<float>{0.3f, 0.7f});
    CHECK(out[0] == 0.3f);
    CHECK(out[1] == 0.7f);
  }
  SUBCASE("W=[[1,-1]], b=[0.5]") {
    MlpModel m = make_model({2, 1}, {{1, -1}}, {{0.5f}});
    auto out = forward(m, std::vector<float>{0.25f, 0.25f});
    CHECK(out[0] == 0.5f);
  }
  SUBCASE("hidden ReLU clamps negatives, output layer does not") {
    // Hidden pre-activation -1 -> 0 after ReLU.
    MlpModel m = make_model({1, 1, 1}, {{1}, {1}}, {{-2.0f}, {-3.0f}});
    auto out = forward(m, std::vector<float>{1.0f});
    CHECK(out[0] == -3.0f);  // ReLU(1-2)=0, then 0*1-3
  }
  SUBCASE("dimension mismatch") {
    MlpModel m = make_model({2, 1}, {{1, -1}}, {{0}});
    CHECK_THROWS_AS((void)forward(m, std::vector<float>{1.0f}),
                    std::invalid_argument);
  }
}

TEST_CASE("argmax breaks ties toward the smaller index") {
  CHECK(argmax_label(std::vector<float>{0.3f, 0.3f, 0.1f}) == 0);
  CHECK(argmax_label(std::vector<float>{0.0f, 1.0f}) == 1);
  CHECK(argmax_label(std::vector<float>{0.5f, 0.5f, 0.5f}) == 0);
}

TEST_CASE("cross_entropy golden values and stability") {
  // Uniform logits over 10 classes: ln 10.
  std::vector<double> uniform(10, 0.7);
  CHECK(cross_entropy(uniform, 3) == doctest::Approx(2.302585092994046));

  // Stabilized: huge logit gap must not overflow.
  std::vector<double> big = {1000.0, 0.0};
  double loss = cross_entropy(big, 0);
  CHECK(std::isfinite(loss));
  CHECK(loss == doctest::Approx(0.0));

  std::vector<double> pair = {0.0, 0.6};
  CHECK(cross_entropy(pair, 0) == doctest::Approx(1.0374879504858856));
  CHECK(cross_entropy(pair, 1) == doctest::Approx(0.4374879504858857));
}

TEST_CASE("sentinel model predicts class 0 everywhere") {
  MlpModel s = make_sentinel({3, 4, 2});
  CHECK(s.sentinel);
  auto out = forward(s, std::vector<float>{0.1f, 0.2f, 0.3f});
  CHECK(out[0] == 0.0f);
  CHECK(out[1] == 0.0f);
  CHECK(predict(s, std::vector<float>{0.9f, 0.9f, 0.9f}) == 0);
}

TEST_CASE("model file round trip is bitwise") {
  TempDir tmp;
  MlpModel m = init_model({4, 7, 3}, 123);
  save_model(m, tmp / "m.pecn");
  MlpModel back = load_model(tmp / "m.pecn");
  CHECK(back.layer_dims == m.layer_dims);
  CHECK(back.weights == m.weights);
  CHECK(back.biases == m.biases);
  CHECK(back.sentinel == m.sentinel);

  MlpModel s = make_sentinel({2, 2});
  save_model(s, tmp / "s.pecn");
  CHECK(load_model(tmp / "s.pecn").sentinel);
}

TEST_CASE("model file rejects corruption") {
  TempDir tmp;
  MlpModel m = init_model({2, 2}, 1);
  save_model(m, tmp / "m.pecn");

  auto slurp = [&tmp]() {
    std::ifstream in(tmp / "m.pecn", std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  auto spit = [&tmp](const std::string& bytes) {
    std::ofstream out(tmp / "bad.pecn", std::ios::binary | std::ios::trunc);
    out.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  };

  std::string good = slurp();

  SUBCASE("bad magic") {
    std::string bad = good;
    bad[0] = 'X';
    spit(bad);
    CHECK_THROWS_AS((void)load_model(tmp / "bad.pecn"), format_error);
  }
  SUBCASE("truncation") {
    spit(good.substr(0, good.size() - 3));
    CHECK_THROWS_AS((void)load_model(tmp / "bad.pecn"), format_error);
  }
  SUBCASE("trailing garbage") {
    spit(good + "zz");
    CHECK_THROWS_AS((void)load_model(tmp / "bad.pecn"), format_error);
  }
  SUBCASE("missing file") {
    CHECK_THROWS_AS((void)load_model(tmp / "nope.pecn"), io_error);
  }
}
