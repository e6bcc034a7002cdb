#include "doctest.h"

#include <cmath>
#include <functional>

#include "tagfont/common/errors.hpp"
#include "tagfont/nn/checkpoint.hpp"
#include "tagfont/nn/layers.hpp"
#include "tagfont/nn/optim.hpp"
#include "tagfont/recognizer/model.hpp"
#include "test_util.hpp"

using namespace tagfont;
using nn::Scalar;
using nn::Tensor;

namespace {

// Checks d(sum(w * f(x)))/dparam for every parameter entry in `params` and
// every input entry against central differences.
template <typename Forward, typename Backward>
void check_layer(Tensor x, nn::ParameterList params, Forward fwd, Backward bwd, double tol,
                 nn::Rng& rng) {
  Tensor y = fwd(x);
  Tensor w = testutil::random_tensor(y.shape(), rng);
  auto objective = [&](const Tensor& in) {
    Tensor out = fwd(in);
    Scalar s = 0;
    for (std::size_t i = 0; i < out.size(); ++i) s += out[i] * w[i];
    return s;
  };
  nn::zero_grads(params);
  fwd(x);
  Tensor dx = bwd(w);
  const double h = 1e-5;
  for (std::size_t i = 0; i < x.size(); ++i) {
    Tensor xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    const double fd = (objective(xp) - objective(xm)) / (2 * h);
    CHECK(testutil::rel_err(dx[i], fd) < tol);
  }
  for (auto* p : params) {
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const Scalar keep = p->value[i];
      p->value[i] = keep + h;
      const double fp = objective(x);
      p->value[i] = keep - h;
      const double fm = objective(x);
      p->value[i] = keep;
      CHECK(testutil::rel_err(p->grad[i], (fp - fm) / (2 * h)) < tol);
    }
  }
}

}  // namespace

TEST_CASE("conv2d gradients match finite differences") {
  nn::Rng rng(11);
  for (auto [k, s, p] : {std::tuple{3, 1, 1}, {4, 2, 1}, {3, 2, 1}, {1, 1, 0}}) {
    nn::Conv2d conv("c", 2, 3, k, s, p);
    conv.init_he(rng);
    for (auto& v : conv.bias().value.values()) v = std::normal_distribution<>(0, 0.3)(rng);
    nn::ParameterList params;
    conv.collect(params);
    check_layer(testutil::random_tensor({2, 2, 6, 6}, rng), params,
                [&](const Tensor& x) { return conv.forward(x); },
                [&](const Tensor& g) { return conv.backward(g); }, 1e-6, rng);
  }
}

TEST_CASE("linear, activations and pooling gradients") {
  nn::Rng rng(12);
  nn::Linear lin("l", 5, 4);
  lin.init_he(rng);
  nn::ParameterList params;
  lin.collect(params);
  check_layer(testutil::random_tensor({3, 5}, rng), params,
              [&](const Tensor& x) { return lin.forward(x); },
              [&](const Tensor& g) { return lin.backward(g); }, 1e-6, rng);

  nn::Sigmoid sig;
  check_layer(testutil::random_tensor({2, 7}, rng), {}, [&](const Tensor& x) { return sig.forward(x); },
              [&](const Tensor& g) { return sig.backward(g); }, 1e-6, rng);
  nn::LeakyReLU lrelu;
  check_layer(testutil::random_tensor({2, 7}, rng), {},
              [&](const Tensor& x) { return lrelu.forward(x); },
              [&](const Tensor& g) { return lrelu.backward(g); }, 1e-6, rng);
  nn::Upsample2x up;
  check_layer(testutil::random_tensor({1, 2, 3, 3}, rng), {},
              [&](const Tensor& x) { return up.forward(x); },
              [&](const Tensor& g) { return up.backward(g); }, 1e-6, rng);
  nn::GlobalAvgPool gap;
  check_layer(testutil::random_tensor({2, 3, 4, 4}, rng), {},
              [&](const Tensor& x) { return gap.forward(x); },
              [&](const Tensor& g) { return gap.backward(g); }, 1e-6, rng);
}

TEST_CASE("residual block gradients") {
  nn::Rng rng(13);
  nn::ResidualBlock block("b", 2);
  block.init(rng);
  nn::ParameterList params;
  block.collect(params);
  check_layer(testutil::random_tensor({1, 2, 5, 5}, rng), params,
              [&](const Tensor& x) { return block.forward(x); },
              [&](const Tensor& g) { return block.backward(g); }, 1e-5, rng);
}

TEST_CASE("backbone parameter gradients") {
  nn::Rng rng(14);
  recognizer::BackboneConfig cfg;
  cfg.input_size = 8;
  cfg.widths = {2, 3};
  cfg.feature_dim = 4;
  recognizer::Backbone bb(cfg, "bb");
  bb.init(rng);
  nn::ParameterList params;
  bb.collect(params);
  Tensor x = testutil::random_tensor({2, 1, 8, 8}, rng);
  Tensor y = bb.forward(x);
  Tensor w = testutil::random_tensor(y.shape(), rng);
  auto objective = [&] {
    Tensor out = bb.forward(x);
    Scalar s = 0;
    for (std::size_t i = 0; i < out.size(); ++i) s += out[i] * w[i];
    return s;
  };
  nn::zero_grads(params);
  bb.forward(x);
  bb.backward(w);
  // A probe can straddle a ReLU kink somewhere in the stack; allow a tiny
  // fraction of such entries.
  const double h = 1e-5;
  int bad = 0, total = 0;
  for (auto* p : params) {
    for (std::size_t i = 0; i < p->value.size(); ++i) {
      const Scalar keep = p->value[i];
      p->value[i] = keep + h;
      const double fp = objective();
      p->value[i] = keep - h;
      const double fm = objective();
      p->value[i] = keep;
      bad += testutil::rel_err(p->grad[i], (fp - fm) / (2 * h)) > 1e-4;
      ++total;
    }
  }
  CHECK(bad <= total / 100);
}

TEST_CASE("dropout is identity at inference and inverted when training") {
  nn::Rng rng(1);
  nn::Dropout drop(0.5);
  Tensor x({1, 1000}, 1.0);
  Tensor y = drop.forward(x, false, rng);
  CHECK(y.values()[0] == 1.0);
  y = drop.forward(x, true, rng);
  double sum = 0;
  for (auto v : y.values()) {
    CHECK((v == 0.0 || v == 2.0));
    sum += v;
  }
  CHECK(sum / 1000 == doctest::Approx(1.0).epsilon(0.15));
}

TEST_CASE("adam only moves parameters it owns") {
  nn::Parameter a("a", Tensor({3}, 1.0)), b("b", Tensor({3}, 1.0));
  a.grad.fill(1.0);
  b.grad.fill(1.0);
  nn::Adam opt({&a}, 0.1);
  opt.step();
  CHECK(a.value[0] == doctest::Approx(0.9));
  CHECK(b.value[0] == 1.0);
}

TEST_CASE("checkpoint round trip is byte stable") {
  nn::Checkpoint ck;
  nn::Parameter p("w", Tensor({2, 3}));
  for (std::size_t i = 0; i < 6; ++i) p.value[i] = 0.1 * static_cast<double>(i) - 0.2;
  ck.put({&p}, "m/");
  ck.set_text("cfg", "{\"x\":1}");
  const std::string bytes = ck.serialize();
  const nn::Checkpoint back = nn::Checkpoint::deserialize(bytes);
  CHECK(back.serialize() == bytes);
  nn::Parameter q("w", Tensor({2, 3}));
  back.get({&q}, "m/");
  for (std::size_t i = 0; i < 6; ++i) CHECK(q.value[i] == p.value[i]);
  CHECK(back.text("cfg") == "{\"x\":1}");

  nn::Parameter wrong("w", Tensor({3, 2}));
  CHECK_THROWS_AS(back.get({&wrong}, "m/"), FormatError);
  CHECK_THROWS_AS(nn::Checkpoint::deserialize("XXXX" + bytes.substr(4)), FormatError);
}
