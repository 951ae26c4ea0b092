#include <catch2/catch_amalgamated.hpp>

#include "curio/nets.hpp"
#include "curio/rng.hpp"
#include "curio/tensor.hpp"

using namespace curio;

TEST_CASE("relu forward and mask") {
  Tape t;
  int x = t.leaf(Tensor({2}, {-1.0, 2.0}), true);
  int y = t.relu(x);
  REQUIRE(t.value(y)[0] == 0.0);
  REQUIRE(t.value(y)[1] == 2.0);
  int s = t.sum(y);
  t.backward(s);
  REQUIRE(t.grad(x)[0] == 0.0);
  REQUIRE(t.grad(x)[1] == 1.0);
}

TEST_CASE("l2_distance of identical vectors is zero") {
  Tape t;
  int x = t.leaf(Tensor({3}, {1.5, -2.0, 0.25}), false);
  REQUIRE(t.value(t.l2_distance(x, x))[0] == 0.0);
}

TEST_CASE("sqrt_abs of -4 is 2") {
  Tape t;
  int x = t.leaf(Tensor::scalar(-4.0), false);
  REQUIRE(t.value(t.sqrt_abs(x))[0] == 2.0);
}

TEST_CASE("gradient of x squared at 3") {
  auto build = [](Tape& t, const std::vector<int>& leaves) {
    return t.mul(leaves[0], leaves[0]);
  };
  const double err = gradient_check(build, {Tensor::scalar(3.0)});
  REQUIRE(err <= 1e-6);
  Tape t;
  int x = t.leaf(Tensor::scalar(3.0), true);
  int y = t.mul(x, x);
  t.backward(y);
  REQUIRE(t.grad(x)[0] == Catch::Approx(6.0).margin(1e-12));
}

TEST_CASE("gradient checks across the op set") {
  Rng rng(20240901);
  auto rand_vec = [&](int n) {
    Tensor t({n});
    // keep probes away from |x| < 1e-4 kinks of abs/relu
    for (auto& x : t.v) {
      x = rng.normal();
      if (std::fabs(x) < 1e-3) x += x < 0 ? -0.5 : 0.5;
    }
    return t;
  };

  SECTION("binary elementwise and reductions") {
    for (int probe = 0; probe < 100; ++probe) {
      const Tensor a = rand_vec(4), b = rand_vec(4);
      auto check = [&](auto f) {
        REQUIRE(gradient_check(f, {a, b}) <= 1e-4);
      };
      check([](Tape& t, const std::vector<int>& l) { return t.sum(t.add(l[0], l[1])); });
      check([](Tape& t, const std::vector<int>& l) { return t.sum(t.sub(l[0], l[1])); });
      check([](Tape& t, const std::vector<int>& l) { return t.sum(t.mul(l[0], l[1])); });
      check([](Tape& t, const std::vector<int>& l) { return t.dot(l[0], l[1]); });
      check([](Tape& t, const std::vector<int>& l) { return t.l2_distance(l[0], l[1]); });
      check([](Tape& t, const std::vector<int>& l) { return t.mse(l[0], l[1]); });
      check([](Tape& t, const std::vector<int>& l) { return t.sum(t.maximum(l[0], l[1])); });
      check([](Tape& t, const std::vector<int>& l) { return t.sum(t.minimum(l[0], l[1])); });
    }
  }

  SECTION("unary") {
    for (int probe = 0; probe < 100; ++probe) {
      const Tensor a = rand_vec(4);
      REQUIRE(gradient_check([](Tape& t, const std::vector<int>& l) {
                return t.sum(t.relu(l[0]));
              }, {a}) <= 1e-4);
      REQUIRE(gradient_check([](Tape& t, const std::vector<int>& l) {
                return t.sum(t.abs_op(l[0]));
              }, {a}) <= 1e-4);
      REQUIRE(gradient_check([](Tape& t, const std::vector<int>& l) {
                return t.sum(t.sqrt_abs(l[0]));
              }, {a}) <= 1e-4);
      REQUIRE(gradient_check([](Tape& t, const std::vector<int>& l) {
                return t.l2_norm(l[0]);
              }, {a}) <= 1e-4);
      REQUIRE(gradient_check([](Tape& t, const std::vector<int>& l) {
                return t.mean(l[0]);
              }, {a}) <= 1e-4);
    }
  }

  SECTION("softmax_nll both inputs") {
    for (int probe = 0; probe < 100; ++probe) {
      Tensor logits = rand_vec(5);
      Tensor target({5});
      target[static_cast<int>(rng.uniform_int(5))] = 1.0;
      REQUIRE(gradient_check([](Tape& t, const std::vector<int>& l) {
                return t.softmax_nll(l[0], l[1]);
              }, {logits, target}) <= 1e-4);
    }
  }

  SECTION("affine against finite differences") {
    for (int probe = 0; probe < 100; ++probe) {
      Tensor w = rand_vec(12);
      w.shape = {3, 4};
      const Tensor b = rand_vec(3), x = rand_vec(4), y = rand_vec(3);
      REQUIRE(gradient_check([](Tape& t, const std::vector<int>& l) {
                return t.l2_distance(t.affine(l[0], l[1], l[2]), l[3]);
              }, {w, b, x, y}) <= 1e-4);
    }
  }

  SECTION("conv2d against finite differences") {
    for (int probe = 0; probe < 20; ++probe) {
      Tensor k = rand_vec(2 * 2 * 3 * 3);
      k.shape = {2, 2, 3, 3};
      Tensor b = rand_vec(2);
      Tensor x = rand_vec(2 * 5 * 5);
      x.shape = {2, 5, 5};
      REQUIRE(gradient_check([](Tape& t, const std::vector<int>& l) {
                return t.l2_norm(t.reshape(t.conv2d(l[0], l[1], l[2], 2), {8}));
              }, {k, b, x}) <= 1e-4);
    }
  }
}

TEST_CASE("detach stops gradients exactly") {
  // f = detach(x) * x has gradient equal to the detached value
  Tape t;
  int x = t.leaf(Tensor::scalar(3.0), true);
  int y = t.mul(t.detach(x), x);
  t.backward(y);
  REQUIRE(t.grad(x)[0] == 3.0);

  Rng rng(7);
  for (int probe = 0; probe < 100; ++probe) {
    Tape t2;
    int a = t2.leaf(Tensor::scalar(rng.normal()), true);
    int out = t2.mul(t2.detach(a), t2.detach(a));
    t2.backward(out);
    REQUIRE(t2.grad(a).v.empty());
  }
}

TEST_CASE("softmax_nll matches direct evaluation") {
  Rng rng(99);
  for (int probe = 0; probe < 50; ++probe) {
    Tensor logits({4});
    for (auto& x : logits.v) x = rng.normal();
    const int cls = static_cast<int>(rng.uniform_int(4));
    Tensor target({4});
    target[cls] = 1.0;
    Tape t;
    const double got =
        t.value(t.softmax_nll(t.leaf(logits, false), t.leaf(target, false)))[0];
    double z = 0.0;
    for (double l : logits.v) z += std::exp(l);
    const double want = -std::log(std::exp(logits[cls]) / z);
    REQUIRE(got == Catch::Approx(want).margin(1e-10));
  }
}

TEST_CASE("adam single step matches the hand formula") {
  std::vector<Tensor> params = {Tensor::scalar(1.0)};
  std::vector<Tensor> grads = {Tensor::scalar(1.0)};
  AdamState st;
  st.init_like(params);
  adam_step(params, grads, st);
  // mhat = vhat = 1 after bias correction; theta' = 1 - lr/(1 + eps)
  const double want = 1.0 - 1e-3 * 1.0 / (1.0 + 1e-8);
  REQUIRE(params[0][0] == Catch::Approx(want).margin(1e-10));
  REQUIRE(params[0][0] == Catch::Approx(0.999).margin(1e-5));
}

TEST_CASE("adam is a no-op on zero gradients with zero moments") {
  std::vector<Tensor> params = {Tensor({3}, {1.0, -2.0, 0.5})};
  std::vector<Tensor> grads = {Tensor({3})};
  AdamState st;
  st.init_like(params);
  adam_step(params, grads, st);
  REQUIRE(params[0][0] == 1.0);
  REQUIRE(params[0][1] == -2.0);
  REQUIRE(params[0][2] == 0.5);
}

TEST_CASE("adam is deterministic") {
  auto run = [] {
    std::vector<Tensor> params = {Tensor({2}, {0.3, -0.7})};
    AdamState st;
    st.init_like(params);
    for (int i = 0; i < 5; ++i) {
      std::vector<Tensor> grads = {Tensor({2}, {0.1 * i, -0.2})};
      adam_step(params, grads, st);
    }
    return params[0];
  };
  const Tensor a = run(), b = run();
  REQUIRE(a.v == b.v);
}

TEST_CASE("init_network determinism and ensembles") {
  NetworkArch arch;
  arch.kind = NetworkArch::Kind::Mlp;
  arch.mlp = {8, 64, 32};
  const NetworkWeights w1 = init_network(arch, 42);
  const NetworkWeights w2 = init_network(arch, 42);
  REQUIRE(w1.params.size() == 6);
  REQUIRE(w1.params[0].shape == std::vector<int>{64, 8});
  REQUIRE(w1.params[2].shape == std::vector<int>{64, 64});
  REQUIRE(w1.params[4].shape == std::vector<int>{32, 64});
  for (size_t i = 0; i < w1.params.size(); ++i)
    REQUIRE(w1.params[i].v == w2.params[i].v);

  arch.ensemble = true;
  const NetworkWeights e = init_network(arch, 7);
  REQUIRE(e.params.size() == 30);
  const int per = e.params_per_member();
  for (int a = 0; a < 5; ++a)
    for (int b = a + 1; b < 5; ++b)
      REQUIRE(e.params[a * per].v != e.params[b * per].v);
}

TEST_CASE("weight snapshots round-trip") {
  NetworkArch arch;
  arch.kind = NetworkArch::Kind::Mlp;
  arch.mlp = {4, 64, 32};
  NetworkWeights w = init_network(arch, 5);
  std::stringstream ss;
  save_weights(w, ss);
  NetworkWeights w2 = init_network(arch, 99);
  load_weights(w2, ss);
  REQUIRE(w2.seed == 5);
  for (size_t i = 0; i < w.params.size(); ++i) REQUIRE(w.params[i].v == w2.params[i].v);
}
