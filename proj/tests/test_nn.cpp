#include <catch_amalgamated.hpp>

#include <cmath>
#include <filesystem>
#include <random>

#include "dirfocus/error.hpp"
#include "dirfocus/nn/checkpoint.hpp"
#include "dirfocus/nn/gradcheck.hpp"
#include "dirfocus/nn/optim.hpp"

using namespace dirfocus;
using namespace dirfocus::nn;
using Catch::Approx;

namespace {

Eigen::VectorXd normal(Index n, Rng& rng, double sd = 1.0) {
  std::normal_distribution<double> d(0.0, sd);
  Eigen::VectorXd v(n);
  for (auto& x : v) x = d(rng);
  return v;
}

Tensor random_tensor(const Shape& s, Rng& rng, bool grad = true) { return Tensor::from(s, normal(numel(s), rng), grad); }

// Contracts an output with fixed random weights so every output entry matters.
Tensor probe(const Tensor& out, std::uint64_t seed = 99) {
  Rng rng(seed);
  return sum(mul(out, Tensor::from(out.shape(), normal(out.size(), rng))));
}

void require_gradcheck(const std::function<Tensor()>& f, const std::vector<GradCheckTarget>& targets) {
  Rng rng(5);
  const auto r = gradcheck(f, targets, rng);
  INFO(r.worst);
  REQUIRE(r.points > 0);
  REQUIRE(r.max_rel_error < 1e-5);
}

// Direct nested-loop cross-correlation for up to three spatial axes.
Eigen::VectorXd loop_conv(const Tensor& x, const Tensor& w, const Tensor& b, Shape stride, Shape pad) {
  const auto& xs = x.shape();
  const auto& ws = w.shape();
  const std::size_t nd = xs.size() - 2;
  Shape D(3, 1), K(3, 1), S(3, 1), P(3, 0), O(3, 1);
  for (std::size_t i = 0; i < nd; ++i) {
    D[i] = xs[2 + i];
    K[i] = ws[2 + i];
    S[i] = stride[i];
    P[i] = pad[i];
    O[i] = (D[i] + 2 * P[i] - K[i]) / S[i] + 1;
  }
  const Index B = xs[0], Ci = xs[1], Co = ws[0];
  Eigen::VectorXd out = Eigen::VectorXd::Zero(B * Co * O[0] * O[1] * O[2]);
  auto xat = [&](Index bb, Index c, Index i, Index j, Index k) -> double {
    if (i < 0 || j < 0 || k < 0 || i >= D[0] || j >= D[1] || k >= D[2]) return 0.0;
    return x.value()[(((bb * Ci + c) * D[0] + i) * D[1] + j) * D[2] + k];
  };
  for (Index bb = 0; bb < B; ++bb)
    for (Index co = 0; co < Co; ++co)
      for (Index o0 = 0; o0 < O[0]; ++o0)
        for (Index o1 = 0; o1 < O[1]; ++o1)
          for (Index o2 = 0; o2 < O[2]; ++o2) {
            double acc = b.defined() ? b.value()[co] : 0.0;
            for (Index ci = 0; ci < Ci; ++ci)
              for (Index k0 = 0; k0 < K[0]; ++k0)
                for (Index k1 = 0; k1 < K[1]; ++k1)
                  for (Index k2 = 0; k2 < K[2]; ++k2)
                    acc += w.value()[(((co * Ci + ci) * K[0] + k0) * K[1] + k1) * K[2] + k2] *
                           xat(bb, ci, o0 * S[0] - P[0] + k0, o1 * S[1] - P[1] + k1, o2 * S[2] - P[2] + k2);
            out[(((bb * Co + co) * O[0] + o0) * O[1] + o1) * O[2] + o2] = acc;
          }
  return out;
}

}  // namespace

TEST_CASE("sum backward gives ones", "[nn]") {
  auto x = Tensor::from({2, 3}, Eigen::VectorXd::LinSpaced(6, -1, 1), true);
  backward(sum(x));
  REQUIRE(x.grad().isApprox(Eigen::VectorXd::Ones(6)));
}

TEST_CASE("backward without a recorded graph throws", "[nn]") {
  REQUIRE_THROWS_AS(backward(Tensor()), ParameterError);
  auto x = Tensor::from({2}, Eigen::VectorXd::Ones(2), false);
  REQUIRE_THROWS_AS(backward(sum(x)), ParameterError);
  auto y = Tensor::from({2}, Eigen::VectorXd::Ones(2), true);
  REQUIRE_THROWS_AS(backward(scale(y, 2)), ShapeError);
  {
    NoGradGuard guard;
    REQUIRE_THROWS_AS(backward(sum(y)), ParameterError);
  }
}

TEST_CASE("conv hand example and identity", "[nn][conv]") {
  auto x = Tensor::from({1, 1, 4}, Eigen::Vector4d(1, 2, 3, 4));
  auto k = Tensor::from({1, 1, 2}, Eigen::Vector2d(1, 1));
  auto y = conv(x, k, Tensor());
  REQUIRE(y.shape() == Shape{1, 1, 3});
  REQUIRE(y.value().isApprox(Eigen::Vector3d(3, 5, 7)));

  Rng rng(1);
  auto img = random_tensor({2, 1, 5, 6}, rng, false);
  auto one = Tensor::from({1, 1, 1, 1}, Eigen::VectorXd::Ones(1));
  auto zero_bias = Tensor::from({1}, Eigen::VectorXd::Zero(1));
  REQUIRE(conv(img, one, zero_bias).value() == img.value());
}

TEST_CASE("conv matches a nested-loop reference", "[nn][conv]") {
  Rng rng(2);
  struct Case {
    Shape x, w, stride, pad;
  };
  const std::vector<Case> cases = {
      {{2, 3, 11}, {4, 3, 3}, {1}, {0}},
      {{2, 3, 11}, {4, 3, 4}, {2}, {1}},
      {{1, 2, 1}, {2, 2, 3}, {1}, {1}},
      {{2, 1, 2}, {1, 1, 5}, {3}, {2}},
      {{1, 2, 3, 4, 7}, {2, 2, 2, 3, 4}, {2, 1, 3}, {2, 1, 2}},
      {{2, 2, 5, 9}, {3, 2, 2, 3}, {1, 2}, {1, 0}},
      {{1, 2, 4, 5, 7}, {3, 2, 3, 3, 2}, {1, 1, 2}, {1, 1, 0}},
  };
  for (const auto& c : cases) {
    auto x = random_tensor(c.x, rng, false);
    auto w = random_tensor(c.w, rng, false);
    auto b = random_tensor({c.w[0]}, rng, false);
    auto y = conv(x, w, b, c.stride, c.pad);
    const auto ref = loop_conv(x, w, b, c.stride, c.pad);
    REQUIRE(y.size() == ref.size());
    REQUIRE((y.value() - ref).cwiseAbs().maxCoeff() < 1e-12);
    for (std::size_t i = 0; i < c.stride.size(); ++i)
      REQUIRE(y.shape()[2 + i] == (c.x[2 + i] + 2 * c.pad[i] - c.w[2 + i]) / c.stride[i] + 1);
  }
}

TEST_CASE("conv shape errors name both shapes", "[nn][conv]") {
  Rng rng(3);
  auto x = random_tensor({1, 3, 8}, rng);
  auto w = random_tensor({2, 4, 3}, rng);
  try {
    conv(x, w, Tensor());
    FAIL("expected ShapeError");
  } catch (const ShapeError& e) {
    const std::string msg = e.what();
    REQUIRE(msg.find("[1, 3, 8]") != std::string::npos);
    REQUIRE(msg.find("[2, 4, 3]") != std::string::npos);
  }
  REQUIRE_THROWS_AS(conv(x, random_tensor({2, 3, 9}, rng), Tensor()), ShapeError);
}

TEST_CASE("batch norm statistics", "[nn][bn]") {
  Rng rng(4);
  ParameterStore store;
  BatchNorm bn(store, "bn", 3);
  auto x = random_tensor({256, 3, 20}, rng, false);
  auto y = bn.forward(x, true);
  for (Index c = 0; c < 3; ++c) {
    double s = 0, s2 = 0;
    Index n = 0;
    for (Index b = 0; b < 256; ++b)
      for (Index t = 0; t < 20; ++t) {
        const double v = y.value()[(b * 3 + c) * 20 + t];
        s += v;
        s2 += v * v;
        ++n;
      }
    REQUIRE(std::abs(s / n) < 0.05);
    REQUIRE(std::abs(s2 / n - (s / n) * (s / n) - 1.0) < 0.05);
  }
  REQUIRE(bn.running_mean.value().cwiseAbs().maxCoeff() < 0.02);

  // Constant channel collapses to beta.
  bn.beta.value() = Eigen::Vector3d(0.5, -1, 2);
  auto constant = Tensor::from({4, 3, 5}, Eigen::VectorXd::Constant(60, 7.0));
  auto yc = bn.forward(constant, true);
  for (Index i = 0; i < 60; ++i) REQUIRE(yc.value()[i] == Approx(bn.beta.value()[(i / 5) % 3]).margin(1e-9));

  auto a = bn.forward(x, false);
  auto b = bn.forward(x, false);
  REQUIRE(a.value() == b.value());
}

TEST_CASE("batch norm running estimates", "[nn][bn]") {
  Rng rng(6);
  ParameterStore store;
  BatchNorm bn(store, "bn", 2, 0.1);
  auto x = random_tensor({3, 2, 4}, rng, false);
  bn.forward(x, true);
  for (Index c = 0; c < 2; ++c) {
    std::vector<double> v;
    for (Index b = 0; b < 3; ++b)
      for (Index t = 0; t < 4; ++t) v.push_back(x.value()[(b * 2 + c) * 4 + t]);
    double m = 0;
    for (double e : v) m += e;
    m /= v.size();
    double var = 0;
    for (double e : v) var += (e - m) * (e - m);
    var /= (v.size() - 1);
    REQUIRE(bn.running_mean.value()[c] == Approx(0.1 * m).margin(1e-12));
    REQUIRE(bn.running_var.value()[c] == Approx(0.9 + 0.1 * var).margin(1e-12));
  }
}

TEST_CASE("softmax, pooling and concat basics", "[nn]") {
  const auto p = softmax_rows(Eigen::MatrixXd::Zero(3, 14));
  REQUIRE((p.array() - 1.0 / 14).abs().maxCoeff() < 1e-15);

  Rng rng(7);
  const auto q = softmax_rows(Eigen::MatrixXd::Random(5, 9) * 30);
  for (Index r = 0; r < 5; ++r) REQUIRE(std::abs(q.row(r).sum() - 1.0) < 1e-12);

  auto c = Tensor::from({2, 3, 12}, Eigen::VectorXd::Constant(72, 1.75));
  auto pooled = avg_pool_last(c, 4, 4);
  REQUIRE(pooled.shape() == Shape{2, 3, 3});
  REQUIRE((pooled.value().array() - 1.75).abs().maxCoeff() < 1e-15);
  auto ramp = Tensor::from({1, 7}, Eigen::VectorXd::LinSpaced(7, 0, 6));
  REQUIRE(avg_pool_last(ramp, 3, 3).value() == Eigen::Vector2d(1, 4));
  REQUIRE(avg_pool_last(ramp, 3, 3, true).value() == Eigen::Vector3d(1, 4, 6));

  auto z = random_tensor({2, 4, 5, 30}, rng, false);
  auto slice = random_tensor({2, 4, 5, 1}, rng, false);
  auto zz = concat_last(z, slice);
  REQUIRE(zz.shape() == Shape{2, 4, 5, 31});
  REQUIRE(zz.value()[30] == slice.value()[0]);
  REQUIRE(zz.value()[0] == z.value()[0]);
  REQUIRE_THROWS_AS(concat_last(z, random_tensor({2, 4, 6, 1}, rng)), ShapeError);
}

TEST_CASE("cross entropy is non-negative and zero only at a confident match", "[nn]") {
  Rng rng(8);
  auto logits = random_tensor({6, 4}, rng, false);
  const auto ce = softmax_cross_entropy(logits, {0, 1, 2, 3, 0, 1});
  REQUIRE(ce.loss.item() > 0);
  Eigen::VectorXd sharp = Eigen::VectorXd::Zero(8);
  sharp[1] = 800;
  sharp[4 + 2] = 800;
  const auto near_one_hot = softmax_cross_entropy(Tensor::from({2, 4}, sharp), {1, 2});
  REQUIRE(near_one_hot.loss.item() >= 0.0);
  REQUIRE(near_one_hot.loss.item() < 1e-12);
  REQUIRE_THROWS_AS(softmax_cross_entropy(logits, {0, 1}), ShapeError);
  REQUIRE_THROWS_AS(softmax_cross_entropy(logits, {0, 1, 2, 3, 4, 0}), ParameterError);
}

TEST_CASE("finite-difference gradients of every layer", "[nn][gradcheck]") {
  Rng rng(10);
  SECTION("elementwise and reductions") {
    auto a = random_tensor({3, 4}, rng), b = random_tensor({3, 4}, rng);
    require_gradcheck([&] { return probe(add(mul(a, b), scale(a, -0.3))); }, {{"a", a}, {"b", b}});
    require_gradcheck([&] { return mean(mul(a, a)); }, {{"a", a}});
    require_gradcheck([&] { return probe(relu(reshape(a, {2, 6}))); }, {{"a", a}});
  }
  SECTION("linear") {
    auto x = random_tensor({5, 7}, rng), w = random_tensor({3, 7}, rng), b = random_tensor({3}, rng);
    require_gradcheck([&] { return probe(linear(x, w, b)); }, {{"x", x}, {"w", w}, {"b", b}});
  }
  SECTION("conv 1-D, 2-D and 3-D") {
    auto x1 = random_tensor({2, 3, 10}, rng), w1 = random_tensor({2, 3, 3}, rng), b1 = random_tensor({2}, rng);
    require_gradcheck([&] { return probe(conv(x1, w1, b1, {2}, {1})); }, {{"x", x1}, {"w", w1}, {"b", b1}});
    auto x2 = random_tensor({2, 1, 5, 8}, rng), w2 = random_tensor({3, 1, 5, 3}, rng);
    require_gradcheck([&] { return probe(conv(x2, w2, Tensor())); }, {{"x", x2}, {"w", w2}});
    auto x3 = random_tensor({2, 1, 3, 4, 9}, rng), w3 = random_tensor({2, 1, 3, 3, 4}, rng), b3 = random_tensor({2}, rng);
    require_gradcheck([&] { return probe(conv(x3, w3, b3, {}, {1, 1, 0})); }, {{"x", x3}, {"w", w3}, {"b", b3}});
  }
  SECTION("batch norm in both modes") {
    ParameterStore store;
    BatchNorm bn(store, "bn", 3);
    bn.gamma.value() = normal(3, rng);
    bn.beta.value() = normal(3, rng);
    auto x = random_tensor({4, 3, 6}, rng);
    require_gradcheck([&] { return probe(bn.forward(x, true)); }, {{"x", x}, {"gamma", bn.gamma}, {"beta", bn.beta}});
    require_gradcheck([&] { return probe(bn.forward(x, false)); }, {{"x", x}, {"gamma", bn.gamma}, {"beta", bn.beta}});
  }
  SECTION("pooling, concat, flatten and cross entropy") {
    auto x = random_tensor({2, 3, 13}, rng), y = random_tensor({2, 3, 1}, rng);
    require_gradcheck([&] { return probe(flatten(avg_pool_last(concat_last(x, y), 4, 3))); }, {{"x", x}, {"y", y}});
    require_gradcheck([&] { return probe(avg_pool_last(concat_last(x, y), 4, 4, true)); }, {{"x", x}, {"y", y}});
    auto logits = random_tensor({5, 14}, rng);
    require_gradcheck([&] { return softmax_cross_entropy(logits, {0, 3, 13, 7, 3}).loss; }, {{"logits", logits}});
  }
}

TEST_CASE("gradcheck detects a wrong gradient", "[nn][gradcheck]") {
  Rng rng(11);
  auto x = random_tensor({6}, rng);
  auto wrong_square = [&] {
    auto out = make_result({}, Eigen::VectorXd::Constant(1, x.value().squaredNorm()), {x}, [](Node& n) {
      n.parents[0]->grad_buffer() += n.grad[0] * n.parents[0]->value;  // missing factor 2
    });
    return out;
  };
  Rng check_rng(1);
  REQUIRE(gradcheck(wrong_square, {{"x", x}}, check_rng).max_rel_error > 0.4);
}

TEST_CASE("adam update rules", "[nn][adam]") {
  SECTION("zero learning rate leaves parameters unchanged") {
    auto w = Tensor::from({3}, Eigen::Vector3d(1, -2, 3), true);
    Adam opt({w}, 0.0, 0.1);
    backward(sum(mul(w, w)));
    opt.step();
    REQUIRE(w.value() == Eigen::Vector3d(1, -2, 3));
  }
  SECTION("constant gradient moves against its sign") {
    auto w = Tensor::from({2}, Eigen::Vector2d(0.5, 0.5), true);
    Adam opt({w}, 0.01, 0.0);
    const Eigen::Vector2d g(2.0, -3.0);
    for (int i = 0; i < 50; ++i) {
      opt.zero_grad();
      backward(sum(mul(w, Tensor::from({2}, g))));
      opt.step();
    }
    REQUIRE(w.value()[0] < 0.5);
    REQUIRE(w.value()[1] > 0.5);
    // A constant gradient gives a step of lr per iteration.
    REQUIRE(w.value()[0] == Approx(0.5 - 50 * 0.01).margin(1e-6));
  }
  SECTION("pure L2 decay shrinks the norm strictly") {
    auto w = Tensor::from({3}, Eigen::Vector3d(1.5, -0.7, 0.2), true);
    Adam opt({w}, 0.001, 0.1);
    double prev = w.value().norm();
    for (int i = 0; i < 200; ++i) {
      opt.zero_grad();
      w.node().grad_buffer();
      opt.step();
      const double now = w.value().norm();
      REQUIRE(now < prev);
      prev = now;
    }
  }
  SECTION("quadratic bowl converges to the closed-form minimum") {
    // f(w) = 0.5 w^T A w - c^T w, minimum at A^{-1} c.
    Eigen::Matrix2d A;
    A << 3, 0.5, 0.5, 1;
    const Eigen::Vector2d c(1, -2);
    const Eigen::Vector2d target = A.ldlt().solve(c);
    auto w = Tensor::from({2}, Eigen::Vector2d(4, 4), true);
    Adam opt({w}, 0.05, 0.0);
    int steps = 0;
    for (; steps < 5000; ++steps) {
      opt.zero_grad();
      w.node().grad_buffer() = A * w.value() - c;
      opt.step();
      if ((w.value() - target).norm() < 1e-6 && (A * w.value() - c).norm() < 1e-6) break;
    }
    REQUIRE(steps < 5000);
    REQUIRE((w.value() - target).norm() < 1e-6);
  }
}

TEST_CASE("plateau scheduler and early stopping", "[nn]") {
  PlateauScheduler sched(3, 0.5);
  REQUIRE(sched.observe(1.0) == 1.0);
  REQUIRE(sched.observe(1.1) == 1.0);
  REQUIRE(sched.observe(1.0) == 1.0);
  REQUIRE(sched.observe(1.2) == 0.5);
  REQUIRE(sched.observe(0.9) == 1.0);

  EarlyStopping stop(2);
  REQUIRE(stop.observe(0.5));
  REQUIRE_FALSE(stop.observe(0.5));
  REQUIRE_FALSE(stop.should_stop());
  REQUIRE_FALSE(stop.observe(0.4));
  REQUIRE(stop.should_stop());
  REQUIRE(stop.best() == 0.5);

  TrainConfig cfg;
  REQUIRE_NOTHROW(cfg.validate());
  cfg.lr_decay = 1.5;
  REQUIRE_THROWS(cfg.validate());
}

TEST_CASE("checkpoint round trip", "[nn]") {
  Rng rng(12);
  ParameterStore a;
  Linear fc(a, "fc", 4, 3, rng);
  BatchNorm bn(a, "bn", 3);
  bn.running_mean.value() = normal(3, rng);
  const auto dir = std::filesystem::temp_directory_path() / "dirfocus_test_ckpt";
  std::filesystem::create_directories(dir);
  save_checkpoint(a, dir / "model");

  ParameterStore b;
  Rng other(13);
  Linear fc2(b, "fc", 4, 3, other);
  BatchNorm bn2(b, "bn", 3);
  REQUIRE(fc2.weight.value() != fc.weight.value());
  load_checkpoint(b, dir / "model");
  for (std::size_t i = 0; i < a.entries().size(); ++i) REQUIRE(a.entries()[i].tensor.value() == b.entries()[i].tensor.value());

  ParameterStore c;
  Linear wrong(c, "fc", 5, 3, other);
  BatchNorm bn3(c, "bn", 3);
  REQUIRE_THROWS_AS(load_checkpoint(c, dir / "model"), DataError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("training steps are deterministic", "[nn]") {
  auto run = [] {
    Rng rng(21);
    ParameterStore store;
    Linear l1(store, "l1", 6, 5, rng), l2(store, "l2", 5, 3, rng);
    Adam opt(store.trainable(), 0.01, 1e-4);
    auto x = random_tensor({8, 6}, rng, false);
    for (int i = 0; i < 20; ++i) {
      opt.zero_grad();
      backward(softmax_cross_entropy(l2.forward(relu(l1.forward(x))), {0, 1, 2, 0, 1, 2, 0, 1}).loss);
      opt.step();
    }
    return l2.weight.value();
  };
  REQUIRE(run() == run());
}
