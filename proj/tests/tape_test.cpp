#include "doctest.h"

#include <cmath>
#include <cstring>
#include <stdexcept>

#include "dapt/gradcheck.hpp"
#include "dapt/rng.hpp"
#include "dapt/tape.hpp"

using namespace dapt;

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng, double lo = -1.0, double hi = 1.0) {
  Tensor t = Tensor::zeros(std::move(shape));
  for (double& v : t.data) v = rng.uniform(lo, hi);
  return t;
}

// Checks d(sum(w .* op(x)))/dx against central differences for a random
// probe w, exercising the full Jacobian action of the op.
double op_gradcheck(const std::function<Tensor(Tape&, const Tensor&)>& op, const Tensor& x0,
                    std::uint64_t seed, double eps = 1e-5) {
  Rng rng(seed);
  Tensor probe;  // filled after first forward, fixed thereafter
  bool probe_ready = false;

  auto build = [&](const std::vector<double>& theta, Tape& tape, Tensor& scalar_out, Tensor& leaf_out) {
    Tensor x = Tensor(x0.shape, theta);
    leaf_out = tape.leaf(x);
    Tensor y = op(tape, leaf_out);
    if (!probe_ready) {
      probe = random_tensor(y.shape, rng);
      probe_ready = true;
    }
    Tensor w = tape.constant(probe);
    scalar_out = tape.sum_all(tape.mul(y, w));
  };

  Tape tape;
  Tensor s, leaf;
  build(x0.data, tape, s, leaf);
  tape.backward(s);
  Tensor analytic = tape.grad_of(leaf);

  auto f = [&](const std::vector<double>& theta) {
    Tape t;
    Tensor sc, lf;
    build(theta, t, sc, lf);
    return sc.item();
  };
  return finite_diff_check(f, x0.data, analytic.data, eps);
}

}  // namespace

TEST_CASE("cosine similarity values") {
  Tape t;
  Tensor a = t.constant(Tensor::vec({1, 2, 2}));
  CHECK(t.cosine_similarity(a, a).item() == doctest::Approx(1.0).epsilon(1e-12));

  Tensor e1 = t.constant(Tensor::vec({1, 0}));
  Tensor e2 = t.constant(Tensor::vec({0, 1}));
  CHECK(t.cosine_similarity(e1, e2).item() == doctest::Approx(0.0).epsilon(1e-12));

  Tensor u = t.constant(Tensor::vec({3, 4}));
  Tensor v = t.constant(Tensor::vec({4, 3}));
  CHECK(t.cosine_similarity(u, v).item() == doctest::Approx(0.96).epsilon(1e-12));

  Tensor z = t.constant(Tensor::vec({0, 0}));
  CHECK_THROWS_AS(t.cosine_similarity(u, z), std::domain_error);
}

TEST_CASE("l1 distance values and scalar-loop oracle") {
  Tape t;
  Tensor a = t.constant(Tensor::vec({1, 2}));
  CHECK(t.l1_distance(a, a).item() == 0.0);

  Tensor b = t.constant(Tensor::vec({3, 5}));
  CHECK(t.l1_distance(a, b).item() == doctest::Approx(5.0).epsilon(1e-15));

  Rng rng(7);
  Tensor x = random_tensor({64}, rng), y = random_tensor({64}, rng);
  double oracle = 0.0;
  for (int i = 0; i < 64; ++i) oracle += std::fabs(x.data[i] - y.data[i]);
  Tensor xv = t.constant(x), yv = t.constant(y);
  CHECK(t.l1_distance(xv, yv).item() == doctest::Approx(oracle).epsilon(1e-12));

  Tensor shorter = t.constant(Tensor::vec({1, 2, 3}));
  CHECK_THROWS_AS(t.l1_distance(a, shorter), std::invalid_argument);
}

TEST_CASE("backward basics") {
  SUBCASE("f(x)=x*x has gradient 2x") {
    Tape t;
    Tensor x = t.leaf(Tensor::scalar(3.0));
    Tensor f = t.mul(x, x);
    t.backward(f);
    CHECK(t.grad_of(x).item() == doctest::Approx(6.0).epsilon(1e-15));
  }
  SUBCASE("leaf not connected to the root gets exactly zero") {
    Tape t;
    Tensor x = t.leaf(Tensor::scalar(2.0));
    Tensor unused = t.leaf(Tensor::vec({1, 2, 3}));
    Tensor f = t.mul(x, x);
    t.backward(f);
    Tensor g = t.grad_of(unused);
    for (double v : g.data) CHECK(v == 0.0);
  }
  SUBCASE("non-scalar root is a contract error") {
    Tape t;
    Tensor x = t.leaf(Tensor::vec({1, 2}));
    CHECK_THROWS_AS(t.backward(x), std::invalid_argument);
  }
  SUBCASE("tensor from another context is rejected") {
    Tape t;
    Tensor off;
    off = Tensor::scalar(1.0);
    CHECK_THROWS_AS(t.grad_of(off), std::out_of_range);
  }
}

TEST_CASE("grad tap semantics") {
  Tape t;
  Tensor x = t.leaf(Tensor::vec({0.5, -0.25, 2.0}));
  Tensor y = t.relu(x);
  Tensor root = t.sum_all(y);
  Tensor stray = t.exp(t.leaf(Tensor::vec({1.0, 1.0})));
  t.backward(root);

  SUBCASE("tap on the root is all ones") {
    Tensor g = t.grad_of(root);
    CHECK(g.size() == 1);
    CHECK(g.item() == 1.0);
  }
  SUBCASE("tap with no path to the root is zeros of the node shape") {
    Tensor g = t.grad_of(stray);
    CHECK(g.shape == stray.shape);
    for (double v : g.data) CHECK(v == 0.0);
  }
  SUBCASE("tap equals the backward table entry") {
    Tensor g1 = t.grad_of(y);
    Tensor g2 = t.grad_of(y);
    CHECK(g1.data == g2.data);
    CHECK(g1.data == std::vector<double>{1, 1, 1});
    CHECK(t.grad_of(x).data == std::vector<double>{1, 0, 1});
  }
}

TEST_CASE("composite graph matches finite differences") {
  // matmul -> layernorm -> softmax cross-entropy
  Rng rng(11);
  Tensor x0 = random_tensor({3, 4}, rng);
  Tensor w0 = random_tensor({4, 5}, rng);
  Tensor gain = Tensor::full({5}, 1.0);
  Tensor bias = Tensor::zeros({5});
  std::vector<int> labels = {1, 4, 0};

  auto loss_at = [&](const std::vector<double>& theta, Tensor* grad_out) {
    Tensor xw = Tensor({3, 4}, std::vector<double>(theta.begin(), theta.begin() + 12));
    Tensor ww = Tensor({4, 5}, std::vector<double>(theta.begin() + 12, theta.end()));
    Tape t;
    Tensor x = t.leaf(xw), w = t.leaf(ww);
    Tensor h = t.layer_norm_rows(t.matmul(x, w), t.constant(gain), t.constant(bias));
    Tensor p = t.softmax_rows(h);
    Tensor picked = t.take_entries(p, labels);
    Tensor loss = t.scale(t.mean_all(t.log(picked)), -1.0);
    if (grad_out) {
      t.backward(loss);
      Tensor gx = t.grad_of(x), gw = t.grad_of(w);
      *grad_out = Tensor::zeros({32});
      std::copy(gx.data.begin(), gx.data.end(), grad_out->data.begin());
      std::copy(gw.data.begin(), gw.data.end(), grad_out->data.begin() + 12);
    }
    return loss.item();
  };

  std::vector<double> theta = x0.data;
  theta.insert(theta.end(), w0.data.begin(), w0.data.end());
  Tensor analytic;
  loss_at(theta, &analytic);
  double err = finite_diff_check([&](const std::vector<double>& th) { return loss_at(th, nullptr); },
                                 theta, analytic.data, 1e-5);
  CHECK(err < 1e-4);
}

TEST_CASE("required op set passes gradient checks") {
  Rng rng(23);

  auto check = [&](const char* name, std::function<Tensor(Tape&, const Tensor&)> op, Tensor x0,
                   std::uint64_t seed) {
    double err = op_gradcheck(op, x0, seed);
    INFO(std::string(name));
    CHECK(err < 1e-4);
  };

  Tensor m34 = random_tensor({3, 4}, rng);
  Tensor m43 = random_tensor({4, 3}, rng);
  Rng wr(101);
  Tensor wconst = random_tensor({4, 3}, wr);
  Tensor rowc = random_tensor({4}, wr);
  Tensor gain = random_tensor({4}, wr, 0.5, 1.5);
  Tensor bias = random_tensor({4}, wr, -0.2, 0.2);

  check("matmul-left", [&](Tape& t, const Tensor& x) { return t.matmul(x, t.constant(m43)); }, m34, 1);
  check("matmul-right", [&](Tape& t, const Tensor& x) { return t.matmul(t.constant(m34), x); }, m43, 2);
  check("add", [&](Tape& t, const Tensor& x) { return t.add(x, t.constant(wconst)); },
        random_tensor({4, 3}, rng), 3);
  check("add-broadcast", [&](Tape& t, const Tensor& x) { return t.add(x, t.constant(rowc)); },
        random_tensor({3, 4}, rng), 4);
  Tensor base34 = random_tensor({3, 4}, wr);
  check("add-broadcast-arg",
        [&](Tape& t, const Tensor& x) { return t.add(t.constant(base34), x); },
        rowc, 5);
  check("multiply", [&](Tape& t, const Tensor& x) { return t.mul(x, t.constant(wconst)); },
        random_tensor({4, 3}, rng), 6);
  check("relu", [&](Tape& t, const Tensor& x) { return t.relu(x); }, random_tensor({17}, rng), 7);
  check("gelu", [&](Tape& t, const Tensor& x) { return t.gelu(x); }, random_tensor({17}, rng, -2, 2), 8);
  check("layernorm-x",
        [&](Tape& t, const Tensor& x) {
          return t.layer_norm_rows(x, t.constant(gain), t.constant(bias));
        },
        random_tensor({3, 4}, rng), 9);
  check("layernorm-gain",
        [&](Tape& t, const Tensor& x) {
          return t.layer_norm_rows(t.constant(m34), x, t.constant(bias));
        },
        gain, 10);
  check("layernorm-bias",
        [&](Tape& t, const Tensor& x) {
          return t.layer_norm_rows(t.constant(m34), t.constant(gain), x);
        },
        bias, 11);
  check("softmax", [&](Tape& t, const Tensor& x) { return t.softmax_rows(x); },
        random_tensor({3, 5}, rng), 12);
  check("log", [&](Tape& t, const Tensor& x) { return t.log(x); }, random_tensor({9}, rng, 0.2, 3.0), 13);
  check("exp", [&](Tape& t, const Tensor& x) { return t.exp(x); }, random_tensor({9}, rng), 14);
  check("concat",
        [&](Tape& t, const Tensor& x) {
          return t.concat_rows({t.constant(m34), x, t.constant(m34)});
        },
        random_tensor({2, 4}, rng), 15);
  check("concat-cols",
        [&](Tape& t, const Tensor& x) { return t.concat_cols({x, t.constant(m34)}); },
        random_tensor({3, 2}, rng), 16);
  check("slice-rows", [&](Tape& t, const Tensor& x) { return t.slice_rows(x, 1, 2); },
        random_tensor({4, 3}, rng), 17);
  check("slice-cols", [&](Tape& t, const Tensor& x) { return t.slice_cols(x, 1, 2); },
        random_tensor({3, 4}, rng), 18);
  check("mean", [&](Tape& t, const Tensor& x) { return t.mean_all(x); }, random_tensor({3, 4}, rng), 19);
  check("mean-rows", [&](Tape& t, const Tensor& x) { return t.mean_rows(x); },
        random_tensor({5, 3}, rng), 20);
  check("sigmoid", [&](Tape& t, const Tensor& x) { return t.sigmoid(x); },
        random_tensor({11}, rng, -3, 3), 21);
  check("transpose", [&](Tape& t, const Tensor& x) { return t.transpose(x); },
        random_tensor({3, 4}, rng), 22);
  check("l2-normalize", [&](Tape& t, const Tensor& x) { return t.l2_normalize_rows(x); },
        random_tensor({3, 4}, rng, 0.5, 2.0), 23);
  check("take-rows", [&](Tape& t, const Tensor& x) { return t.take_rows(x, {2, 0, 2, 1}); },
        random_tensor({3, 4}, rng), 24);
  check("cosine",
        [&](Tape& t, const Tensor& x) { return t.cosine_similarity(x, t.constant(rowc)); },
        random_tensor({4}, rng, 0.3, 1.5), 25);
  check("l1",
        [&](Tape& t, const Tensor& x) { return t.l1_distance(x, t.constant(rowc)); },
        random_tensor({4}, rng, 2.0, 3.0), 26);  // offset avoids ties
  check("sum", [&](Tape& t, const Tensor& x) { return t.sum_all(x); }, random_tensor({3, 4}, rng), 27);
  check("scale", [&](Tape& t, const Tensor& x) { return t.scale(x, -2.5); },
        random_tensor({3, 4}, rng), 28);
  check("reshape", [&](Tape& t, const Tensor& x) { return t.reshape(x, {4, 3}); },
        random_tensor({3, 4}, rng), 29);
}

TEST_CASE("gradient linearity") {
  Rng rng(31);
  Tensor x0 = random_tensor({6}, rng);
  double alpha = 1.7, beta = -0.4;

  auto parts = [&](Tape& t, const Tensor& x) {
    Tensor f = t.mean_all(t.gelu(x));
    Tensor g = t.sum_all(t.mul(x, x));
    return std::make_pair(f, g);
  };

  Tape t;
  Tensor x = t.leaf(x0);
  auto [f, g] = parts(t, x);
  t.backward(f);
  Tensor gf = t.grad_of(x);
  t.backward(g);
  Tensor gg = t.grad_of(x);
  Tensor combo = t.add(t.scale(f, alpha), t.scale(g, beta));
  t.backward(combo);
  Tensor gc = t.grad_of(x);

  for (int i = 0; i < 6; ++i)
    CHECK(gc.data[i] == doctest::Approx(alpha * gf.data[i] + beta * gg.data[i]).epsilon(1e-10));
}

TEST_CASE("gradients are bit-deterministic") {
  auto run = [](std::vector<double>* out) {
    Rng rng(47);
    Tape t;
    Tensor x = t.leaf(Tensor({4, 4}, {0.1, -0.2, 0.3, 0.4, 1.2, -1.1, 0.7, 0.2, 0.05, 0.9, -0.3,
                                      0.6, -0.7, 0.8, 0.21, -0.9}));
    Tensor w = t.constant(Tensor({4, 4}, {1, 0.5, -0.5, 2, 0.25, 1, 0, -1, 0.125, 3, 1, 0.5, -2,
                                          0.75, 1.5, 1}));
    Tensor h = t.gelu(t.matmul(x, w));
    Tensor p = t.softmax_rows(h);
    Tensor loss = t.scale(t.mean_all(t.log(p)), -1.0);
    t.backward(loss);
    *out = t.grad_of(x).data;
  };
  std::vector<double> a, b;
  run(&a);
  run(&b);
  CHECK(std::memcmp(a.data(), b.data(), a.size() * sizeof(double)) == 0);
}

TEST_CASE("finite_diff_check reference behaviour") {
  SUBCASE("linear function is exact to rounding") {
    std::vector<double> theta = {1.0, -2.0, 3.0};
    std::vector<double> grad = {2.0, 0.5, -1.0};
    auto f = [&](const std::vector<double>& th) {
      return 2.0 * th[0] + 0.5 * th[1] - 1.0 * th[2] + 4.0;
    };
    CHECK(finite_diff_check(f, theta, grad, 1e-4) < 1e-9);
  }
  SUBCASE("quadratic function is exact to rounding") {
    std::vector<double> theta = {0.5, -1.5};
    std::vector<double> grad = {2.0 * 0.5, 3.0 * 2.0 * -1.5};
    auto f = [&](const std::vector<double>& th) { return th[0] * th[0] + 3.0 * th[1] * th[1]; };
    CHECK(finite_diff_check(f, theta, grad, 1e-4) < 1e-9);
  }
  SUBCASE("bad eps rejected") {
    auto f = [](const std::vector<double>& th) { return th[0]; };
    CHECK_THROWS_AS(finite_diff_check(f, {1.0}, {1.0}, 0.0), std::invalid_argument);
  }
  SUBCASE("non-finite value reported") {
    auto f = [](const std::vector<double>& th) { return std::log(th[0]); };
    CHECK_THROWS_AS(finite_diff_check(f, {0.0}, {1.0}, 1e-3), std::runtime_error);
  }
}

TEST_CASE("log rejects non-positive input") {
  Tape t;
  Tensor x = t.constant(Tensor::vec({1.0, 0.0}));
  CHECK_THROWS_AS(t.log(x), std::domain_error);
}
