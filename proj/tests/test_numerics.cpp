#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <vector>

#include "vlmlens/array.hpp"
#include "vlmlens/autodiff.hpp"
#include "vlmlens/rng.hpp"

using namespace vlmlens;

TEST_CASE("matmul matches hand-computed products") {
  DenseArray a({1, 2}, {1.0, 2.0});
  DenseArray b({2, 1}, {3.0, 4.0});
  DenseArray c = matmul(a, b);
  CHECK(c.shape() == std::vector<std::size_t>{1, 1});
  CHECK(c[0] == 11.0);

  DenseArray m({2, 3}, {1, 2, 3, 4, 5, 6});
  DenseArray n({3, 2}, {7, 8, 9, 10, 11, 12});
  DenseArray p = matmul(m, n);
  CHECK(p.at(0, 0) == 58.0);
  CHECK(p.at(0, 1) == 64.0);
  CHECK(p.at(1, 0) == 139.0);
  CHECK(p.at(1, 1) == 154.0);

  CHECK_THROWS_AS(matmul(m, a), Error);
}

TEST_CASE("transpose and broadcast add") {
  DenseArray m({2, 3}, {1, 2, 3, 4, 5, 6});
  DenseArray t = transpose(m);
  CHECK(t.shape() == std::vector<std::size_t>{3, 2});
  CHECK(t.at(0, 1) == 4.0);
  CHECK(t.at(2, 0) == 3.0);

  DenseArray row({3}, {10, 20, 30});
  DenseArray s = add(m, row);
  CHECK(s.at(0, 0) == 11.0);
  CHECK(s.at(1, 2) == 36.0);

  DenseArray bad({2}, {1, 2});
  CHECK_THROWS_AS(add(m, bad), Error);
}

TEST_CASE("softmax frozen values") {
  DenseArray x({2}, {std::log(2.0), 0.0});
  DenseArray y = softmax(x);
  CHECK(y[0] == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  CHECK(y[1] == doctest::Approx(1.0 / 3.0).epsilon(1e-12));

  // Row-max subtraction keeps huge logits finite.
  DenseArray big({2}, {1000.0, 999.0});
  DenseArray yb = softmax(big);
  CHECK(yb[0] == doctest::Approx(1.0 / (1.0 + std::exp(-1.0))).epsilon(1e-12));
  CHECK(std::isfinite(yb[0]));

  // Rows are independent.
  DenseArray two({2, 2}, {0.0, 0.0, 5.0, 5.0});
  DenseArray yt = softmax(two);
  for (std::size_t i = 0; i < 4; ++i) CHECK(yt[i] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("layer_norm frozen values") {
  DenseArray gain({2}, {1.0, 1.0});
  DenseArray bias({2}, {0.0, 0.0});
  DenseArray x({2}, {1.0, -1.0});
  DenseArray y = layer_norm(x, gain, bias);
  double expect = 1.0 / std::sqrt(1.0 + 1e-5);
  CHECK(y[0] == doctest::Approx(expect).epsilon(1e-14));
  CHECK(y[1] == doctest::Approx(-expect).epsilon(1e-14));

  DenseArray gain2({2}, {2.0, 3.0});
  DenseArray bias2({2}, {10.0, 20.0});
  DenseArray y2 = layer_norm(x, gain2, bias2);
  CHECK(y2[0] == doctest::Approx(10.0 + 2.0 * expect).epsilon(1e-14));
  CHECK(y2[1] == doctest::Approx(20.0 - 3.0 * expect).epsilon(1e-14));

  // Constant rows normalize to bias (epsilon keeps the division finite).
  DenseArray flat({3}, {5.0, 5.0, 5.0});
  DenseArray gain3({3}, {1.0, 1.0, 1.0});
  DenseArray bias3({3}, {0.5, 0.5, 0.5});
  DenseArray y3 = layer_norm(flat, gain3, bias3);
  for (std::size_t i = 0; i < 3; ++i) CHECK(y3[i] == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("gelu frozen values") {
  DenseArray x({3}, {0.0, 1.0, -1.0});
  DenseArray y = gelu(x);
  CHECK(y[0] == 0.0);
  CHECK(y[1] == doctest::Approx(0.8413447460685429).epsilon(1e-14));
  CHECK(y[2] == doctest::Approx(-0.15865525393145707).epsilon(1e-13));
}

TEST_CASE("argmax ties resolve to lowest index") {
  std::vector<double> v{1.0, 3.0, 3.0, 2.0};
  CHECK(argmax(v.data(), v.size()) == 1);
  std::vector<double> w{-1.0};
  CHECK(argmax(w.data(), w.size()) == 0);
  CHECK_THROWS_AS(argmax(v.data(), 0), Error);
}

TEST_CASE("assert_finite rejects NaN and inf") {
  DenseArray ok({2}, {1.0, 2.0});
  CHECK_NOTHROW(ok.assert_finite("ok"));
  DenseArray bad({2}, {1.0, std::nan("")});
  CHECK_THROWS_AS(bad.assert_finite("bad"), Error);
  DenseArray inf({1}, {1.0 / 0.0});
  CHECK_THROWS_AS(inf.assert_finite("inf"), Error);
}

TEST_CASE("tape computes d(x*x)/dx = 2x") {
  Tape tape;
  Var x = tape.input(DenseArray({1}, {3.0}));
  Var loss = sum(mul(x, x));
  CHECK(loss.value()[0] == 9.0);
  Gradients g = tape.backward(loss);
  CHECK(g.at(x)[0] == 6.0);
}

TEST_CASE("tape accumulates gradients across a diamond") {
  // f = sum(x * (2x)) = 2*sum(x^2), df/dx = 4x.
  Tape tape;
  Var x = tape.input(DenseArray({3}, {1.0, -2.0, 0.5}));
  Var loss = sum(mul(x, scale(x, 2.0)));
  Gradients g = tape.backward(loss);
  CHECK(g.at(x)[0] == doctest::Approx(4.0));
  CHECK(g.at(x)[1] == doctest::Approx(-8.0));
  CHECK(g.at(x)[2] == doctest::Approx(2.0));
}

TEST_CASE("tape is single-use") {
  Tape tape;
  Var x = tape.input(DenseArray({1}, {2.0}));
  Var loss = sum(mul(x, x));
  (void)tape.backward(loss);
  CHECK_THROWS_AS(tape.backward(loss), Error);
  CHECK_THROWS_AS(mul(x, x), Error);
  try {
    tape.backward(loss);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::reuse);
  }
}

TEST_CASE("backward requires scalar loss and same tape") {
  Tape tape;
  Var x = tape.input(DenseArray({2}, {1.0, 2.0}));
  CHECK_THROWS_AS(tape.backward(x), Error);

  Tape t2;
  Var a = t2.input(DenseArray({1}, {1.0}));
  Tape t3;
  Var b = t3.input(DenseArray({1}, {1.0}));
  CHECK_THROWS_AS(add(a, b), Error);
}

TEST_CASE("constants receive no reported gradient") {
  Tape tape;
  Var x = tape.input(DenseArray({1}, {3.0}));
  Var c = tape.constant(DenseArray({1}, {5.0}));
  Var loss = sum(mul(x, c));
  Gradients g = tape.backward(loss);
  CHECK(g.at(x)[0] == 5.0);
  CHECK_THROWS_AS(g.at(c), Error);
}

// ---- finite-difference property test ---------------------------------------
// A seeded pipeline interpreted over either DenseArray (eager, for FD) or Var
// (taped). Both paths share the same kernels, so the taped forward value must
// match the eager one exactly, and the taped gradient must match central
// differences to first order.

namespace {

struct PipelineSpec {
  bool use_bias_add;
  bool use_layer_norm;
  bool use_gelu;
  bool use_softmax;
  bool use_diamond;
  bool use_transpose_product;
  DenseArray x, w, g, b, mask1, mask2;
};

PipelineSpec make_spec(std::uint64_t seed) {
  Rng rng(derive_seed(seed, {0x67726170ULL}));
  PipelineSpec s;
  s.use_bias_add = rng.uniform() < 0.5;
  s.use_layer_norm = rng.uniform() < 0.5;
  s.use_gelu = rng.uniform() < 0.5;
  s.use_softmax = rng.uniform() < 0.5;
  s.use_diamond = rng.uniform() < 0.5;
  s.use_transpose_product = rng.uniform() < 0.5;
  auto fill = [&](std::vector<std::size_t> shape) {
    DenseArray a(shape);
    for (std::size_t i = 0; i < a.size(); ++i) a[i] = rng.normal();
    return a;
  };
  s.x = fill({2, 3});
  s.w = fill({3, 4});
  s.g = fill({4});
  s.b = fill({4});
  s.mask1 = fill({2, 4});
  s.mask2 = fill({2, 2});
  return s;
}

// Evaluate the pipeline; V is Var or DenseArray. Leaf values are supplied so
// the FD loop can perturb them.
template <typename V>
V run_pipeline(const PipelineSpec& s, const V& x, const V& w, const V& g, const V& b,
               const V& mask1, const V& mask2) {
  V h = matmul(x, w);  // (2,4)
  if (s.use_bias_add) h = add(h, b);
  if (s.use_layer_norm) h = layer_norm(h, g, b);
  if (s.use_gelu) h = gelu(h);
  if (s.use_softmax) h = softmax(h);
  // Constant-weighted readout keeps gradients nontrivial after normalizers.
  h = mul(h, mask1);
  if (s.use_diamond) h = add(h, scale(h, 0.5));
  if (s.use_transpose_product) {
    V z = matmul(h, transpose(h));  // (2,2)
    return sum(mul(z, mask2));
  }
  return sum(h);
}

double eval_eager(const PipelineSpec& s, const DenseArray& x, const DenseArray& w,
                  const DenseArray& g, const DenseArray& b) {
  return run_pipeline<DenseArray>(s, x, w, g, b, s.mask1, s.mask2)[0];
}

}  // namespace

TEST_CASE("tape gradients match central finite differences on 120 seeded graphs") {
  int graphs_with_live_gradient = 0;
  for (std::uint64_t seed = 1; seed <= 120; ++seed) {
    PipelineSpec s = make_spec(seed);

    Tape tape;
    Var x = tape.input(s.x);
    Var w = tape.input(s.w);
    Var g = tape.input(s.g);
    Var b = tape.input(s.b);
    Var m1 = tape.constant(s.mask1);
    Var m2 = tape.constant(s.mask2);
    Var loss = run_pipeline<Var>(s, x, w, g, b, m1, m2);

    // Taped forward must equal the eager forward bit for bit.
    double eager = eval_eager(s, s.x, s.w, s.g, s.b);
    REQUIRE(loss.value()[0] == eager);

    Gradients grads = tape.backward(loss);

    struct Leaf {
      const char* name;
      Var var;
      DenseArray value;
    };
    std::vector<Leaf> leaves{{"x", x, s.x}, {"w", w, s.w}, {"g", g, s.g}, {"b", b, s.b}};

    const double step = 1e-5;
    for (auto& leaf : leaves) {
      const DenseArray& analytic = grads.at(leaf.var);
      for (std::size_t i = 0; i < leaf.value.size(); ++i) {
        DenseArray hi = leaf.value, lo = leaf.value;
        hi[i] += step;
        lo[i] -= step;
        auto eval_at = [&](const DenseArray& v) {
          if (leaf.name[0] == 'x') return eval_eager(s, v, s.w, s.g, s.b);
          if (leaf.name[0] == 'w') return eval_eager(s, s.x, v, s.g, s.b);
          if (leaf.name[0] == 'g') return eval_eager(s, s.x, s.w, v, s.b);
          return eval_eager(s, s.x, s.w, s.g, v);
        };
        double fd = (eval_at(hi) - eval_at(lo)) / (2.0 * step);
        double a = analytic[i];
        double denom = std::max({std::abs(a), std::abs(fd), 1.0});
        REQUIRE(std::abs(a - fd) / denom < 1e-4);
        if (std::abs(a) > 1e-6) ++graphs_with_live_gradient;
      }
    }
  }
  // Guards against the property passing vacuously on all-zero gradients.
  CHECK(graphs_with_live_gradient > 1000);
}

TEST_CASE("rng streams are deterministic and label-sensitive") {
  Rng a(42), b(42), c(43);
  for (int i = 0; i < 100; ++i) {
    std::uint64_t va = a.next_u64();
    CHECK(va == b.next_u64());
  }
  // Different seed diverges immediately on this stream.
  Rng a2(42);
  CHECK(a2.next_u64() != c.next_u64());

  CHECK(derive_seed(7, {1, 2}) != derive_seed(7, {2, 1}));
  CHECK(derive_seed(7, {1, 2}) == derive_seed(7, {1, 2}));
  CHECK(derive_seed(7, {1}) != derive_seed(8, {1}));
}

TEST_CASE("rng uniform_int is in range and rejects n=0") {
  Rng rng(5);
  for (int i = 0; i < 1000; ++i) {
    std::uint64_t v = rng.uniform_int(7);
    CHECK(v < 7);
  }
  CHECK_THROWS_AS(rng.uniform_int(0), Error);
}

TEST_CASE("box-muller normals have sane moments") {
  Rng rng(12345);
  const int n = 20000;
  double mean = 0.0, m2 = 0.0;
  for (int i = 0; i < n; ++i) {
    double v = rng.normal();
    mean += v;
    m2 += v * v;
  }
  mean /= n;
  double var = m2 / n - mean * mean;
  CHECK(std::abs(mean) < 0.05);
  CHECK(std::abs(var - 1.0) < 0.05);
}

TEST_CASE("shuffle is a permutation and seed-stable") {
  Rng rng(9);
  std::vector<int> v{0, 1, 2, 3, 4, 5, 6, 7};
  rng.shuffle(v);
  std::vector<int> sorted = v;
  std::sort(sorted.begin(), sorted.end());
  CHECK(sorted == std::vector<int>{0, 1, 2, 3, 4, 5, 6, 7});

  Rng rng2(9);
  std::vector<int> w{0, 1, 2, 3, 4, 5, 6, 7};
  rng2.shuffle(w);
  CHECK(v == w);
}
