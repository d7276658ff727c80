#include <cmath>
#include <cstring>
#include <sstream>

#include "dim/nn.hpp"
#include "dim/ops.hpp"
#include "doctest.h"
#include "testutil.hpp"

using namespace dim;
using dimtest::fd_check;
using dimtest::random_tensor;

TEST_CASE("matmul known values") {
  Tensor eye({2, 2}, {1, 0, 0, 1});
  Tensor m({2, 2}, {1, 2, 3, 4});
  Tensor r = matmul(eye, m);
  for (int64_t i = 0; i < 4; ++i) CHECK(r.data()[i] == doctest::Approx(m.data()[i]));

  Tensor a({1, 2}, {1, 2});
  Tensor b({2, 1}, {3, 4});
  CHECK(matmul(a, b)(0, 0) == doctest::Approx(11.0));

  Tensor z = Tensor::zeros({2, 2});
  Tensor zr = matmul(z, m);
  for (int64_t i = 0; i < 4; ++i) CHECK(zr.data()[i] == 0.0);

  CHECK_THROWS(matmul(a, a));  // inner dims disagree
}

TEST_CASE("conv1d hand-computed and shape contract") {
  Tensor x({3, 1}, {1, 2, 3});
  Tensor box({3, 1, 1}, {1, 1, 1});
  Tensor y = conv1d(x, box, 1, 1);
  CHECK(y(0, 0) == doctest::Approx(3.0));
  CHECK(y(1, 0) == doctest::Approx(6.0));
  CHECK(y(2, 0) == doctest::Approx(5.0));

  Tensor delta({3, 1, 1}, {0, 1, 0});
  Tensor id = conv1d(x, delta, 1, 1);
  for (int64_t i = 0; i < 3; ++i) CHECK(id(i, 0) == doctest::Approx(x(i, 0)));

  // K=201 same-padded over T=400 keeps the length.
  Rng rng(7);
  Tensor long_x = random_tensor({400, 2}, rng);
  Tensor k201 = random_tensor({201, 2, 3}, rng, -0.01, 0.01);
  CHECK(conv1d(long_x, k201, 100, 1).dim(0) == 400);

  // Kernel longer than padded input.
  CHECK_THROWS(conv1d(x, k201, 0, 1));
}

TEST_CASE("conv1d delta kernel is identity for any input") {
  Rng rng(3);
  for (int trial = 0; trial < 5; ++trial) {
    int64_t T = 2 + static_cast<int64_t>(rng.uniform(0, 30));
    int64_t C = 1 + static_cast<int64_t>(rng.uniform(0, 4));
    Tensor x = random_tensor({T, C}, rng);
    Tensor delta = Tensor::zeros({3, C, C});
    for (int64_t c = 0; c < C; ++c) delta(1, c, c) = 1.0;
    Tensor y = conv1d(x, delta, 1, 1);
    CHECK(dimtest::max_abs_diff(x, y) == 0.0);
  }
}

TEST_CASE("conv1d causal variant sees no future") {
  Rng rng(11);
  Tensor x = random_tensor({16, 2}, rng);
  Tensor w = random_tensor({4, 2, 2}, rng);
  Tensor y = conv1d_causal(x, w);
  CHECK(y.dim(0) == 16);
  Tensor x2 = x.clone();
  x2(10, 0) += 1.0;
  Tensor y2 = conv1d_causal(x2, w);
  for (int64_t t = 0; t < 10; ++t)
    for (int64_t c = 0; c < 2; ++c) CHECK(y(t, c) == y2(t, c));
  bool changed = false;
  for (int64_t t = 10; t < 16; ++t)
    for (int64_t c = 0; c < 2; ++c) changed |= y(t, c) != y2(t, c);
  CHECK(changed);
}

TEST_CASE("layer_norm zero-variance guard and unit variance") {
  Tensor c({1, 3}, {5, 5, 5});
  Tensor yc = layer_norm(c, 1e-5);
  for (int64_t i = 0; i < 3; ++i) CHECK(yc.data()[i] == doctest::Approx(0.0));

  Tensor pm({1, 2}, {1, -1});
  Tensor ypm = layer_norm(pm, 1e-5);
  double s = 1.0 / std::sqrt(1.0 + 1e-5);
  CHECK(ypm(0, 0) == doctest::Approx(s));
  CHECK(ypm(0, 1) == doctest::Approx(-s));

  Rng rng(5);
  Tensor x = random_tensor({8, 16}, rng, -3, 3);
  Tensor y = layer_norm(x, 1e-12);
  for (int64_t t = 0; t < 8; ++t) {
    double mean = 0, var = 0;
    for (int64_t j = 0; j < 16; ++j) mean += y(t, j);
    mean /= 16;
    for (int64_t j = 0; j < 16; ++j) var += (y(t, j) - mean) * (y(t, j) - mean);
    var /= 16;
    CHECK(std::abs(mean) < 1e-10);
    CHECK(std::abs(var - 1.0) < 1e-6);
  }
}

TEST_CASE("mlp zero output layer and exact identity configuration") {
  Rng rng(9);
  Mlp m(4, 8, 3, rng);
  m.zero_output_layer();
  Tensor x = random_tensor({5, 4}, rng);
  Tensor y = m.forward(x);
  for (int64_t i = 0; i < y.numel(); ++i) CHECK(y.data()[i] == 0.0);

  // silu(x) - silu(-x) == x, so [I; -I] in, [I; -I] out is the identity.
  Mlp ident(3, 6, 3, rng);
  for (int64_t i = 0; i < ident.l1.w.numel(); ++i) ident.l1.w.data()[i] = 0;
  for (int64_t i = 0; i < ident.l2.w.numel(); ++i) ident.l2.w.data()[i] = 0;
  for (int64_t i = 0; i < ident.l1.b.numel(); ++i) ident.l1.b.data()[i] = 0;
  for (int64_t i = 0; i < ident.l2.b.numel(); ++i) ident.l2.b.data()[i] = 0;
  for (int64_t j = 0; j < 3; ++j) {
    ident.l1.w(j, j) = 1.0;
    ident.l1.w(j, 3 + j) = -1.0;
    ident.l2.w(j, j) = 1.0;
    ident.l2.w(3 + j, j) = -1.0;
  }
  Tensor xi = random_tensor({4, 3}, rng, -2, 2);
  Tensor yi = ident.forward(xi);
  CHECK(dimtest::max_abs_diff(xi, yi) < 1e-12);
}

TEST_CASE("backward basics and tape discipline") {
  Tensor x({3}, {1, 2, 3});
  {
    Tape tape;
    Tensor loss = sum(x, &tape);
    tape.backward(loss);
    for (int64_t i = 0; i < 3; ++i) CHECK(x.grad()[i] == doctest::Approx(1.0));
  }
  Tensor x2({2}, {1, 2});
  {
    Tape tape;
    Tensor loss = sum(mul(x2, x2, &tape), &tape);
    tape.backward(loss);
    CHECK(x2.grad()[0] == doctest::Approx(2.0));
    CHECK(x2.grad()[1] == doctest::Approx(4.0));
  }
  {
    Tape tape;
    Tensor loss = sum(x, &tape);
    tape.backward(loss);
    CHECK_THROWS(tape.backward(loss));  // reuse without reset
    tape.reset();
    Tensor loss2 = sum(x, &tape);
    CHECK_NOTHROW(tape.backward(loss2));
  }
  {
    Tape tape;
    Tensor vec = mul(x, x, &tape);
    CHECK_THROWS(tape.backward(vec));  // non-scalar loss
  }
}

TEST_CASE("finite differences across every primitive") {
  Rng rng(17);
  auto weighted = [&](Tensor out, Tensor w, Tape* tape) {
    return sum(mul(out, w, tape), tape);
  };

  SUBCASE("elementwise and broadcasting") {
    Tensor a = random_tensor({4, 3}, rng), b = random_tensor({4, 3}, rng);
    Tensor v = random_tensor({3}, rng);
    Tensor w = random_tensor({4, 3}, rng);
    auto rep = fd_check(
        [&](Tape* t) {
          Tensor r = add(a, b, t);
          r = sub(r, mul(a, b, t), t);
          r = mul_rowvec(add_rowvec(r, v, t), v, t);
          r = scale(r, 0.7, t);
          return weighted(r, w, t);
        },
        {a, b, v});
    CHECK(rep.max_rel_err < 1e-4);
  }

  SUBCASE("matmul and transpose") {
    Tensor a = random_tensor({3, 4}, rng), b = random_tensor({4, 2}, rng);
    Tensor w = random_tensor({2, 3}, rng);
    auto rep = fd_check(
        [&](Tape* t) { return weighted(transpose(matmul(a, b, t), t), w, t); },
        {a, b});
    CHECK(rep.max_rel_err < 1e-4);
  }

  SUBCASE("convolutions") {
    Tensor x = random_tensor({9, 2}, rng);
    Tensor k = random_tensor({3, 2, 2}, rng);
    Tensor w = random_tensor({5, 2}, rng);
    auto rep = fd_check(
        [&](Tape* t) {
          return weighted(conv1d(x, k, 1, 2, PadMode::kReflect, t), w, t);
        },
        {x, k});
    CHECK(rep.max_rel_err < 1e-4);

    Tensor wc = random_tensor({9, 2}, rng);
    auto rep2 = fd_check(
        [&](Tape* t) { return weighted(conv1d_causal(x, k, t), wc, t); }, {x, k});
    CHECK(rep2.max_rel_err < 1e-4);

    Tensor dk = random_tensor({3, 2}, rng);
    auto rep3 = fd_check(
        [&](Tape* t) {
          Tensor r = conv1d_depthwise(x, dk, 1, PadMode::kReflect, t);
          return weighted(conv1d_depthwise_causal(r, dk, t), wc, t);
        },
        {x, dk});
    CHECK(rep3.max_rel_err < 1e-4);
  }

  SUBCASE("normalization and nonlinearities") {
    Tensor x = random_tensor({4, 6}, rng, -2, 2);
    Tensor w = random_tensor({4, 6}, rng);
    auto rep = fd_check(
        [&](Tape* t) {
          Tensor r = layer_norm(x, 1e-5, t);
          r = silu(r, t);
          r = softplus(r, t);
          r = dim::exp(scale(r, -0.5, t), t);
          return weighted(r, w, t);
        },
        {x});
    CHECK(rep.max_rel_err < 1e-4);
  }

  SUBCASE("slicing, concatenation, interpolation") {
    Tensor x = random_tensor({6, 5}, rng);
    Tensor w = random_tensor({9, 4}, rng);
    auto rep = fd_check(
        [&](Tape* t) {
          Tensor l = slice_cols(x, 0, 2, t);
          Tensor r = slice_cols(x, 3, 5, t);
          Tensor rows = slice_rows(concat_cols({l, r}, t), 0, 6, t);
          return weighted(interp_rows(rows, 9, t), w, t);
        },
        {x});
    CHECK(rep.max_rel_err < 1e-4);
  }

  SUBCASE("mean squared error") {
    Tensor a = random_tensor({3, 4}, rng), b = random_tensor({3, 4}, rng);
    auto rep =
        fd_check([&](Tape* t) { return mean_squared_error(a, b, t); }, {a, b});
    CHECK(rep.max_rel_err < 1e-4);
  }

  SUBCASE("selective scan") {
    Tensor a = random_tensor({7, 1}, rng, 0.05, 0.95);
    Tensor B = random_tensor({7, 3}, rng);
    Tensor C = random_tensor({7, 3}, rng);
    Tensor V = random_tensor({7, 2}, rng);
    Tensor w = random_tensor({7, 2}, rng);
    auto rep = fd_check(
        [&](Tape* t) { return weighted(ssd_scan(a, B, C, V, t), w, t); },
        {a, B, C, V});
    CHECK(rep.max_rel_err < 1e-4);
  }
}

TEST_CASE("kernels are deterministic under a fixed seed") {
  auto run = [](uint64_t seed) {
    Rng rng(seed);
    Mlp m(6, 12, 6, rng);
    Tensor x = random_tensor({8, 6}, rng);
    return m.forward(silu(layer_norm(x, 1e-5)));
  };
  Tensor a = run(42), b = run(42);
  CHECK(std::memcmp(a.data(), b.data(), sizeof(double) * a.numel()) == 0);
}

TEST_CASE("tensor serialization round trip") {
  Rng rng(23);
  Tensor t = random_tensor({3, 5, 2}, rng, -100, 100);
  std::stringstream ss;
  save_tensor(ss, t);
  Tensor back = load_tensor(ss);
  REQUIRE(back.shape() == t.shape());
  CHECK(std::memcmp(back.data(), t.data(), sizeof(double) * t.numel()) == 0);

  std::stringstream s32;
  save_tensor(s32, t, DType::kF32);
  Tensor b32 = load_tensor(s32);
  for (int64_t i = 0; i < t.numel(); ++i)
    CHECK(b32.data()[i] ==
          doctest::Approx(t.data()[i]).epsilon(1e-6));

  std::stringstream bad("NOPE");
  CHECK_THROWS(load_tensor(bad));
}

TEST_CASE("named tensor table and registry round trip") {
  Rng rng(29);
  Tensor w1 = random_tensor({3, 4}, rng), w2 = random_tensor({5}, rng);
  ParamRegistry reg;
  reg.add("layer.w", w1);
  reg.add("layer.b", w2);
  CHECK(reg.count() == 17);
  std::string path = "/tmp/dim_table_test.bin";
  save_named_tensors(path, reg.items());

  Rng rng2(99);
  Tensor u1 = random_tensor({3, 4}, rng2), u2 = random_tensor({5}, rng2);
  ParamRegistry reg2;
  reg2.add("layer.w", u1);
  reg2.add("layer.b", u2);
  load_into_registry(path, reg2);
  CHECK(dimtest::max_abs_diff(u1, w1) == 0.0);
  CHECK(dimtest::max_abs_diff(u2, w2) == 0.0);
  CHECK_THROWS(reg2.add("layer.w", u1));  // duplicate name
}
