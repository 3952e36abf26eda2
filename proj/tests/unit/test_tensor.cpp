// SPDX-License-Identifier: Apache-2.0
#include <cmath>
#include <random>

#include "doctest.h"
#include "gradcheck.hpp"
#include "tc/error.hpp"
#include "tc/nn.hpp"
#include "tc/tensor.hpp"
#include "test_util.hpp"

using namespace tc;
using ad::Tape;
using ad::Tensor;
using ad::Var;

TEST_CASE("every op matches central differences") {
  auto cases = testing::op_cases();
  for (auto& c : cases) {
    CAPTURE(c.name);
    auto r = testing::check_gradients(c);
    CHECK(r.checked > 0);
    CHECK(r.max_rel < 1e-4);
  }
}

TEST_CASE("basic values") {
  Tape tape;
  auto logits = tape.constant(Tensor({4}, 2.5));
  auto sm = ad::softmax(logits, 0).value();
  for (std::size_t i = 0; i < 4; ++i) CHECK(sm[i] == doctest::Approx(0.25));

  auto x = tape.constant(Tensor({2, 3}, {1, 2, 3, 4, 5, 6}));
  auto eye = tape.constant(Tensor({3, 3}, {1, 0, 0, 0, 1, 0, 0, 0, 1}));
  auto y = ad::matmul(x, eye).value();
  for (std::size_t i = 0; i < 6; ++i) CHECK(y[i] == x.value()[i]);

  auto v = tape.constant(Tensor({3}, {1, 2, 3}));
  CHECK(ad::mean(v, 0).value().item() == 2.0);

  auto big = tape.constant(Tensor({3}, {1000.0, 1000.0, -1000.0}));
  auto sb = ad::softmax(big, 0).value();
  CHECK(sb[0] == doctest::Approx(0.5));
  CHECK(sb[2] == 0.0);
}

TEST_CASE("cosine distance landmarks") {
  Tape tape;
  auto u = tape.constant(Tensor({3}, {1, 2, 3}));
  auto neg = tape.constant(Tensor({3}, {-1, -2, -3}));
  auto a = tape.constant(Tensor({2}, {1, 0}));
  auto b = tape.constant(Tensor({2}, {0, 3}));
  CHECK(ad::cosine_distance(u, u).value().item() == doctest::Approx(0.0));
  CHECK(ad::cosine_distance(a, b).value().item() == doctest::Approx(1.0));
  CHECK(ad::cosine_distance(u, neg).value().item() == doctest::Approx(2.0));
  auto z = tape.constant(Tensor({3}));
  CHECK_THROWS_AS(ad::cosine_distance(u, z), Error);
}

TEST_CASE("mse values") {
  Tape tape;
  auto a = tape.constant(Tensor({1, 2}, {1, 1}));
  auto b = tape.constant(Tensor({1, 2}, {0, 0}));
  const std::uint8_t one[] = {1};
  CHECK(ad::mse(a, a, one).value().item() == 0.0);
  CHECK(ad::mse(a, b, one).value().item() == doctest::Approx(1.0));

  std::mt19937_64 rng(4);
  auto p = testing::random_tensor(rng, {5, 3});
  auto q = testing::random_tensor(rng, {5, 3});
  const std::uint8_t mask[] = {1, 1, 0, 1, 0};
  double oracle = 0.0;
  for (std::size_t i = 0; i < 5; ++i)
    for (std::size_t j = 0; j < 3; ++j)
      if (mask[i]) oracle += (p[i * 3 + j] - q[i * 3 + j]) * (p[i * 3 + j] - q[i * 3 + j]);
  oracle /= 9.0;
  CHECK(ad::mse(tape.constant(p), tape.constant(q), mask).value().item() ==
        doctest::Approx(oracle).epsilon(1e-14));
}

TEST_CASE("shape errors") {
  Tape tape;
  auto a = tape.constant(Tensor({2, 3}));
  auto b = tape.constant(Tensor({3, 2}));
  CHECK_THROWS_AS(ad::add(a, b), Error);
  CHECK_THROWS_AS(ad::matmul(a, a), Error);
  CHECK_THROWS_AS(ad::slice(a, 1, 2, 5), Error);
  CHECK_THROWS_AS(ad::reshape(a, {4}), Error);
  try {
    ad::add(a, b);
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::kShape);
  }
}

TEST_CASE("tape sweeps each node once and only once") {
  Tensor w({3}, {0.1, -0.2, 0.3});
  w.set_requires_grad(true);
  Tape tape;
  auto x = tape.parameter(w);
  auto y = ad::tanh(x);
  auto z = ad::add(y, y);   // y used twice
  auto loss = ad::sum(ad::mul(z, y));
  tape.backward(loss);
  CHECK(tape.backward_visits() == 4);  // tanh, add, mul, sum
  for (std::size_t i = 0; i < 3; ++i) {
    const double t = std::tanh(w[i]);
    CHECK(w.grad()[i] == doctest::Approx(4.0 * t * (1 - t * t)));
  }
  CHECK_THROWS_AS(tape.backward(loss), Error);
  Tensor bad({1}, {std::nan("")});
  CHECK_THROWS_AS(tape.constant(bad), Error);
}

TEST_CASE("gradients accumulate across tapes until zeroed") {
  Tensor w({2}, {1.0, 2.0});
  w.set_requires_grad(true);
  for (int rep = 0; rep < 2; ++rep) {
    Tape tape;
    tape.backward(ad::sum(tape.parameter(w)));
  }
  CHECK(w.grad()[0] == 2.0);
  w.zero_grad();
  CHECK(w.grad()[1] == 0.0);
}

TEST_CASE("lstm fixed point and range") {
  auto zero = nn::LstmParams::zeros(3, 2);
  Tape tape;
  auto p = nn::bind(tape, zero);
  auto x = tape.constant(Tensor({1, 3}, {1, -2, 3}));
  auto h0 = tape.constant(Tensor({1, 2}));
  auto s = nn::lstm_step(p, x, h0, h0);
  for (auto v : s.h.value().data()) CHECK(v == 0.0);

  std::mt19937_64 rng(6);
  auto params = nn::LstmParams::uniform(3, 2, rng);
  Tape t2;
  auto bound = nn::bind(t2, params);
  Var h = t2.constant(Tensor({1, 2})), c = h;
  for (int step = 0; step < 20; ++step) {
    auto in = t2.constant(testing::random_tensor(rng, {1, 3}, 10.0));
    auto st = nn::lstm_step(bound, in, h, c);
    h = st.h;
    c = st.c;
    for (auto v : h.value().data()) {
      CHECK(v > -1.0);
      CHECK(v < 1.0);
    }
  }

  // tape-free step agrees with the taped one
  ad::Matrix xm(1, 3);
  xm << 0.3, -0.1, 0.7;
  ad::Matrix hm = ad::Matrix::Zero(1, 2), cm = ad::Matrix::Zero(1, 2);
  nn::lstm_step_inplace(params, xm, hm, cm);
  Tape t3;
  auto b3 = nn::bind(t3, params);
  auto z = t3.constant(Tensor({1, 2}));
  auto st = nn::lstm_step(b3, t3.constant(Tensor::from_matrix(xm)), z, z);
  CHECK(st.h.value()[0] == doctest::Approx(hm(0, 0)).epsilon(1e-14));
  CHECK(st.c.value()[1] == doctest::Approx(cm(0, 1)).epsilon(1e-14));
}

TEST_CASE("adam") {
  Tensor w({2}, {0.5, -0.5});
  w.set_requires_grad(true);
  std::vector<Tensor*> ps{&w};
  nn::AdamState idle({1e-3, 0.9, 0.999, 1e-8, 0.0}, ps);
  nn::adam_step(idle, ps);
  CHECK(w[0] == 0.5);
  CHECK(w[1] == -0.5);

  w.grad()[0] = 3.0;
  w.grad()[1] = -0.01;
  nn::AdamState first({1e-3, 0.9, 0.999, 1e-8, 0.0}, ps);
  nn::adam_step(first, ps);
  CHECK(w[0] == doctest::Approx(0.5 - 1e-3).epsilon(1e-6));
  CHECK(w[1] == doctest::Approx(-0.5 + 1e-3).epsilon(1e-4));

  Tensor s({1}, {1.0});
  s.set_requires_grad(true);
  std::vector<Tensor*> sp{&s};
  nn::AdamState st({0.1, 0.9, 0.999, 1e-8, 0.0}, sp);
  for (int i = 0; i < 3; ++i) {
    s.grad()[0] = 2.0 * s[0];
    nn::adam_step(st, sp);
  }
  CHECK(std::abs(s[0]) < 1.0);

  Tensor d({1}, {2.0});
  d.set_requires_grad(true);
  std::vector<Tensor*> dp{&d};
  nn::AdamState decay({0.1, 0.9, 0.999, 1e-8, 0.5}, dp);
  nn::adam_step(decay, dp);
  CHECK(d[0] == doctest::Approx(2.0 * (1 - 0.05)));
}

TEST_CASE("gradient clipping") {
  Tensor a({2}), b({1});
  a.grad()[0] = 3.0;
  a.grad()[1] = 0.0;
  b.grad()[0] = 4.0;
  std::vector<Tensor*> ps{&a, &b};
  CHECK(nn::clip_grad_norm(ps, 10.0) == doctest::Approx(5.0));
  CHECK(a.grad()[0] == 3.0);
  CHECK(nn::clip_grad_norm(ps, 1.0) == doctest::Approx(5.0));
  CHECK(a.grad()[0] == doctest::Approx(0.6));
  CHECK(b.grad()[0] == doctest::Approx(0.8));
}

TEST_CASE("checkpoint round trip") {
  testing::TempDir dir("ckpt");
  std::mt19937_64 rng(1);
  std::vector<nn::NamedTensor> entries{{"a", testing::random_tensor(rng, {2, 3})},
                                       {"b", testing::random_tensor(rng, {4})}};
  nn::save_checkpoint(dir.path() / "m.ckpt", entries);
  auto back = nn::load_checkpoint(dir.path() / "m.ckpt");
  REQUIRE(back.size() == 2);
  CHECK(back[0].name == "a");
  CHECK(back[0].tensor.shape() == entries[0].tensor.shape());
  for (std::size_t i = 0; i < 6; ++i) CHECK(back[0].tensor[i] == entries[0].tensor[i]);
  CHECK(back[1].tensor.shape() == ad::Shape{4});

  auto bytes = testing::read_file(dir.path() / "m.ckpt");
  testing::write_file(dir.path() / "cut.ckpt", bytes.substr(0, bytes.size() - 5));
  CHECK_THROWS_AS(nn::load_checkpoint(dir.path() / "cut.ckpt"), Error);
}
