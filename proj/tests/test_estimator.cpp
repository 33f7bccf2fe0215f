#include <random>

#include "abair/estimator.hpp"
#include "doctest.h"
#include "oracles.hpp"

namespace es = abair::estimator;
using abair::img::Image;

TEST_CASE("zero network outputs the head bias") {
  const int widths[] = {8, 8};
  auto net = es::make_net(3, widths, 5);
  net.head_bias = {0.1f, -0.2f, 0.3f, 0.0f, 2.0f};
  std::mt19937_64 gen(1);
  const auto logits = es::forward(net, oracle::random_image(gen, 20, 24, 3));
  REQUIRE(logits.size() == 5);
  for (int i = 0; i < 5; ++i) CHECK(logits[i] == static_cast<double>(net.head_bias[i]));
}

TEST_CASE("hand-traced toy network") {
  // One 1->1 block: conv taps center=1 and right=1, bias -1; BN gamma 2,
  // beta 0.5, mean 1, var 3, eps 1 reduces to y - 0.5. Only the bottom row
  // survives the ReLU ([1/16, 3/16, 5/16, 0]); pooling keeps 3/16 and 5/16,
  // so GAP = 1/8.
  const int widths[] = {1};
  auto net = es::make_net(1, widths, 2);
  auto& b = net.blocks[0];
  b.weight[4] = 1.0f;
  b.weight[5] = 1.0f;
  b.bias[0] = -1.0f;
  b.gamma[0] = 2.0f;
  b.beta[0] = 0.5f;
  b.mean[0] = 1.0f;
  b.var[0] = 3.0f;
  b.eps = 1.0;
  net.head_weight = {0.5f, -1.0f};
  net.head_bias = {1.0f, 0.0f};
  Image x(4, 4, 1);
  for (int r = 0; r < 4; ++r)
    for (int c = 0; c < 4; ++c) x.at(r, c) = (4 * r + c) / 16.0;
  const auto logits = es::forward(net, x);
  CHECK(logits[0] == doctest::Approx(1.0625).epsilon(1e-15));
  CHECK(logits[1] == doctest::Approx(-0.125).epsilon(1e-15));
}

TEST_CASE("forward matches the straight-line oracle") {
  std::mt19937_64 gen(42);
  const std::vector<std::vector<int>> configs{{4}, {6, 5}, {8, 12, 6}, {5, 7, 9, 11}};
  for (const auto& widths : configs) {
    for (int trial = 0; trial < 3; ++trial) {
      const auto net = oracle::random_net(gen, 3, widths, 5);
      const auto im = oracle::random_image(gen, 19 + trial * 7, 23 + trial * 5, 3);
      const auto got = es::forward(net, im);
      const auto want = oracle::estimator_forward(net, im);
      for (std::size_t i = 0; i < got.size(); ++i) {
        CHECK(std::abs(got[i] - want[i]) <= 1e-5 * std::max(1.0, std::abs(want[i])));
      }
    }
  }
}

TEST_CASE("softmax") {
  const std::vector<double> z{std::log(1.0), std::log(2.0), std::log(3.0)};
  const auto p = es::softmax(z);
  CHECK(p[0] == doctest::Approx(1.0 / 6).epsilon(1e-14));
  CHECK(p[1] == doctest::Approx(2.0 / 6).epsilon(1e-14));
  CHECK(p[2] == doctest::Approx(3.0 / 6).epsilon(1e-14));

  const auto big = es::softmax(std::vector<double>{1000.0, 1000.0});
  CHECK(big[0] == 0.5);
  const auto shifted = es::softmax(std::vector<double>{1001.0, 1002.0, 1003.0});
  const auto base = es::softmax(std::vector<double>{1.0, 2.0, 3.0});
  for (int i = 0; i < 3; ++i) CHECK(shifted[i] == doctest::Approx(base[i]).epsilon(1e-14));

  std::mt19937_64 gen(2);
  std::normal_distribution<double> n(0.0, 20.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> l(5);
    for (auto& v : l) v = n(gen);
    const auto q = es::softmax(l);
    double s = 0.0;
    for (double v : q) {
      CHECK(v >= 0.0);
      s += v;
    }
    CHECK(s == doctest::Approx(1.0).epsilon(1e-12));
  }
  CHECK_THROWS_AS(es::softmax(std::vector<double>{1.0, std::nan("")}), es::EstimatorError);
  CHECK_THROWS_AS(es::softmax(std::vector<double>{}), es::EstimatorError);
}

TEST_CASE("policy vectors") {
  const std::vector<double> p{0.1, 0.4, 0.1, 0.4};
  CHECK(es::policy_vector(p, es::PolicyMode::kSoftWeights) == p);
  const auto oh = es::policy_vector(p, es::PolicyMode::kOneHot);
  CHECK(oh == std::vector<double>{0, 1, 0, 0});
  CHECK(es::policy_vector(oh, es::PolicyMode::kOneHot) == oh);
}

TEST_CASE("logits are invariant to pool-aligned translation of an interior patch") {
  std::mt19937_64 gen(5);
  const auto net = oracle::random_net(gen, 3, {4, 6}, 3);
  const auto patch = oracle::random_image(gen, 6, 6, 3);
  auto place = [&](int r0, int c0) {
    Image im(48, 48, 3, 0.25);
    for (int r = 0; r < 6; ++r)
      for (int c = 0; c < 6; ++c)
        for (int k = 0; k < 3; ++k) im.at(r0 + r, c0 + c, k) = patch.at(r, c, k);
    return im;
  };
  const auto a = es::forward(net, place(12, 12));
  const auto b = es::forward(net, place(24, 16));
  for (std::size_t i = 0; i < a.size(); ++i) CHECK(a[i] == doctest::Approx(b[i]).epsilon(1e-12));
}

TEST_CASE("shape contract and errors") {
  std::mt19937_64 gen(7);
  const auto net = oracle::random_net(gen, 3, {3, 3, 3, 3}, 5);
  CHECK(es::min_input_size(net) == 16);
  std::uniform_int_distribution<int> side(16, 256);
  for (int trial = 0; trial < 12; ++trial) {
    const auto logits = es::forward(net, oracle::random_image(gen, side(gen), side(gen), 3));
    CHECK(logits.size() == 5);
    for (double v : logits) CHECK(std::isfinite(v));
  }
  CHECK_THROWS_AS(es::forward(net, Image(15, 64, 3)), es::EstimatorError);
  CHECK_THROWS_AS(es::forward(net, Image(32, 32, 1)), es::EstimatorError);

  auto broken = net;
  broken.blocks[1].var[0] = 0.0f;
  CHECK_THROWS_AS(es::validate(broken), es::EstimatorError);
  broken = net;
  broken.head_bias.pop_back();
  CHECK_THROWS_AS(es::validate(broken), es::EstimatorError);
}

TEST_CASE("weights round trip through tensors") {
  std::mt19937_64 gen(9);
  auto net = oracle::random_net(gen, 3, {4, 5}, 6);
  net.blocks[1].eps = 1e-3;
  const auto bytes = abair::tensorio::encode_tensors(es::net_to_tensors(net));
  const auto back = es::net_from_tensors(abair::tensorio::decode_tensors(bytes));
  const auto im = oracle::random_image(gen, 16, 16, 3);
  CHECK(es::forward(back, im) == es::forward(net, im));
  CHECK(back.blocks[1].eps == 1e-3);

  auto tensors = es::net_to_tensors(net);
  std::erase_if(tensors, [](const auto& t) { return t.name == "block0.bn.eps"; });
  CHECK(es::net_from_tensors(tensors).blocks[0].eps == es::kDefaultBnEps);
  std::erase_if(tensors, [](const auto& t) { return t.name == "head.b"; });
  CHECK_THROWS_AS(es::net_from_tensors(tensors), es::EstimatorError);
}

TEST_CASE("default architecture size") {
  const auto net = es::make_net(3, es::kDefaultWidths, 5);
  CHECK(net.parameter_count() == 516613);
  CHECK(es::min_input_size(net) == 16);
}
