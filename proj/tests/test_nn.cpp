#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <vector>

#include "dscd/nn.hpp"
#include "oracles.hpp"

using namespace dscd;

TEST(Softmax, EqualLogitsAreUniform) {
  const std::vector<double> z{3.0, 3.0, 3.0, 3.0};
  for (double p : softmax(z)) EXPECT_DOUBLE_EQ(p, 0.25);
}

TEST(Softmax, LogThreeGapGivesQuarterThreeQuarters) {
  const std::vector<double> z{0.0, std::log(3.0)};
  const auto p = softmax(z);
  EXPECT_NEAR(p[0], 0.25, 1e-15);
  EXPECT_NEAR(p[1], 0.75, 1e-15);
}

TEST(Softmax, NormalisedAndPositiveForExtremeLogits) {
  Rng rng = make_stream(11, "softmax-property");
  for (int trial = 0; trial < 500; ++trial) {
    std::vector<double> z(1 + trial % 12);
    for (double& v : z) v = uniform(rng, -300.0, 300.0);
    const auto p = softmax(z);
    const double sum = std::accumulate(p.begin(), p.end(), 0.0);
    EXPECT_NEAR(sum, 1.0, 1e-9);
    // exp underflows below ~-745, so with a 600-wide spread every entry stays positive
    for (double v : p) EXPECT_GT(v, 0.0);
  }
}

TEST(Softmax, MaskedEntriesGetZeroAndRestRenormalise) {
  const std::vector<double> z{1.0, 2.0, 3.0};
  const auto p = masked_softmax(z, {true, false, true});
  EXPECT_EQ(p[1], 0.0);
  EXPECT_NEAR(p[0] + p[2], 1.0, 1e-15);
  EXPECT_NEAR(p[2] / p[0], std::exp(2.0), 1e-12);
  EXPECT_THROW(masked_softmax(z, {false, false, false}), ConfigError);
  EXPECT_THROW(masked_softmax(z, {true}), ConfigError);
}

TEST(FeedForward, ForwardMatchesScriptedOracle) {
  Rng rng = make_stream(5, "forward-oracle");
  auto net = FeedForwardNet::uniform_init({6, 9, 5, 4}, {Activation::tanh, Activation::relu, Activation::softmax}, rng);
  for (auto& l : net.layers())
    for (double& b : l.bias) b = uniform(rng, -0.3, 0.3);
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<double> x(6);
    for (double& v : x) v = uniform(rng, -1.0, 1.0);
    const auto got = net.forward(x);
    const auto want = oracle::forward(net, x);
    ASSERT_EQ(got.size(), want.size());
    for (std::size_t i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-12);
  }
}

TEST(FeedForward, WrongInputWidthThrows) {
  FeedForwardNet net({3, 2}, {Activation::identity});
  EXPECT_THROW(net.forward(std::vector<double>{1.0, 2.0}), ConfigError);
}

TEST(FeedForward, InitialWeightsRespectFanInBound) {
  Rng rng = make_stream(2, "init");
  auto net = FeedForwardNet::uniform_init({16, 30, 3}, {Activation::tanh, Activation::softmax}, rng);
  for (const auto& l : net.layers()) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(l.in));
    for (double w : l.weights) EXPECT_LE(std::abs(w), bound);
    for (double b : l.bias) EXPECT_EQ(b, 0.0);
  }
}

TEST(Backprop, LinearLayerWeightGradientIsOuterProduct) {
  FeedForwardNet net({3, 2}, {Activation::identity});
  const std::vector<double> x{0.5, -2.0, 3.0};
  const std::vector<double> g{1.5, -0.25};
  const auto grad = net.backward(net.trace(x), g);
  for (std::size_t o = 0; o < 2; ++o) {
    for (std::size_t i = 0; i < 3; ++i) EXPECT_DOUBLE_EQ(grad[0].weights[o * 3 + i], g[o] * x[i]);
    EXPECT_DOUBLE_EQ(grad[0].bias[o], g[o]);
  }
}

TEST(Backprop, ZeroInputGivesZeroFirstLayerWeightGradient) {
  Rng rng = make_stream(9, "zero-input");
  auto net = FeedForwardNet::uniform_init({4, 7, 3}, {Activation::tanh, Activation::softmax}, rng);
  const std::vector<double> x(4, 0.0);
  const auto grad = net.backward(net.trace(x), std::vector<double>{1.0, -1.0, 0.5});
  for (double w : grad[0].weights) EXPECT_EQ(w, 0.0);
}

TEST(Backprop, SeededThreeLayerNetsMatchFiniteDifferences) {
  const std::vector<std::vector<Activation>> shapes{
      {Activation::tanh, Activation::tanh, Activation::identity},
      {Activation::tanh, Activation::relu, Activation::softmax},
      {Activation::identity, Activation::tanh, Activation::softmax},
  };
  Rng rng = make_stream(17, "fd-three-layer");
  for (const auto& acts : shapes) {
    auto net = FeedForwardNet::uniform_init({5, 8, 6, 3}, acts, rng);
    for (auto& l : net.layers())
      for (double& b : l.bias) b = uniform(rng, -0.2, 0.2);
    ASSERT_LE(net.parameter_count(), 1000u);
    std::vector<double> x(5);
    for (double& v : x) v = uniform(rng, -1.0, 1.0);
    const std::vector<double> c{0.7, -1.3, 0.4};
    auto loss = [&](const FeedForwardNet& n) {
      const auto y = n.forward(x);
      return c[0] * y[0] + c[1] * y[1] + c[2] * y[2];
    };
    const auto grad = net.backward(net.trace(x), c);
    EXPECT_LT(oracle::max_fd_relative_error(net, grad, loss), 1e-4);
  }
}

TEST(Backprop, FactoredUpdateMatchesMaterialisedGradient) {
  Rng rng = make_stream(23, "factored");
  auto a = FeedForwardNet::uniform_init({7, 12, 4}, {Activation::tanh, Activation::softmax}, rng);
  auto b = a;
  std::vector<double> x(7);
  for (double& v : x) v = uniform(rng, -1.0, 1.0);
  const std::vector<double> dz{0.3, -0.1, -0.5, 0.3};
  const auto tr = a.trace(x);
  const auto full = a.backward_from_preactivation(tr, dz);
  const auto deltas = b.layer_deltas(tr, dz);
  EXPECT_NEAR(FeedForwardNet::factored_squared_norm(tr, deltas), squared_norm(full), 1e-12);

  a.apply(full, 0.05);
  b.apply_factored(tr, deltas, 0.05);
  const auto pa = a.flat_parameters(), pb = b.flat_parameters();
  for (std::size_t i = 0; i < pa.size(); ++i) EXPECT_NEAR(pa[i], pb[i], 1e-14);
}

TEST(Backprop, ClipGlobalNormRescalesOnlyAboveThreshold) {
  Gradient g(1);
  g[0].weights = {3.0, 4.0};
  g[0].bias = {0.0};
  clip_global_norm(g, 10.0);
  EXPECT_DOUBLE_EQ(g[0].weights[1], 4.0);
  clip_global_norm(g, 1.0);
  EXPECT_NEAR(std::sqrt(squared_norm(g)), 1.0, 1e-15);
  EXPECT_NEAR(g[0].weights[0], 0.6, 1e-15);
}

TEST(Checkpoint, JsonRoundTripIsExact) {
  Rng rng = make_stream(31, "checkpoint");
  auto net = FeedForwardNet::uniform_init({4, 5, 2}, {Activation::tanh, Activation::softmax}, rng);
  const auto back = net_from_json(nlohmann::json::parse(to_json(net).dump()));
  EXPECT_EQ(back, net);
}

TEST(Checkpoint, MismatchedDimsRejected) {
  FeedForwardNet net({2, 2}, {Activation::identity});
  auto j = to_json(net);
  j["layers"][0]["weights"].push_back(1.0);
  EXPECT_THROW(net_from_json(j), ConfigError);
}
