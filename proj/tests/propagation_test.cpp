#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "freezenet/propagation.hpp"
#include "support/oracles.hpp"

namespace freezenet {
namespace {

NetworkSpec mlp3() {
  return NetworkSpec("mlp3", {1, 1, 4},
                     {LayerSpec::linear(4, 3), LayerSpec::relu(), LayerSpec::linear(3, 3), LayerSpec::relu(),
                      LayerSpec::linear(3, 2), LayerSpec::log_softmax()},
                     2);
}

TEST(Forward, ZeroParamsGiveUniformLogProbs) {
  const NetworkSpec net = NetworkSpec::lenet5caffe();
  const ParamSet p(net.layout());
  std::mt19937_64 gen(1);
  const Tensor x = oracle::random_input(net, 3, gen).cast<float>();
  const Tensor out = predict(net, p, x);
  ASSERT_EQ(out.shape(), (Shape{3, 10}));
  for (float v : out.data()) EXPECT_FLOAT_EQ(v, std::log(0.1f));
}

TEST(Forward, SingleLinearHandArithmetic) {
  const NetworkSpec net("one", {1, 1, 1}, {LayerSpec::linear(1, 2), LayerSpec::log_softmax()}, 2);
  ParamSet64 p(net.layout());
  p.mutable_weights() = Tensor64(Shape{2}, std::vector<double>{2, 0});
  p.mutable_biases() = Tensor64(Shape{2}, std::vector<double>{1, 0});
  const auto fr = forward(net, p, Tensor64(Shape{1, 1}, std::vector<double>{3}));
  // Pre-softmax (7, 0): the log-prob gap recovers y = 7.
  EXPECT_DOUBLE_EQ(fr.cache.activations[1][0], 7.0);
  EXPECT_NEAR(fr.log_probs[0] - fr.log_probs[1], 7.0, 1e-12);
}

TEST(Forward, RejectsWrongInput) {
  const NetworkSpec net = mlp3();
  const ParamSet p(net.layout());
  EXPECT_THROW(predict(net, p, Tensor(Shape{2, 5})), DimensionError);
  EXPECT_THROW(predict(net, p, Tensor(Shape{0, 4})), DimensionError);
}

TEST(Backward, BiasGradientIsOutputGradient) {
  const NetworkSpec net("one", {1, 1, 3}, {LayerSpec::linear(3, 4), LayerSpec::log_softmax()}, 4);
  std::mt19937_64 gen(2);
  const ParamSet64 p = oracle::random_params(net, gen);
  const Tensor64 x = oracle::random_input(net, 1, gen);
  const std::vector<std::int32_t> y{2};
  const auto fr = forward(net, p, x);
  const auto g = backward<double>(net, p, fr.cache, y);
  for (std::size_t c = 0; c < 4; ++c) {
    const double dy = std::exp(fr.log_probs[c]) - (c == 2 ? 1.0 : 0.0);
    EXPECT_NEAR(g.biases[c], dy, 1e-15);
  }
}

TEST(Backward, MatchesFiniteDifferencesOnTenParameterNet) {
  const NetworkSpec net("ten", {1, 1, 1},
                        {LayerSpec::linear(1, 2), LayerSpec::relu(), LayerSpec::linear(2, 2), LayerSpec::log_softmax()},
                        2);
  ASSERT_EQ(net.layout().total(), 10u);
  std::mt19937_64 gen(3);
  for (int attempt = 0;; ++attempt) {
    ASSERT_LT(attempt, 50);
    const ParamSet64 p = oracle::random_params(net, gen);
    const Tensor64 x = oracle::random_input(net, 4, gen);
    const auto y = oracle::random_labels(net, 4, gen);
    const auto fr = forward(net, p, x);
    if (oracle::kink_margin(net, fr.cache) < 1e-3) continue;
    const auto g = backward<double>(net, p, fr.cache, y);
    const auto fd = oracle::fd_gradient(net, p, x, y, 1e-5);
    for (std::size_t i = 0; i < fd.weights.size(); ++i) EXPECT_LE(oracle::rel_err(g.weights[i], fd.weights[i]), 1e-4);
    for (std::size_t i = 0; i < fd.biases.size(); ++i) EXPECT_LE(oracle::rel_err(g.biases[i], fd.biases[i]), 1e-4);
    EXPECT_NEAR(g.loss, nll_loss(fr.log_probs, y), 1e-15);
    break;
  }
}

TEST(Backward, MatchesFiniteDifferencesOnRandomConvNets) {
  std::mt19937_64 gen(4);
  int checked = 0;
  while (checked < 6) {
    const NetworkSpec net = oracle::random_net(gen, 200);
    const ParamSet64 p = oracle::random_params(net, gen);
    const Tensor64 x = oracle::random_input(net, 3, gen);
    const auto y = oracle::random_labels(net, 3, gen);
    const auto fr = forward(net, p, x);
    if (oracle::kink_margin(net, fr.cache) < 1e-3) continue;
    const auto g = backward<double>(net, p, fr.cache, y);
    const auto fd = oracle::fd_gradient(net, p, x, y, 1e-5);
    for (std::size_t i = 0; i < fd.weights.size(); ++i) {
      ASSERT_LE(oracle::rel_err(g.weights[i], fd.weights[i]), 1e-4) << net.descriptor() << " w" << i;
    }
    for (std::size_t i = 0; i < fd.biases.size(); ++i) {
      ASSERT_LE(oracle::rel_err(g.biases[i], fd.biases[i]), 1e-4) << net.descriptor() << " b" << i;
    }
    ++checked;
  }
}

TEST(Backward, ZeroMiddleLayerStopsFlowBelow) {
  const NetworkSpec net = mlp3();
  std::mt19937_64 gen(5);
  ParamSet p = oracle::random_params(net, gen).cast<float>();
  for (float& w : p.mutable_layer_weights(1)) w = 0.0f;
  const Tensor x = oracle::random_input(net, 8, gen).cast<float>();
  const auto y = oracle::random_labels(net, 8, gen);
  const auto fr = forward(net, p, x);
  const auto g = backward<float>(net, p, fr.cache, y);
  for (std::size_t i = 0; i < net.layout().slices[0].weight_count; ++i) EXPECT_EQ(g.weights[i], 0.0f);
  // The layer above the zeroed one still learns.
  double above = 0;
  for (std::size_t i = net.layout().slices[2].weight_offset; i < g.weights.size(); ++i) above += std::abs(g.weights[i]);
  EXPECT_GT(above, 0.0);
}

TEST(Backward, MaskedEntriesBitIdenticalToDense) {
  const NetworkSpec net = NetworkSpec::lenet5caffe();
  RngStream s(1, RngPurpose::init);
  const ParamSet p = init_params<float>(net, InitScheme::xavier_normal, s);
  std::mt19937_64 gen(6);
  const Tensor x = oracle::random_input(net, 4, gen).cast<float>();
  const auto y = oracle::random_labels(net, 4, gen);
  const auto fr = forward(net, p, x);
  const auto dense = backward<float>(net, p, fr.cache, y);
  for (double density : {0.5, 0.01}) {
    std::vector<std::uint8_t> mask(net.layout().weight_count);
    std::bernoulli_distribution keep(density);
    for (auto& m : mask) m = keep(gen);
    const auto sparse = backward<float>(net, p, fr.cache, y, mask);
    for (std::size_t i = 0; i < mask.size(); ++i) {
      if (mask[i]) {
        ASSERT_EQ(std::bit_cast<std::uint32_t>(sparse.weights[i]), std::bit_cast<std::uint32_t>(dense.weights[i]));
      } else {
        ASSERT_EQ(sparse.weights[i], 0.0f);
      }
    }
    EXPECT_TRUE(sparse.biases.bitwise_equal(dense.biases));
  }
}

TEST(Backward, RejectsStaleCacheAndBadLabels) {
  const NetworkSpec net = mlp3();
  std::mt19937_64 gen(7);
  ParamSet p = oracle::random_params(net, gen).cast<float>();
  const Tensor x = oracle::random_input(net, 2, gen).cast<float>();
  const auto fr = forward(net, p, x);
  EXPECT_THROW(backward<float>(net, p, fr.cache, std::vector<std::int32_t>{0}), DimensionError);
  EXPECT_THROW(backward<float>(net, p, fr.cache, std::vector<std::int32_t>{0, 5}), ParameterError);
  p.mutable_weights()[0] += 1.0f;
  EXPECT_THROW(backward<float>(net, p, fr.cache, std::vector<std::int32_t>{0, 1}), UsageError);
}

TEST(Backward, FloatTracksDouble) {
  const NetworkSpec net = NetworkSpec::lenet300100();
  RngStream s(2, RngPurpose::init);
  const ParamSet p = init_params<float>(net, InitScheme::xavier_normal, s);
  std::mt19937_64 gen(8);
  const Tensor64 x64 = oracle::random_input(net, 5, gen);
  const auto y = oracle::random_labels(net, 5, gen);
  const ParamSet64 p64 = p.cast<double>();
  const auto f32 = forward(net, p, x64.cast<float>());
  const auto f64 = forward(net, p64, x64);
  const auto g32 = backward<float>(net, p, f32.cache, y);
  const auto g64 = backward<double>(net, p64, f64.cache, y);
  double worst = 0;
  for (std::size_t i = 0; i < g64.weights.size(); ++i) worst = std::max(worst, std::abs(g32.weights[i] - g64.weights[i]));
  EXPECT_LT(worst, 1e-5);
}

TEST(Metrics, CountCorrectTiesPickLowestIndex) {
  const Tensor lp = Tensor::matrix({{-1, -1, -2}, {-3, -0.5f, -0.5f}});
  EXPECT_EQ(count_correct(lp, std::vector<std::int32_t>{0, 1}), 2u);
  EXPECT_EQ(count_correct(lp, std::vector<std::int32_t>{1, 2}), 0u);
  EXPECT_DOUBLE_EQ(nll_loss(lp, std::vector<std::int32_t>{2, 1}), 1.25);
  EXPECT_THROW(nll_loss(lp, std::vector<std::int32_t>{}), DimensionError);
}

}  // namespace
}  // namespace freezenet
