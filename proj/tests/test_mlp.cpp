#include <gtest/gtest.h>

#include <array>
#include <cmath>

#include "art/checkpoint.hpp"
#include "art/mlp.hpp"
#include "test_support.hpp"

namespace mlp = art::mlp;
using art::testing::central_difference;
using art::testing::relative_error;

namespace {

mlp::DenseNet zero_net(std::vector<std::size_t> dims, mlp::Head head) {
  art::Rng rng(1);
  auto net = mlp::init_net(dims, head, rng);
  for (auto& l : net.layers) l.weight.setZero();
  return net;
}

}  // namespace

TEST(InitNet, WeightShapesFollowDims) {
  art::Rng rng(1);
  const std::array<std::size_t, 5> dims{4, 3, 3, 3, 2};
  const auto net = mlp::init_net(dims, mlp::Head::kSimplex, rng);
  ASSERT_EQ(net.layers.size(), 4u);
  EXPECT_EQ(net.layers[0].weight.rows(), 4);
  EXPECT_EQ(net.layers[0].weight.cols(), 3);
  EXPECT_EQ(net.layers[1].weight.rows(), 3);
  EXPECT_EQ(net.layers[3].weight.cols(), 2);
  for (const auto& l : net.layers) EXPECT_EQ(l.bias.squaredNorm(), 0.0);
}

TEST(InitNet, SameSeedGivesIdenticalWeights) {
  const std::array<std::size_t, 5> dims{6, 5, 4, 3, 2};
  art::Rng a(17), b(17);
  EXPECT_EQ(mlp::init_net(dims, mlp::Head::kSquash, a), mlp::init_net(dims, mlp::Head::kSquash, b));
}

TEST(InitNet, DegenerateScalarNet) {
  art::Rng rng(2);
  const std::array<std::size_t, 5> dims{1, 1, 1, 1, 1};
  const auto net = mlp::init_net(dims, mlp::Head::kSquash, rng);
  ASSERT_EQ(net.layers.size(), 4u);
  for (const auto& l : net.layers) {
    EXPECT_EQ(l.weight.size(), 1);
    EXPECT_EQ(l.bias(0), 0.0);
    EXPECT_LE(std::abs(l.weight(0, 0)), std::sqrt(3.0));
  }
}

TEST(InitNet, GlorotRange) {
  art::Rng rng(3);
  const std::array<std::size_t, 2> dims{200, 100};
  const auto net = mlp::init_net(dims, mlp::Head::kSquash, rng);
  const double limit = std::sqrt(6.0 / 300.0);
  EXPECT_LE(net.layers[0].weight.cwiseAbs().maxCoeff(), limit);
  EXPECT_NEAR(net.layers[0].weight.mean(), 0.0, 0.01);
  // Variance of U(-a, a) is a^2 / 3.
  EXPECT_NEAR(net.layers[0].weight.squaredNorm() / 20000.0, limit * limit / 3.0, 0.05 * limit * limit);
}

TEST(InitNet, RejectsZeroDims) {
  art::Rng rng(1);
  const std::array<std::size_t, 3> dims{3, 0, 2};
  EXPECT_THROW(mlp::init_net(dims, mlp::Head::kSimplex, rng), art::Error);
}

TEST(Forward, ZeroWeightsSimplexIsUniform) {
  const auto net = zero_net({5, 4, 4, 4, 4}, mlp::Head::kSimplex);
  const auto y = mlp::forward(net, Eigen::VectorXd::Random(5)).output;
  for (int r = 0; r < 4; ++r) EXPECT_DOUBLE_EQ(y(r, 0), 0.25);
}

TEST(Forward, ZeroWeightsSquashIsOneHalf) {
  const auto net = zero_net({3, 2, 2, 2, 3}, mlp::Head::kSquash);
  const auto y = mlp::forward(net, Eigen::Vector3d(1, -2, 3)).output;
  for (int r = 0; r < 3; ++r) EXPECT_DOUBLE_EQ(y(r, 0), 0.5);
}

TEST(Forward, HandComputedOneLayerNet) {
  mlp::DenseNet net;
  net.dims = {2, 2};
  net.head = mlp::Head::kSimplex;
  Eigen::MatrixXd w(2, 2);
  w << 1.0, 2.0,  //
      3.0, 4.0;
  net.layers.push_back({w, Eigen::Vector2d(0.5, -0.5)});
  // Input (1, 0): logits are row 0 of w plus bias = (1.5, 1.5), so the output is uniform.
  auto y = mlp::forward(net, Eigen::Vector2d(1, 0)).output;
  EXPECT_DOUBLE_EQ(y(0, 0), 0.5);
  net.layers[0].bias = Eigen::Vector2d(0.0, 1.0);
  y = mlp::forward(net, Eigen::Vector2d(1, 0)).output;  // logits (1, 3) now
  EXPECT_NEAR(y(1, 0), 1.0 / (1.0 + std::exp(-2.0)), 1e-15);

  net.head = mlp::Head::kSquash;
  y = mlp::forward(net, Eigen::Vector2d(1, 0)).output;
  EXPECT_NEAR(y(0, 0), 1.0 / (1.0 + std::exp(-1.0)), 1e-15);
  EXPECT_NEAR(y(1, 0), 1.0 / (1.0 + std::exp(-3.0)), 1e-15);
}

TEST(Forward, HiddenLayerUsesRectifiedLinearUnits) {
  mlp::DenseNet net;
  net.dims = {1, 2, 1};
  net.head = mlp::Head::kSquash;
  net.layers.push_back({Eigen::MatrixXd{{1.0, -1.0}}, Eigen::Vector2d(0, 0)});
  net.layers.push_back({Eigen::MatrixXd{{1.0}, {1.0}}, Eigen::VectorXd::Zero(1)});
  // Hidden = relu(2, -2) = (2, 0); output = sigmoid(2).
  EXPECT_NEAR(mlp::forward(net, Eigen::VectorXd::Constant(1, 2.0)).output(0, 0), 1.0 / (1.0 + std::exp(-2.0)), 1e-15);
}

TEST(Forward, RejectsNonFiniteInputAndWrongSize) {
  const auto net = zero_net({2, 2, 2}, mlp::Head::kSimplex);
  EXPECT_THROW(mlp::forward(net, Eigen::Vector2d(1, std::nan(""))), art::Error);
  EXPECT_THROW(mlp::forward(net, Eigen::Vector3d(1, 2, 3)), art::Error);
}

TEST(Forward, DeterministicAndHeadInvariants) {
  art::Rng rng(4);
  const std::array<std::size_t, 5> dims{6, 8, 8, 8, 5};
  const auto simplex = mlp::init_net(dims, mlp::Head::kSimplex, rng);
  const auto squash = mlp::init_net(dims, mlp::Head::kSquash, rng);
  const Eigen::MatrixXd x = Eigen::MatrixXd::Random(6, 10) * 3.0;
  const auto a = mlp::forward_batch(simplex, x).output;
  EXPECT_EQ(a, mlp::forward_batch(simplex, x).output);
  for (Eigen::Index c = 0; c < a.cols(); ++c) EXPECT_NEAR(a.col(c).sum(), 1.0, 1e-9);
  const auto b = mlp::forward_batch(squash, x).output;
  EXPECT_GT(b.minCoeff(), 0.0);
  EXPECT_LT(b.maxCoeff(), 1.0);
}

TEST(Forward, SimplexHeadIgnoresConstantLogitShift) {
  art::Rng rng(5);
  const std::array<std::size_t, 3> dims{4, 6, 3};
  auto net = mlp::init_net(dims, mlp::Head::kSimplex, rng);
  const Eigen::Vector4d x(0.3, -1.0, 2.0, 0.5);
  const auto before = mlp::forward(net, x).output;
  net.layers.back().bias.array() += 123.456;
  const auto after = mlp::forward(net, x).output;
  EXPECT_LE((before - after).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(Forward, SimplexHeadIsStableForHugeLogits) {
  mlp::DenseNet net;
  net.dims = {1, 2};
  net.head = mlp::Head::kSimplex;
  net.layers.push_back({Eigen::MatrixXd{{1000.0, 999.0}}, Eigen::Vector2d(0, 0)});
  const auto y = mlp::forward(net, Eigen::VectorXd::Constant(1, 1.0)).output;
  EXPECT_TRUE(y.allFinite());
  EXPECT_NEAR(y(0, 0), 1.0 / (1.0 + std::exp(-1.0)), 1e-12);
}

// Finite-difference check of backward() for random nets and inputs.
TEST(Backward, MatchesFiniteDifferencesOnFuzzCases) {
  art::Rng rng(2024);
  int checked = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const auto head = trial % 2 == 0 ? mlp::Head::kSimplex : mlp::Head::kSquash;
    std::vector<std::size_t> dims{1 + rng.uniform_index(4), 2 + rng.uniform_index(4), 2 + rng.uniform_index(4),
                                  2 + rng.uniform_index(4), 2 + rng.uniform_index(3)};
    auto net = mlp::init_net(dims, head, rng);
    for (auto& l : net.layers)
      for (Eigen::Index i = 0; i < l.bias.size(); ++i) l.bias(i) = rng.uniform(-0.5, 0.5);
    Eigen::MatrixXd x(static_cast<Eigen::Index>(dims.front()), 2);
    for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.uniform(-2.0, 2.0);
    Eigen::MatrixXd up(static_cast<Eigen::Index>(dims.back()), 2);
    for (Eigen::Index i = 0; i < up.size(); ++i) up.data()[i] = rng.uniform(-1.0, 1.0);

    auto objective = [&] { return (mlp::forward_batch(net, x).output.array() * up.array()).sum(); };
    const auto grads = mlp::backward(net, mlp::forward_batch(net, x), up);
    const auto flat = mlp::flatten(grads);
    const auto params = mlp::parameter_pointers(net);
    ASSERT_EQ(flat.size(), params.size());
    for (std::size_t i = 0; i < params.size(); ++i) {
      const double fd = central_difference(params[i], 1e-5, objective);
      EXPECT_LT(relative_error(flat[i], fd), 1e-4) << "trial " << trial << " parameter " << i;
      ++checked;
    }
    for (Eigen::Index i = 0; i < x.size(); ++i) {
      const double fd = central_difference(x.data() + i, 1e-5, objective);
      EXPECT_LT(relative_error(grads.input.data()[i], fd), 1e-4) << "trial " << trial << " input " << i;
    }
  }
  EXPECT_GT(checked, 1000);
}

TEST(Backward, ZeroUpstreamGivesZeroGradients) {
  art::Rng rng(6);
  const std::array<std::size_t, 4> dims{3, 4, 4, 2};
  const auto net = mlp::init_net(dims, mlp::Head::kSquash, rng);
  const auto cache = mlp::forward(net, Eigen::Vector3d(1, 2, 3));
  const auto g = mlp::backward(net, cache, Eigen::MatrixXd::Zero(2, 1));
  for (double v : mlp::flatten(g)) EXPECT_EQ(v, 0.0);
  EXPECT_EQ(g.input.squaredNorm(), 0.0);
}

TEST(Backward, SimplexHeadWithUpstreamEqualToOutputIsShiftInvariant) {
  // Adding a constant to every logit leaves the output unchanged, so the
  // gradient with respect to the last bias sums to zero.
  art::Rng rng(7);
  const std::array<std::size_t, 3> dims{3, 5, 4};
  const auto net = mlp::init_net(dims, mlp::Head::kSimplex, rng);
  const auto cache = mlp::forward(net, Eigen::Vector3d(0.2, -0.4, 1.0));
  const auto g = mlp::backward(net, cache, cache.output);
  EXPECT_NEAR(g.layers.back().bias.sum(), 0.0, 1e-14);
}

TEST(Backward, ShapeMismatchIsAnError) {
  const auto net = zero_net({2, 2, 3}, mlp::Head::kSimplex);
  const auto cache = mlp::forward(net, Eigen::Vector2d(1, 1));
  EXPECT_THROW(mlp::backward(net, cache, Eigen::MatrixXd::Zero(2, 1)), art::Error);
}

TEST(Adam, FirstStepWithConstantGradientMovesByLearningRate) {
  art::Rng rng(8);
  const std::array<std::size_t, 3> dims{2, 3, 2};
  auto net = mlp::init_net(dims, mlp::Head::kSquash, rng);
  const auto before = net;
  auto state = mlp::make_optimizer(net, 1e-3);
  auto g = mlp::zero_gradients(net);
  for (auto& l : g.layers) {
    l.weight.setConstant(0.7);
    l.bias.setConstant(-2.0);
  }
  mlp::adam_step(state, net, g);
  EXPECT_EQ(state.step, 1);
  // m_hat = g and v_hat = g^2, so the step is -lr * g / (|g| + eps).
  const double w_step = 1e-3 * 0.7 / (0.7 + 1e-8);
  const double b_step = 1e-3 * 2.0 / (2.0 + 1e-8);
  for (std::size_t l = 0; l < net.layers.size(); ++l) {
    EXPECT_NEAR((before.layers[l].weight - net.layers[l].weight).maxCoeff(), w_step, 1e-15);
    EXPECT_NEAR((net.layers[l].bias - before.layers[l].bias).minCoeff(), b_step, 1e-15);
  }
}

TEST(Adam, ZeroGradientLeavesParametersAndCountsTheStep) {
  art::Rng rng(9);
  const std::array<std::size_t, 3> dims{2, 3, 2};
  auto net = mlp::init_net(dims, mlp::Head::kSquash, rng);
  const auto before = net;
  auto state = mlp::make_optimizer(net, 1e-2);
  mlp::adam_step(state, net, mlp::zero_gradients(net));
  EXPECT_EQ(net, before);
  EXPECT_EQ(state.step, 1);
}

TEST(Adam, RejectsNonFiniteAndMismatchedGradients) {
  art::Rng rng(10);
  const std::array<std::size_t, 3> dims{2, 3, 2};
  auto net = mlp::init_net(dims, mlp::Head::kSquash, rng);
  auto state = mlp::make_optimizer(net, 1e-2);
  auto g = mlp::zero_gradients(net);
  g.layers[1].bias(0) = std::numeric_limits<double>::infinity();
  EXPECT_THROW(mlp::adam_step(state, net, g), art::Error);
  g = mlp::zero_gradients(net);
  g.layers.pop_back();
  EXPECT_THROW(mlp::adam_step(state, net, g), art::Error);
}

TEST(Adam, IdenticalRunsHaveIdenticalTrajectories) {
  auto run = [] {
    art::Rng rng(11);
    const std::array<std::size_t, 4> dims{3, 5, 4, 2};
    auto net = mlp::init_net(dims, mlp::Head::kSimplex, rng);
    auto state = mlp::make_optimizer(net, 1e-2);
    for (int step = 0; step < 20; ++step) {
      Eigen::Vector3d x(rng.normal(), rng.normal(), rng.normal());
      const auto cache = mlp::forward(net, x);
      mlp::adam_step(state, net, mlp::backward(net, cache, Eigen::Vector2d(1.0, -1.0)));
    }
    return std::pair{net, state};
  };
  const auto a = run();
  const auto b = run();
  EXPECT_EQ(a.first, b.first);
  EXPECT_EQ(a.second, b.second);
  for (const auto& l : a.second.moments.second) EXPECT_GE(l.weight.minCoeff(), 0.0);
}

TEST(Checkpoint, NetAndOptimizerRoundTripBitExactly) {
  art::Rng rng(12);
  const std::array<std::size_t, 4> dims{3, 5, 4, 2};
  auto net = mlp::init_net(dims, mlp::Head::kSquash, rng);
  auto state = mlp::make_optimizer(net, 1e-3);
  mlp::adam_step(state, net, mlp::backward(net, mlp::forward(net, Eigen::Vector3d(1, 2, 3)), Eigen::Vector2d(1, 1)));

  art::TensorArchive ar;
  mlp::save(net, ar, "net");
  mlp::save(state, ar, "opt");
  ar.put_text("note", "hello world\nwith newline");
  const auto back = art::TensorArchive::deserialize(ar.serialize());
  EXPECT_EQ(mlp::load_net(back, "net"), net);
  EXPECT_EQ(mlp::load_optimizer(back, "opt", net.layers.size()), state);
  EXPECT_EQ(back.text("note"), "hello world\nwith newline");
  EXPECT_EQ(back.serialize(), ar.serialize());
}

TEST(Checkpoint, ManifestIsReadableText) {
  art::TensorArchive ar;
  ar.put("b.tensor", Eigen::MatrixXd::Identity(2, 3));
  ar.put_text("a.text", "xyz");
  const auto blob = ar.serialize();
  EXPECT_EQ(blob.rfind("ART-CHECKPOINT 1\ntext a.text 0 3\ntensor b.tensor 2 3 3\nend\n", 0), 0u);
  EXPECT_THROW(art::TensorArchive::deserialize("garbage"), art::Error);
  EXPECT_THROW(ar.tensor("missing"), art::Error);
}
