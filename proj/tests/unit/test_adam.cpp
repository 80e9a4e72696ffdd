#include <gtest/gtest.h>

#include <cmath>

#include "pmseg/adam.hpp"
#include "pmseg/error.hpp"

using namespace pmseg;

TEST(Adam, FirstStepMovesByLearningRate) {
  std::vector<Tensor> params{Tensor({4}, std::vector<double>{1.0, -2.0, 0.5, 3.0})};
  const std::vector<Tensor> grads{Tensor({4}, std::vector<double>{0.3, -5.0, 1e-3, -0.02})};
  AdamState st = AdamState::for_params(params, 1e-3);
  const std::vector<double> before = params[0].values();
  adam_step(params, grads, st);
  EXPECT_EQ(st.step, 1u);
  for (std::size_t i = 0; i < 4; ++i) {
    const double moved = before[i] - params[0][i];
    // m_hat = g and v_hat = g^2, so the step is lr * g / (|g| + eps).
    EXPECT_NEAR(moved, 1e-3 * std::copysign(1.0, grads[0][i]), 1e-3 * 1e-4) << i;
  }
}

TEST(Adam, ZeroGradientLeavesParamsUnchanged) {
  std::vector<Tensor> params{Tensor({3}, std::vector<double>{1.0, 2.0, 3.0})};
  const std::vector<Tensor> grads{Tensor({3}, 0.0)};
  AdamState st = AdamState::for_params(params);
  for (int i = 0; i < 5; ++i) adam_step(params, grads, st);
  EXPECT_EQ(params[0].values(), (std::vector<double>{1.0, 2.0, 3.0}));
}

TEST(Adam, NonFiniteGradientRejectedWithoutSideEffects) {
  std::vector<Tensor> params{Tensor({2}, 1.0), Tensor({1}, 2.0)};
  AdamState st = AdamState::for_params(params);
  adam_step(params, {Tensor({2}, 0.1), Tensor({1}, 0.1)}, st);
  const auto saved_params = params;
  const AdamState saved_state = st;
  EXPECT_THROW(adam_step(params, {Tensor({2}, 0.1), Tensor({1}, std::nan(""))}, st), NumericalError);
  EXPECT_EQ(params, saved_params);
  EXPECT_EQ(st, saved_state);
}

TEST(Adam, ShapeMismatchRejected) {
  std::vector<Tensor> params{Tensor({2}, 1.0)};
  AdamState st = AdamState::for_params(params);
  EXPECT_THROW(adam_step(params, {Tensor({3}, 0.1)}, st), std::invalid_argument);
  EXPECT_THROW(adam_step(params, {}, st), std::invalid_argument);
}

TEST(Adam, IdenticalRunsAreBitIdentical) {
  auto run = [] {
    std::vector<Tensor> params{Tensor({3}, std::vector<double>{0.1, 0.2, 0.3})};
    AdamState st = AdamState::for_params(params, 1e-2);
    for (int i = 0; i < 50; ++i) {
      Tensor g({3});
      for (std::size_t j = 0; j < 3; ++j) g[j] = std::sin(params[0][j] * (i + 1));
      adam_step(params, {g}, st);
    }
    return params[0];
  };
  EXPECT_EQ(run(), run());
}
