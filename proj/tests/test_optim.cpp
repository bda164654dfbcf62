#include <gtest/gtest.h>

#include <cmath>

#include "mdcnn/adam.hpp"
#include "mdcnn/loss.hpp"

#include "test_util.hpp"

using mdcnn::AdamStateT;
using mdcnn::TensorT;

namespace {

/// Textbook Adam recurrence for a single scalar, coded independently of the
/// library implementation.
struct TextbookAdam {
  double m = 0, v = 0;
  int t = 0;
  double step(double theta, double g, double lr, double b1, double b2, double eps) {
    ++t;
    m = b1 * m + (1 - b1) * g;
    v = b2 * v + (1 - b2) * g * g;
    const double mhat = m / (1 - std::pow(b1, t));
    const double vhat = v / (1 - std::pow(b2, t));
    return theta - lr * mhat / (std::sqrt(vhat) + eps);
  }
};

template <typename T>
struct ScalarParam {
  TensorT<T> theta;
  AdamStateT<T> state;

  explicit ScalarParam(T value, double lr) : theta({1}, value) {
    state = mdcnn::make_adam_state<T>({{"theta", &theta}}, lr);
  }

  void step(T grad) {
    const TensorT<T> g({1}, grad);
    mdcnn::adam_step<T>({{"theta", &theta}}, {{"theta", &g}}, state);
  }
};

}  // namespace

TEST(Adam, ZeroGradientLeavesParamsUnchanged) {
  ScalarParam<float> p(1.25f, 1e-3);
  p.step(0.0f);
  EXPECT_EQ(p.theta[0], 1.25f);
  EXPECT_EQ(p.state.t, 1);
}

TEST(Adam, FirstStepIsBiasCorrectedUnitStep) {
  ScalarParam<double> p(0.0, 1e-3);
  p.step(0.1);
  // With bias correction the first step is lr * g / (|g| + eps'), i.e. a
  // unit-magnitude step of lr * sign(g).
  EXPECT_NEAR(p.theta[0], -1e-3, 1e-6);
}

TEST(Adam, HundredStepsOnQuadraticMatchTextbookRecurrence) {
  ScalarParam<double> p(1.0, 0.1);
  TextbookAdam oracle;
  double theta_oracle = 1.0;
  for (int step = 0; step < 100; ++step) {
    const double g_lib = 2.0 * p.theta[0];
    const double g_ora = 2.0 * theta_oracle;
    p.step(g_lib);
    theta_oracle = oracle.step(theta_oracle, g_ora, 0.1, 0.9, 0.999, 1e-8);
    ASSERT_NEAR(p.theta[0], theta_oracle, 1e-9) << "diverged at step " << step;
  }
  EXPECT_LT(std::abs(p.theta[0]), 0.05);
}

TEST(Adam, ScaleEquivariantWithTinyEpsilon) {
  ScalarParam<double> a(1.0, 0.01);
  ScalarParam<double> b(1.0, 0.01);
  a.state.eps = 1e-12;
  b.state.eps = 1e-12;
  a.step(0.3);
  b.step(0.3 * 1000.0);
  EXPECT_NEAR(a.theta[0], b.theta[0], 1e-6);
}

TEST(Adam, FiniteInputsNeverProduceNaN) {
  for (const double g : {1e-30, 1e-10, 1.0, 1e6, -1e6, -1e-30}) {
    ScalarParam<float> p(0.5f, 1e-3);
    for (int i = 0; i < 3; ++i) p.step(static_cast<float>(g));
    EXPECT_TRUE(std::isfinite(p.theta[0])) << "g = " << g;
    EXPECT_GE(p.state.v[0][0], 0.0f);
  }
}

TEST(Adam, SecondMomentStaysNonNegative) {
  mdcnn::Rng rng(4);
  ScalarParam<double> p(0.0, 1e-2);
  for (int i = 0; i < 50; ++i) {
    p.step(2.0 * rng.next_real() - 1.0);
    EXPECT_GE(p.state.v[0][0], 0.0);
  }
  EXPECT_EQ(p.state.t, 50);
}

TEST(Adam, RejectsBadInputs) {
  ScalarParam<float> p(1.0f, 1e-3);
  const TensorT<float> wrong({2}, 0.0f);
  EXPECT_THROW(
      (mdcnn::adam_step<float>({{"theta", &p.theta}}, {{"theta", &wrong}}, p.state)),
      std::invalid_argument);

  TensorT<float> poisoned({1}, 0.0f);
  poisoned[0] = std::numeric_limits<float>::infinity();
  const TensorT<float>& bad = poisoned;
  EXPECT_THROW((mdcnn::adam_step<float>({{"theta", &p.theta}}, {{"theta", &bad}}, p.state)),
               std::runtime_error);
}

TEST(Bce, LogHalfAtZeroLogit) {
  for (const int y : {0, 1}) {
    const auto r = mdcnn::bce_loss_from_logit(0.0, y);
    EXPECT_NEAR(r.loss, std::log(2.0), 1e-12);
    EXPECT_NEAR(std::abs(r.dloss_dz), 0.5, 1e-12);
  }
}

TEST(Bce, SaturatedCorrectLogitHasTinyLossWithoutOverflow) {
  const auto right = mdcnn::bce_loss_from_logit(100.0, 1);
  EXPECT_TRUE(std::isfinite(right.loss));
  EXPECT_LE(right.loss, 1e-8);
  const auto left = mdcnn::bce_loss_from_logit(-100.0, 0);
  EXPECT_TRUE(std::isfinite(left.loss));
  EXPECT_LE(left.loss, 1e-8);
}

TEST(Bce, LossIsNonNegativeAndGradBounded) {
  for (double z = -30.0; z <= 30.0; z += 0.61) {
    for (const int y : {0, 1}) {
      const auto r = mdcnn::bce_loss_from_logit(z, y);
      EXPECT_GE(r.loss, 0.0);
      EXPECT_NEAR(r.dloss_dz, mdcnn::sigmoid(z) - y, 1e-15);
      EXPECT_LT(std::abs(r.dloss_dz), 1.0);
    }
  }
}

TEST(Bce, GradientMatchesCentralDifferences) {
  const double h = 1e-6;
  for (const double z : {-3.0, -1.0, 0.0, 1.0, 3.0}) {
    for (const int y : {0, 1}) {
      const double numeric = (mdcnn::bce_loss_from_logit(z + h, y).loss -
                              mdcnn::bce_loss_from_logit(z - h, y).loss) /
                             (2 * h);
      const double analytic = mdcnn::bce_loss_from_logit(z, y).dloss_dz;
      const double rel = std::abs(analytic - numeric) /
                         std::max(std::abs(analytic), std::abs(numeric));
      EXPECT_LE(rel, 1e-6) << "z=" << z << " y=" << y;
    }
  }
}

TEST(Bce, RejectsBadLabelsAndLogits) {
  EXPECT_THROW(mdcnn::bce_loss_from_logit(0.0, 2), std::invalid_argument);
  EXPECT_THROW(mdcnn::bce_loss_from_logit(std::nan(""), 1), std::invalid_argument);
}

TEST(BatchLossAcc, HalfProbabilitiesPredictAnimal) {
  const TensorT<float> probs({3}, 0.5f);
  const auto r = mdcnn::batch_loss_acc(probs, {0, 1, 0});
  EXPECT_NEAR(r.mean_loss, std::log(2.0), 1e-6);
  // All predictions are Animal (tie rule), so accuracy counts the zeros.
  EXPECT_NEAR(r.accuracy, 2.0 / 3.0, 1e-12);
}

TEST(BatchLossAcc, PerfectProbabilitiesScoreOne) {
  const TensorT<float> probs({4}, {1.0f, 1e-6f, 1.0f, 0.0f});
  const auto r = mdcnn::batch_loss_acc(probs, {1, 0, 1, 0});
  EXPECT_EQ(r.accuracy, 1.0);
  EXPECT_LT(r.mean_loss, 1e-5);
}

TEST(BatchLossAcc, HandEnumeratedAccuracy) {
  const TensorT<float> probs({4}, {0.9f, 0.2f, 0.6f, 0.4f});
  const auto r = mdcnn::batch_loss_acc(probs, {1, 0, 0, 1});
  // Decisions: 1, 0, 1, 0 against 1, 0, 0, 1 -> two correct.
  EXPECT_EQ(r.accuracy, 0.5);
}

TEST(BatchLossAcc, RejectsEmptyAndMismatched) {
  EXPECT_THROW(mdcnn::batch_loss_acc(TensorT<float>({1}, 0.5f), {}), std::invalid_argument);
  TensorT<float> empty;
  EXPECT_THROW(mdcnn::batch_loss_acc(empty, {}), std::invalid_argument);
  EXPECT_THROW(mdcnn::batch_loss_acc(TensorT<float>({1}, 0.5f), {2}), std::invalid_argument);
}

TEST(DecisionRule, TieGoesToAnimalAndFlipsAcrossHalf) {
  EXPECT_EQ(mdcnn::predict_label(0.5f), 0);
  EXPECT_EQ(mdcnn::predict_label(std::nextafter(0.5f, 1.0f)), 1);
  EXPECT_EQ(mdcnn::predict_label(std::nextafter(0.5f, 0.0f)), 0);
  EXPECT_EQ(mdcnn::predict_label(0.9f), 1);
  EXPECT_EQ(mdcnn::predict_label(0.1f), 0);
}

TEST(BatchLossAcc, LogitPathAgreesWithProbabilityPath) {
  mdcnn::Rng rng(9);
  const int n = 32;
  std::vector<float> logits;
  std::vector<int> labels;
  TensorT<float> probs({n}, 0.0f);
  for (int i = 0; i < n; ++i) {
    const float z = static_cast<float>(6.0 * rng.next_real() - 3.0);
    logits.push_back(z);
    probs[i] = mdcnn::sigmoid(z);
    labels.push_back(static_cast<int>(rng.next_index(2)));
  }
  const auto from_probs = mdcnn::batch_loss_acc(probs, labels);
  const auto from_logits = mdcnn::batch_loss_acc_from_logits(logits, labels);
  EXPECT_EQ(from_probs.accuracy, from_logits.accuracy);
  EXPECT_NEAR(from_probs.mean_loss, from_logits.mean_loss, 1e-5);
}
