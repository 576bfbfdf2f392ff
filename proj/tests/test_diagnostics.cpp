#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "gls/datagen.hpp"
#include "gls/diagnostics.hpp"
#include "gls/error.hpp"
#include "support/random.hpp"

namespace gls {
namespace {

const double kLn2 = std::log(2.0);

template <typename F>
Errc code_of(F&& f) {
  try {
    f();
  } catch (const Error& e) {
    return e.code();
  }
  ADD_FAILURE() << "no gls::Error thrown";
  return Errc::IoError;
}

Eigen::MatrixXd random_confusion(std::mt19937_64& rng, int k) {
  Eigen::MatrixXd m(k, k);
  for (int y = 0; y < k; ++y) {
    const auto row = testing::random_simplex(rng, static_cast<std::size_t>(k));
    for (int j = 0; j < k; ++j) m(y, j) = row[static_cast<std::size_t>(j)];
  }
  return m;
}

TEST(Ber, Examples) {
  EXPECT_EQ(balanced_error_rate(Eigen::MatrixXd::Identity(3, 3)), 0.0);
  Eigen::MatrixXd c(2, 2);
  c << 0.9, 0.1, 0.3, 0.7;
  EXPECT_NEAR(balanced_error_rate(c), 0.3, 1e-15);
}

TEST(Ber, DigitThreeRow) {
  // A class that is right 63.33% of the time contributes 0.3667.
  Eigen::MatrixXd c = Eigen::MatrixXd::Identity(10, 10);
  c(3, 3) = 0.6333;
  c(3, 5) = 0.3667;
  EXPECT_NEAR(balanced_error_rate(c), 0.3667, 1e-12);
}

TEST(Ber, Malformed) {
  Eigen::MatrixXd c(2, 2);
  c << 0.5, 0.4, 0.0, 1.0;
  EXPECT_EQ(code_of([&] { balanced_error_rate(c); }), Errc::MalformedConfusion);
  EXPECT_EQ(code_of([] { balanced_error_rate(Eigen::MatrixXd::Identity(2, 3)); }), Errc::MalformedConfusion);
}

TEST(ConditionalErrorGap, Examples) {
  std::mt19937_64 rng(1);
  const auto c = random_confusion(rng, 4);
  EXPECT_EQ(conditional_error_gap(c, c), 0.0);
  Eigen::MatrixXd a(2, 2), b(2, 2);
  a << 0.9, 0.1, 0.2, 0.8;
  b << 0.6, 0.4, 0.2, 0.8;
  EXPECT_NEAR(conditional_error_gap(a, b), 0.3, 1e-15);
}

TEST(ConditionalErrorGap, ExhaustiveOracle) {
  std::mt19937_64 rng(2);
  for (int t = 0; t < 200; ++t) {
    const int k = 2 + static_cast<int>(rng() % 6);
    const auto a = random_confusion(rng, k);
    const auto b = random_confusion(rng, k);
    double oracle = 0.0;
    for (int y = 0; y < k; ++y)
      for (int yp = 0; yp < k; ++yp)
        if (y != yp) oracle = std::max(oracle, std::fabs(a(y, yp) - b(y, yp)));
    EXPECT_EQ(conditional_error_gap(a, b), oracle);
  }
}

TEST(ConfusionRows, Counts) {
  const std::vector<int> labels{0, 0, 1, 1, 1, 2};
  const std::vector<int> preds{0, 1, 1, 1, 0, 2};
  const auto c = confusion_rows(labels, preds, 3);
  EXPECT_DOUBLE_EQ(c(0, 0), 0.5);
  EXPECT_DOUBLE_EQ(c(1, 0), 1.0 / 3.0);
  EXPECT_DOUBLE_EQ(c(2, 2), 1.0);
}

TEST(GlsGap, IdenticalSetsAreZero) {
  std::mt19937_64 rng(3);
  const Eigen::MatrixXd f = testing::random_matrix(rng, 300, 2);
  std::vector<int> labels(300);
  for (int i = 0; i < 300; ++i) labels[static_cast<std::size_t>(i)] = i % 3;
  const auto gap = gls_conditional_gap(f, labels, f, labels, 3);
  for (int y = 0; y < 3; ++y) {
    EXPECT_EQ(gap.raw[static_cast<std::size_t>(y)], 0.0);
    EXPECT_EQ(gap.corrected[static_cast<std::size_t>(y)], 0.0);
  }
}

TEST(GlsGap, DisjointSupportsAreOne) {
  std::mt19937_64 rng(4);
  const Eigen::MatrixXd a = testing::random_matrix(rng, 400, 2, 0.1);
  const Eigen::MatrixXd b = (testing::random_matrix(rng, 400, 2, 0.1).array() + 5.0).matrix();
  const std::vector<int> labels(400, 0);
  HistogramSpec spec;
  spec.min_count = 1;
  const auto gap = gls_conditional_gap(a, labels, b, labels, 1, spec);
  EXPECT_NEAR(gap.raw[0], 1.0, 1e-12);
  EXPECT_GT(gap.corrected[0], 0.8);
}

TEST(GlsGap, SameGaussianWithinPermutationNoise) {
  std::mt19937_64 rng(5);
  const Eigen::MatrixXd a = testing::random_matrix(rng, 2500, 2);
  const Eigen::MatrixXd b = testing::random_matrix(rng, 2500, 2);
  std::vector<int> la(2500), lb(2500);
  for (int i = 0; i < 2500; ++i) la[static_cast<std::size_t>(i)] = lb[static_cast<std::size_t>(i)] = i % 2;
  const auto gap = gls_conditional_gap(a, la, b, lb, 2);
  for (int y = 0; y < 2; ++y) {
    // The raw estimate is pure binning noise; the baseline explains it.
    EXPECT_GT(gap.raw[static_cast<std::size_t>(y)], 0.0);
    EXPECT_LT(gap.corrected[static_cast<std::size_t>(y)], 0.03);
  }
}

TEST(GlsGap, LabelShiftPairOnIdentityFeatures) {
  DomainSpec s;
  s.k = 3;
  s.label_dist = {0.6, 0.2, 0.2};
  s.n = 5000;
  s.seed = 11;
  DomainSpec t = s;
  t.label_dist = {0.2, 0.2, 0.6};
  t.seed = 12;
  const auto src = make_gaussian_domain(s);
  const auto tgt = make_gaussian_domain(t);
  const auto gap = gls_conditional_gap(src.features, src.labels, tgt.features, tgt.labels, 3);
  EXPECT_LT(gap.max_corrected(), 0.05);
}

TEST(GlsGap, InsufficientSamples) {
  const Eigen::MatrixXd f = Eigen::MatrixXd::Zero(10, 2);
  const std::vector<int> labels(10, 0);
  EXPECT_EQ(code_of([&] { gls_conditional_gap(f, labels, f, labels, 1); }), Errc::InsufficientSamples);
}

TEST(LowerBound, Examples) {
  auto r = check_lower_bound(0.0, 0.0, 0.05, 0.05);
  EXPECT_EQ(r.rhs, 0.0);
  EXPECT_TRUE(r.holds);

  r = check_lower_bound(0.03, 0.03, 0.1, 0.0, 0.0);
  EXPECT_NEAR(r.rhs, 0.05, 1e-15);
  EXPECT_TRUE(r.holds);
  r = check_lower_bound(0.02, 0.02, 0.1, 0.0, 0.0);
  EXPECT_FALSE(r.holds);

  EXPECT_FALSE(check_lower_bound(0.1, 0.1, 0.0, 0.0).applicable);
  EXPECT_FALSE(check_lower_bound(0.1, 0.1, 0.01, 0.02).applicable);
}

TEST(ErrorDecomposition, Examples) {
  auto r = check_error_decomposition(0.1, 0.1, 0.0, 0.2, 0.0, 3);
  EXPECT_EQ(r.lhs, 0.0);
  EXPECT_EQ(r.rhs, 0.0);
  EXPECT_TRUE(r.holds);
  r = check_error_decomposition(0.1, 0.2, 0.8, 0.25, 0.0, 3);
  EXPECT_NEAR(r.rhs, 0.2, 1e-15);
  r = check_error_decomposition(0.1, 0.2, 0.8, 0.25, 0.01, 3);
  EXPECT_NEAR(r.rhs, 0.24, 1e-15);
}

TEST(JointError, Examples) {
  auto r = check_joint_error_bound(0.0, 0.0, 0.0, 0.0);
  EXPECT_TRUE(r.holds);
  EXPECT_TRUE(r.applicable);
  r = check_joint_error_bound(0.5, 0.5, 0.5, 0.0, 0.1, 0.0);
  EXPECT_TRUE(r.holds);
  EXPECT_EQ(r.slack, 0.0);
  EXPECT_FALSE(check_joint_error_bound(0.5, 0.5, 0.1, 0.3).applicable);
  EXPECT_FALSE(check_joint_error_bound(0.5, 0.5, 0.1, std::nan("")).applicable);
}

TEST(Sufficiency, Examples) {
  const Categorical p_t(std::vector<double>{0.2, 0.2, 0.6});
  const WeightVector w(std::vector<double>{1.0 / 3.0, 1.0, 3.0});
  auto r = check_sufficiency_bound(0.0, 0.0, w, p_t, 0.0, 0.0);
  EXPECT_EQ(r.rhs, 0.0);
  EXPECT_TRUE(r.holds);

  r = check_sufficiency_bound(0.1, 0.1, w, p_t, 0.02, 0.5);
  EXPECT_NEAR(r.component("rhs_raw"), 4.0, 1e-12);
  EXPECT_EQ(r.rhs, 1.0);
  EXPECT_EQ(r.component("gamma"), 0.2);
  EXPECT_EQ(r.component("w_max"), 3.0);

  EXPECT_EQ(code_of([&] {
              check_sufficiency_bound(0.1, 0.1, WeightVector::ones(2), Categorical(std::vector<double>{1.0, 0.0}),
                                      0.0, 0.0);
            }),
            Errc::DegenerateGamma);
}

TEST(DiscriminatorOptimum, Examples) {
  const Categorical p(std::vector<double>{0.1, 0.2, 0.3, 0.4});
  auto r = check_discriminator_optimum(p, p);
  EXPECT_NEAR(r.lhs, 2.0 * kLn2, 1e-12);
  EXPECT_TRUE(r.holds);

  const Categorical a(std::vector<double>{0.5, 0.5, 0.0, 0.0});
  const Categorical b(std::vector<double>{0.0, 0.0, 0.5, 0.5});
  r = check_discriminator_optimum(a, b);
  EXPECT_NEAR(r.lhs, 0.0, 1e-12);
  EXPECT_NEAR(r.rhs, 0.0, 1e-12);
  EXPECT_TRUE(r.holds);
}

TEST(DiscriminatorOptimum, RandomPairs) {
  std::mt19937_64 rng(6);
  for (int t = 0; t < 100; ++t) {
    const std::size_t bins = 2 + rng() % 30;
    auto pv = testing::random_simplex(rng, bins);
    auto qv = testing::random_simplex(rng, bins);
    if (t % 3 == 0) pv[rng() % bins] = 0.0;
    const auto r = check_discriminator_optimum(Categorical::normalize(pv), Categorical::normalize(qv), rng());
    EXPECT_TRUE(r.holds) << r.lhs << " vs " << r.rhs;
    EXPECT_GT(r.component("perturbed_min_excess"), 0.0);
  }
}

TEST(WeightContraction, Examples) {
  const WeightVector truth(std::vector<double>{0.5, 1.0, 2.0});
  const WeightVector prev(std::vector<double>{1.0, 1.0, 1.0});
  auto c = check_weight_contraction(prev, truth, truth);
  EXPECT_EQ(c.fraction, 1.0);
  c = check_weight_contraction(prev, prev, truth);
  EXPECT_EQ(c.fraction, 1.0);
  c = check_weight_contraction(prev, WeightVector(std::vector<double>{0.2, 1.0, 1.5}), truth);
  EXPECT_EQ(c.per_class, (std::vector<bool>{true, true, true}));
  c = check_weight_contraction(prev, WeightVector(std::vector<double>{1.6, 1.0, 1.5}), truth);
  EXPECT_EQ(c.per_class, (std::vector<bool>{false, true, true}));
  EXPECT_NEAR(c.fraction, 2.0 / 3.0, 1e-15);
  EXPECT_EQ(code_of([&] { check_weight_contraction(prev, WeightVector::ones(2), truth); }), Errc::LengthMismatch);
}

// The suite evaluates the statements on empirical measures, so random
// predictors on random data must satisfy every applicable bound without slack.
TEST(BoundSuite, HoldsForArbitraryPredictors) {
  std::mt19937_64 rng(7);
  for (int t = 0; t < 30; ++t) {
    const int k = 2 + static_cast<int>(rng() % 4);
    SuiteInput in;
    in.k = k;
    const int ns = 300 + static_cast<int>(rng() % 300), nt = 300 + static_cast<int>(rng() % 300);
    in.feats_src = testing::random_matrix(rng, ns, 3);
    in.feats_tgt = testing::random_matrix(rng, nt, 3);
    const auto ps = testing::random_simplex(rng, static_cast<std::size_t>(k), 0.3);
    const auto pt = testing::random_simplex(rng, static_cast<std::size_t>(k), 0.3);
    std::discrete_distribution<int> ds(ps.begin(), ps.end()), dt(pt.begin(), pt.end());
    const double acc = std::uniform_real_distribution<double>(0.2, 1.0)(rng);
    std::bernoulli_distribution right(acc);
    for (int i = 0; i < ns; ++i) {
      in.labels_src.push_back(i < k ? i : ds(rng));
      in.pred_src.push_back(right(rng) ? in.labels_src.back() : static_cast<int>(rng() % k));
    }
    for (int i = 0; i < nt; ++i) {
      in.labels_tgt.push_back(i < k ? i : dt(rng));
      in.pred_tgt.push_back(right(rng) ? in.labels_tgt.back() : static_cast<int>(rng() % k));
    }
    SuiteOptions opts;
    opts.slack = 1e-12;
    for (const auto& r : run_bound_suite(in, opts)) {
      if (r.name == "joint_error") continue;  // needs GLS
      if (r.applicable) EXPECT_TRUE(r.holds) << r.name << " trial " << t << ": " << r.lhs << " vs " << r.rhs;
    }
  }
}

}  // namespace
}  // namespace gls
