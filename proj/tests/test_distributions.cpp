#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "gls/distributions.hpp"
#include "gls/error.hpp"
#include "support/random.hpp"

namespace gls {
namespace {

const double kLn2 = std::log(2.0);

Categorical cat(std::initializer_list<double> v) { return Categorical(std::vector<double>(v)); }

TEST(Categorical, ValidatesConstruction) {
  EXPECT_NO_THROW(cat({0.25, 0.75}));
  EXPECT_THROW(cat({1.0}), Error);
  EXPECT_THROW(cat({0.6, 0.6}), Error);
  EXPECT_THROW(cat({-0.1, 1.1}), Error);
  // Within the 1e-9 tolerance but no silent renormalization.
  const auto c = cat({0.5 + 4e-10, 0.5});
  EXPECT_EQ(c[0], 0.5 + 4e-10);
}

TEST(Categorical, NormalizeRescales) {
  const std::vector<double> mass{1.0, 3.0};
  const auto c = Categorical::normalize(mass);
  EXPECT_DOUBLE_EQ(c[0], 0.25);
  EXPECT_DOUBLE_EQ(c[1], 0.75);
  EXPECT_THROW(Categorical::normalize(std::vector<double>{0.0, 0.0}), Error);
}

TEST(Kl, Examples) {
  const auto p = cat({0.2, 0.3, 0.5});
  EXPECT_EQ(kl(p, p), 0.0);
  // 0.5 ln 2 + 0.5 ln(2/3), evaluated independently.
  EXPECT_NEAR(kl(cat({0.5, 0.5}), cat({0.25, 0.75})), 0.14384103622589042, 1e-14);
  EXPECT_NEAR(kl(cat({1.0, 0.0}), cat({0.5, 0.5})), kLn2, 1e-15);
}

TEST(Kl, SupportMismatch) {
  try {
    kl(cat({0.5, 0.5}), cat({1.0, 0.0}));
    FAIL() << "expected SupportMismatch";
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::SupportMismatch);
  }
  // Zero mass in p where q is zero is fine.
  EXPECT_NEAR(kl(cat({1.0, 0.0}), cat({1.0, 0.0})), 0.0, 0.0);
}

TEST(Jsd, Examples) {
  const auto p = cat({0.1, 0.9});
  EXPECT_EQ(jsd(p, p), 0.0);
  EXPECT_NEAR(jsd(cat({1.0, 0.0}), cat({0.0, 1.0})), kLn2, 1e-15);
  // Term-by-term mixture-KL evaluation done outside this library.
  EXPECT_NEAR(jsd(cat({0.5, 0.5}), cat({0.9, 0.1})), 0.10174922507919676, 1e-14);
  EXPECT_NEAR(js_distance(cat({1.0, 0.0}), cat({0.0, 1.0})), std::sqrt(kLn2), 1e-15);
}

TEST(Jsd, LengthMismatch) {
  try {
    jsd(cat({0.5, 0.5}), cat({0.2, 0.3, 0.5}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::LengthMismatch);
  }
  EXPECT_THROW(l1_distance(cat({0.5, 0.5}), cat({0.2, 0.3, 0.5})), Error);
  EXPECT_THROW(tv_distance(cat({0.5, 0.5}), cat({0.2, 0.3, 0.5})), Error);
}

TEST(Distances, Examples) {
  const auto p = cat({0.3, 0.7});
  EXPECT_EQ(l1_distance(p, p), 0.0);
  EXPECT_EQ(l1_distance(cat({1.0, 0.0}), cat({0.0, 1.0})), 2.0);
  EXPECT_NEAR(l1_distance(p, cat({0.5, 0.5})), 0.4, 1e-15);
  EXPECT_EQ(tv_distance(p, p), 0.0);
  EXPECT_EQ(tv_distance(cat({1.0, 0.0}), cat({0.0, 1.0})), 1.0);
  EXPECT_NEAR(tv_distance(p, cat({0.5, 0.5})), 0.2, 1e-15);
}

TEST(EmpiricalLabelDist, Examples) {
  const std::vector<int> balanced{0, 0, 1, 1};
  EXPECT_EQ(empirical_label_dist(balanced, 2).probs(), (std::vector<double>{0.5, 0.5}));
  const std::vector<int> skewed{0, 0, 0, 1};
  EXPECT_EQ(empirical_label_dist(skewed, 2).probs(), (std::vector<double>{0.75, 0.25}));
}

TEST(EmpiricalLabelDist, Errors) {
  try {
    empirical_label_dist(std::vector<int>{}, 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::EmptyInput);
  }
  try {
    empirical_label_dist(std::vector<int>{0, 3}, 3);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), Errc::LabelOutOfRange);
  }
}

TEST(EmpiricalLabelDist, LawOfLargeNumbers) {
  std::mt19937_64 rng(2024);
  const auto truth = testing::random_categorical(rng, 10, 0.2);
  std::discrete_distribution<int> sampler(truth.probs().begin(), truth.probs().end());
  std::vector<int> labels(1000);
  for (int& y : labels) y = sampler(rng);
  const auto est = empirical_label_dist(labels, 10);
  for (std::size_t i = 0; i < 10; ++i) EXPECT_NEAR(est[i], truth[i], 0.05) << "class " << i;
}

// Property checks over random inputs, including sparse vectors with exact zeros.
class DivergenceProperties : public ::testing::Test {
 protected:
  Categorical draw() {
    auto v = testing::random_simplex(rng_, 2 + rng_() % 6);
    if (rng_() % 4 == 0) v[rng_() % v.size()] = 0.0;
    return Categorical::normalize(v);
  }
  Categorical draw_like(const Categorical& other) {
    auto v = testing::random_simplex(rng_, other.size());
    if (rng_() % 4 == 0) v[rng_() % v.size()] = 0.0;
    return Categorical::normalize(v);
  }
  std::mt19937_64 rng_{7};
};

TEST_F(DivergenceProperties, JsdSymmetricAndBounded) {
  for (int t = 0; t < 1000; ++t) {
    const auto p = draw();
    const auto q = draw_like(p);
    const double a = jsd(p, q);
    EXPECT_EQ(a, jsd(q, p));
    EXPECT_GE(a, 0.0);
    EXPECT_LE(a, kLn2);
  }
}

TEST_F(DivergenceProperties, SqrtJsdTriangleInequality) {
  for (int t = 0; t < 1000; ++t) {
    const auto p = draw();
    const auto q = draw_like(p);
    const auto r = draw_like(p);
    EXPECT_LE(js_distance(p, r), js_distance(p, q) + js_distance(q, r) + 1e-12);
  }
}

TEST_F(DivergenceProperties, TvBoundedByJsd) {
  for (int t = 0; t < 1000; ++t) {
    const auto p = draw();
    const auto q = draw_like(p);
    EXPECT_LE(tv_distance(p, q), std::sqrt(8.0 * jsd(p, q)) + 1e-12);
  }
}

}  // namespace
}  // namespace gls
