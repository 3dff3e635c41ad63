#include <gtest/gtest.h>

#include <cmath>

#include "error.hpp"
#include "numkernel.hpp"
#include "oracles.hpp"
#include "rng.hpp"

using namespace geoconcept;

namespace {

Matrix random_matrix(std::size_t r, std::size_t c, Rng& rng) {
  Matrix m(r, c);
  for (double& v : m.values()) v = rng.normal();
  return m;
}

double max_abs_diff(const Matrix& a, const Matrix& b) {
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) worst = std::max(worst, std::abs(a[i] - b[i]));
  return worst;
}

}  // namespace

TEST(Matrix, ConstructionAndAccess) {
  const Matrix m = Matrix::from_rows({{1, 2, 3}, {4, 5, 6}});
  EXPECT_EQ(m.rows(), 2u);
  EXPECT_EQ(m.cols(), 3u);
  EXPECT_EQ(m(1, 2), 6.0);
  EXPECT_EQ(m.row(1)[0], 4.0);
  EXPECT_EQ(Matrix::identity(3)(1, 1), 1.0);
  EXPECT_EQ(Matrix::identity(3)(1, 2), 0.0);
  EXPECT_THROW(Matrix::from_rows({{1, 2}, {3}}), Error);
  EXPECT_THROW(Matrix(2, 2, std::vector<double>{1, 2, 3}), Error);
}

TEST(Matrix, ElementwiseOperators) {
  const Matrix a = Matrix::from_rows({{1, 2}, {3, 4}});
  const Matrix b = Matrix::from_rows({{0.5, 0.5}, {1, -1}});
  EXPECT_EQ(a + b, Matrix::from_rows({{1.5, 2.5}, {4, 3}}));
  EXPECT_EQ(a - b, Matrix::from_rows({{0.5, 1.5}, {2, 5}}));
  EXPECT_EQ(a * 2.0, Matrix::from_rows({{2, 4}, {6, 8}}));
  EXPECT_THROW(a + Matrix(2, 3), Error);
}

TEST(Matrix, NonFiniteDetected) {
  Matrix m(2, 2, 1.0);
  EXPECT_TRUE(m.all_finite());
  m(0, 1) = std::nan("");
  EXPECT_FALSE(m.all_finite());
}

TEST(Matmul, AgreesWithLongDoubleOracle) {
  Rng rng(1);
  for (int t = 0; t < 20; ++t) {
    const std::size_t n = 1 + rng.index(9), k = 1 + rng.index(9), m = 1 + rng.index(9);
    const Matrix a = random_matrix(n, k, rng);
    const Matrix b = random_matrix(k, m, rng);
    EXPECT_LT(max_abs_diff(matmul(a, b), oracle::matmul(a, b)), 1e-13);
    EXPECT_LT(max_abs_diff(matmul_tn(transpose(a), b), oracle::matmul(a, b)), 1e-13);
    EXPECT_LT(max_abs_diff(matmul_nt(a, transpose(b)), oracle::matmul(a, b)), 1e-13);
  }
}

TEST(Matmul, ShapeMismatchThrows) {
  try {
    matmul(Matrix(2, 3), Matrix(2, 3));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::kShape);
  }
}

TEST(Matmul, RepeatedCallsAreBitIdentical) {
  Rng rng(2);
  const Matrix a = random_matrix(17, 33, rng);
  const Matrix b = random_matrix(33, 5, rng);
  EXPECT_EQ(matmul(a, b), matmul(a, b));
}

TEST(VectorOps, NormsAndCosine) {
  const std::vector<double> v{3.0, 4.0};
  EXPECT_DOUBLE_EQ(l2_norm(v), 5.0);
  EXPECT_DOUBLE_EQ(sum_squares(v), 25.0);
  EXPECT_DOUBLE_EQ(dot(v, v), 25.0);
  std::vector<double> w = v;
  EXPECT_DOUBLE_EQ(normalize_in_place(w), 5.0);
  EXPECT_DOUBLE_EQ(w[0], 0.6);
  std::vector<double> z{0.0, 0.0};
  EXPECT_EQ(normalize_in_place(z), 0.0);
  EXPECT_EQ(z[0], 0.0);
  const std::vector<double> u{-3.0, -4.0};
  EXPECT_DOUBLE_EQ(cosine(v, u), -1.0);
}

TEST(FiniteDiff, MatchesKnownGradient) {
  // f(x) = sum x_i^3, df/dx_i = 3 x_i^2
  const Matrix theta = Matrix::from_rows({{0.5, -1.0, 2.0}});
  const Matrix g = finite_diff_grad(
      [](const Matrix& m) {
        double s = 0;
        for (double v : m.values()) s += v * v * v;
        return s;
      },
      theta, 1e-5);
  for (std::size_t i = 0; i < theta.size(); ++i) EXPECT_NEAR(g[i], 3 * theta[i] * theta[i], 1e-8);
}

TEST(GradCheck, ReportsWorstCoordinate) {
  const Matrix a = Matrix::from_rows({{1.0, 2.0, 3.0}});
  const Matrix n = Matrix::from_rows({{1.0, 2.2, 3.0}});
  const GradCheckReport r = grad_check(a, n, 1e-3);
  EXPECT_FALSE(r.passed);
  EXPECT_EQ(r.worst_param_index, 1u);
  EXPECT_NEAR(r.max_rel_error, 0.2 / 2.2, 1e-12);
  EXPECT_TRUE(grad_check(a, a, 1e-12).passed);
}

TEST(Rng, SeededStreamsRepeat) {
  Rng a(42), b(42), c(43);
  for (int i = 0; i < 10; ++i) {
    const double x = a.normal();
    EXPECT_EQ(x, b.normal());
    (void)c;
  }
  EXPECT_NE(Rng(42).next_u64(), Rng(43).next_u64());
  EXPECT_NE(derive_seed(1, 2), derive_seed(1, 3));
  EXPECT_EQ(derive_seed(1, 2), derive_seed(1, 2));
}

TEST(Rng, PermutationIsPermutation) {
  Rng rng(9);
  auto p = permutation(100, rng);
  std::sort(p.begin(), p.end());
  for (std::size_t i = 0; i < p.size(); ++i) EXPECT_EQ(p[i], i);
}

TEST(Rng, UniformAndIndexRanges) {
  Rng rng(4);
  for (int i = 0; i < 1000; ++i) {
    const double u = rng.uniform();
    EXPECT_GE(u, 0.0);
    EXPECT_LT(u, 1.0);
    EXPECT_LT(rng.index(7), 7u);
  }
}
