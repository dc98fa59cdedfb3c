#include <doctest.h>

#include <cmath>
#include <random>

#include "modad/detectors.hpp"
#include "modad/rng.hpp"
#include "oracles.hpp"

using namespace modad;

namespace {

Matrix gaussian_cloud(int n, int d, std::uint64_t seed, double scale = 1.0) {
  Rng rng(seed);
  std::normal_distribution<double> nd(0.0, scale);
  Matrix x(n, d);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = nd(rng);
  return x;
}

oracle::Mat to_mat(const Matrix& x) {
  oracle::Mat m(static_cast<std::size_t>(x.rows()), std::vector<double>(static_cast<std::size_t>(x.cols())));
  for (Eigen::Index i = 0; i < x.rows(); ++i)
    for (Eigen::Index j = 0; j < x.cols(); ++j) m[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)] = x(i, j);
  return m;
}

std::vector<double> row(const Matrix& x, Eigen::Index i) { return {x.row(i).data(), x.row(i).data() + x.cols()}; }

}  // namespace

TEST_CASE("rbf kernel value") {
  const std::vector<double> a{0.0, 0.0}, b{1.0, 0.0}, c{1.0, 1.0};
  CHECK(rbf_kernel(a, b, 1.0) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
  CHECK(rbf_kernel(a, c, 0.5) == doctest::Approx(std::exp(-1.0)).epsilon(1e-15));
  CHECK(rbf_kernel(a, a, 3.0) == 1.0);
  CHECK_THROWS_AS(rbf_kernel(a, std::vector<double>{1.0}, 1.0), ShapeError);
  CHECK_THROWS_AS(rbf_kernel(a, b, 0.0), ValidationError);
}

TEST_CASE("gram matrix agrees with the pointwise kernel") {
  const Matrix x = gaussian_cloud(9, 3, 4);
  const Matrix k = rbf_gram(x, 0.7);
  const auto ref = oracle::rbf_gram(to_mat(x), 0.7);
  for (Eigen::Index i = 0; i < 9; ++i)
    for (Eigen::Index j = 0; j < 9; ++j)
      CHECK(k(i, j) == doctest::Approx(ref[static_cast<std::size_t>(i)][static_cast<std::size_t>(j)]).epsilon(1e-12));
}

TEST_CASE("default gamma is 1 / (E * mean variance)") {
  Matrix x(4, 2);
  x << 0, 0, 2, 0, 0, 4, 2, 4;
  // Population variances 1 and 4, mean 2.5.
  CHECK(default_gamma(x) == doctest::Approx(1.0 / (2.0 * 2.5)));
  CHECK(default_gamma(Matrix::Ones(3, 2)) == 1.0);
}

TEST_CASE("two identical points split the mass evenly") {
  Matrix x(2, 2);
  x << 1.0, 2.0, 1.0, 2.0;
  const OcsvmModel m = fit_ocsvm(x, 0.5, KernelSpec{1.0});
  REQUIRE(m.alphas.size() == 2);
  CHECK(m.alphas[0] == doctest::Approx(0.5));
  CHECK(m.alphas[1] == doctest::Approx(0.5));
  CHECK(m.offset == doctest::Approx(1.0));
  CHECK(ocsvm_score(m, row(x, 0)) == doctest::Approx(0.0).scale(1.0));
}

TEST_CASE("corners of a square get equal weight") {
  Matrix x(4, 2);
  x << 0, 0, 1, 0, 0, 1, 1, 1;
  const OcsvmModel m = fit_ocsvm(x, 0.5, KernelSpec{1.0});
  REQUIRE(m.alphas.size() == 4);
  for (double a : m.alphas) CHECK(a == doctest::Approx(0.25).epsilon(1e-6));
  // Each corner sees one point at distance 0, two at 1 and one at sqrt 2.
  CHECK(m.offset == doctest::Approx(0.25 * (1.0 + 2.0 * std::exp(-1.0) + std::exp(-2.0))).epsilon(1e-6));
  const std::vector<double> centre{0.5, 0.5};
  CHECK(ocsvm_score(m, centre) > 0.0);
}

TEST_CASE("solver matches an independent projected-gradient QP") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const int n = 8 + static_cast<int>(seed % 5) * 5;
    const int d = 2 + static_cast<int>(seed % 3);
    const double nu = 0.1 + 0.04 * static_cast<double>(seed);
    const double gamma = 0.3 + 0.1 * static_cast<double>(seed % 4);
    const Matrix x = gaussian_cloud(n, d, seed + 1000);
    const OcsvmDual mine = solve_ocsvm_dual(rbf_gram(x, gamma), nu);
    const auto ref = oracle::ocsvm_qp(oracle::rbf_gram(to_mat(x), gamma), nu);
    CAPTURE(seed);
    CHECK(std::abs(mine.objective - ref.objective) <= 1e-8);
    double max_diff = 0.0;
    for (std::size_t i = 0; i < mine.alpha.size(); ++i)
      max_diff = std::max(max_diff, std::abs(mine.alpha[i] - ref.alpha[i]));
    CHECK(max_diff <= 1e-4);
    CHECK(mine.offset == doctest::Approx(ref.offset).epsilon(1e-4).scale(1.0));
  }
}

TEST_CASE("dual feasibility") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Matrix x = gaussian_cloud(60, 3, seed);
    const double nu = 0.05 + 0.09 * static_cast<double>(seed);
    const OcsvmDual dual = solve_ocsvm_dual(rbf_gram(x, default_gamma(x)), nu);
    const double c = 1.0 / (nu * 60.0);
    double sum = 0.0;
    for (double a : dual.alpha) {
      CHECK(a >= 0.0);
      CHECK(a <= c * (1.0 + 1e-12));
      sum += a;
    }
    CHECK(std::abs(sum - 1.0) < 1e-8);
    CHECK(dual.kkt_violation <= 1e-6);
  }
}

TEST_CASE("nu bounds the outlier and support vector fractions") {
  for (double nu : {0.05, 0.1, 0.3, 0.5, 0.8}) {
    const Matrix x = gaussian_cloud(200, 2, 77);
    const OcsvmModel m = fit_ocsvm(x, nu);
    const double c = 1.0 / (nu * 200.0);
    std::size_t bounded = 0, outliers = 0;
    for (double a : m.alphas) bounded += a >= c * (1.0 - 1e-9);
    for (Eigen::Index i = 0; i < x.rows(); ++i) outliers += ocsvm_score(m, row(x, i)) < -1e-6;
    CAPTURE(nu);
    CHECK(static_cast<double>(bounded) / 200.0 <= nu + 1e-9);
    CHECK(static_cast<double>(outliers) / 200.0 <= nu + 1e-9);
    CHECK(static_cast<double>(m.alphas.size()) / 200.0 >= nu - 1e-9);
  }
}

TEST_CASE("free support vectors sit on the boundary") {
  const Matrix x = gaussian_cloud(80, 2, 5);
  const OcsvmModel m = fit_ocsvm(x, 0.2);
  REQUIRE(m.offset_from_free);
  const double c = 1.0 / (0.2 * 80.0);
  std::size_t free = 0;
  for (std::size_t r = 0; r < m.alphas.size(); ++r) {
    if (m.alphas[r] >= c * (1.0 - 1e-9)) continue;
    ++free;
    CHECK(std::abs(ocsvm_score(m, row(m.support_vectors, static_cast<Eigen::Index>(r)))) <= 1e-5);
  }
  CHECK(free > 0);
}

TEST_CASE("far away queries score minus the offset") {
  const Matrix x = gaussian_cloud(40, 3, 6);
  const OcsvmModel m = fit_ocsvm(x, 0.3);
  const std::vector<double> far{1e3, -1e3, 1e3};
  CHECK(ocsvm_score(m, far) == doctest::Approx(-m.offset).epsilon(1e-12));
  const std::vector<double> centre{0.0, 0.0, 0.0};
  CHECK(ocsvm_score(m, centre) > ocsvm_score(m, far));
}

TEST_CASE("solver errors") {
  const Matrix x = gaussian_cloud(50, 2, 8);
  OcsvmOptions tight;
  tight.max_iterations = 1;
  try {
    fit_ocsvm(x, 0.1, std::nullopt, tight);
    FAIL("expected the iteration cap to trigger");
  } catch (const ConvergenceError& e) {
    CHECK(e.violation() > 1e-6);
  }
  CHECK_THROWS_AS(fit_ocsvm(x.topRows(1), 0.5), ValidationError);
  CHECK_THROWS_AS(fit_ocsvm(x, 0.0), ValidationError);
  CHECK_THROWS_AS(fit_ocsvm(x, 1.5), ValidationError);
  Matrix bad = x;
  bad(3, 1) = std::nan("");
  CHECK_THROWS_AS(fit_ocsvm(bad, 0.5), NumericError);
  const OcsvmModel m = fit_ocsvm(x, 0.5);
  CHECK_THROWS_AS(ocsvm_score(m, std::vector<double>{1.0}), ShapeError);
}

TEST_CASE("fitting is deterministic") {
  const Matrix x = gaussian_cloud(70, 4, 9);
  const OcsvmModel a = fit_ocsvm(x, 0.25), b = fit_ocsvm(x, 0.25);
  CHECK(a.alphas == b.alphas);
  CHECK(a.offset == b.offset);
  CHECK(a.support_vectors == b.support_vectors);
}
