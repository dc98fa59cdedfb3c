#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include <Eigen/Cholesky>

#include "modad/detectors.hpp"
#include "modad/rng.hpp"

namespace modad {

namespace {

struct Scatter {
  Vector location;
  Matrix covariance;
  Eigen::LLT<Matrix> llt;
  double log_det = 0.0;
  bool regularized = false;
};

Scatter scatter_of(const Matrix& x, const std::vector<Eigen::Index>& subset, double ridge) {
  const Eigen::Index p = x.cols();
  Scatter s;
  s.location = Vector::Zero(p);
  for (auto r : subset) s.location += x.row(r).transpose();
  s.location /= static_cast<double>(subset.size());
  Matrix centred(static_cast<Eigen::Index>(subset.size()), p);
  for (std::size_t i = 0; i < subset.size(); ++i)
    centred.row(static_cast<Eigen::Index>(i)) = x.row(subset[i]) - s.location.transpose();
  const double denom = std::max<double>(1.0, static_cast<double>(subset.size()) - 1.0);
  s.covariance = (centred.transpose() * centred) / denom;

  s.llt.compute(s.covariance);
  double mean_diag = s.covariance.diagonal().mean();
  if (!(mean_diag > 0.0)) mean_diag = 1.0;
  const double min_pivot = s.llt.info() == Eigen::Success
                               ? s.llt.matrixLLT().diagonal().minCoeff()
                               : 0.0;
  if (s.llt.info() != Eigen::Success || min_pivot * min_pivot < ridge * mean_diag) {
    s.covariance.diagonal().array() += ridge * mean_diag;
    s.llt.compute(s.covariance);
    s.regularized = true;
  }
  s.log_det = 2.0 * s.llt.matrixLLT().diagonal().array().log().sum();
  return s;
}

Vector mahalanobis_all(const Matrix& x, const Scatter& s) {
  Matrix centred = x.rowwise() - s.location.transpose();
  const Matrix solved = s.llt.matrixL().solve(centred.transpose());
  return solved.colwise().squaredNorm().transpose();
}

}  // namespace

// Minimum covariance determinant by C-steps: fit on a subset, keep the h points
// with the smallest Mahalanobis distance, refit; repeat from random subsets.
RobustCovModel fit_robust_cov(const Matrix& x, int restarts, int csteps, double ridge, std::uint64_t seed) {
  const Eigen::Index n = x.rows();
  const Eigen::Index p = x.cols();
  if (n < 8) throw ValidationError("robust covariance needs at least 8 points");
  if (restarts < 1 || csteps < 1) throw ValidationError("robust covariance needs restarts, csteps >= 1");
  const auto h = static_cast<std::size_t>(std::min<Eigen::Index>(n, (n + p + 2) / 2));

  Rng rng(seed);
  std::vector<Eigen::Index> all(static_cast<std::size_t>(n));
  std::iota(all.begin(), all.end(), Eigen::Index{0});

  bool have_best = false;
  Scatter best;
  for (int r = 0; r < restarts; ++r) {
    std::shuffle(all.begin(), all.end(), rng);
    std::vector<Eigen::Index> subset(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(h));
    std::sort(subset.begin(), subset.end());
    Scatter s = scatter_of(x, subset, ridge);
    for (int c = 0; c < csteps; ++c) {
      const Vector d2 = mahalanobis_all(x, s);
      std::vector<Eigen::Index> order(static_cast<std::size_t>(n));
      std::iota(order.begin(), order.end(), Eigen::Index{0});
      std::nth_element(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(h - 1), order.end(),
                       [&](Eigen::Index a, Eigen::Index b) { return d2(a) < d2(b) || (d2(a) == d2(b) && a < b); });
      order.resize(h);
      std::sort(order.begin(), order.end());
      if (order == subset) break;
      subset = std::move(order);
      s = scatter_of(x, subset, ridge);
    }
    if (!have_best || s.log_det < best.log_det) {
      best = std::move(s);
      have_best = true;
    }
  }

  RobustCovModel model;
  model.location = best.location;
  model.covariance = best.covariance;
  model.precision = best.llt.solve(Matrix::Identity(p, p));
  model.log_det = best.log_det;
  model.regularized = best.regularized;
  return model;
}

double mahalanobis_sq(const RobustCovModel& model, std::span<const double> x) {
  if (static_cast<Eigen::Index>(x.size()) != model.location.size())
    throw ShapeError("robust covariance: dimension mismatch");
  const Vector d = Eigen::Map<const Vector>(x.data(), static_cast<Eigen::Index>(x.size())) - model.location;
  return d.dot(model.precision * d);
}

}  // namespace modad
