#include <algorithm>
#include <cmath>
#include <numeric>

#include "modad/detectors.hpp"

namespace modad {

namespace {

// Euclidean distances from every row of `q` to every row of `ref`.
Matrix pairwise_distances(const Matrix& q, const Matrix& ref) {
  const Vector qn = q.rowwise().squaredNorm();
  const Vector rn = ref.rowwise().squaredNorm();
  Matrix d = -2.0 * (q * ref.transpose());
  d.colwise() += qn;
  d.rowwise() += rn.transpose();
  return d.cwiseMax(0.0).cwiseSqrt();
}

// Indices of the k smallest entries of `row`, skipping `exclude` (or -1).
std::vector<Eigen::Index> k_nearest(const RowVector& row, int k, Eigen::Index exclude) {
  std::vector<Eigen::Index> idx;
  idx.reserve(static_cast<std::size_t>(row.size()));
  for (Eigen::Index j = 0; j < row.size(); ++j)
    if (j != exclude) idx.push_back(j);
  const auto kk = static_cast<std::ptrdiff_t>(k);
  std::nth_element(idx.begin(), idx.begin() + (kk - 1), idx.end(), [&](Eigen::Index a, Eigen::Index b) {
    return row(a) < row(b) || (row(a) == row(b) && a < b);
  });
  idx.resize(static_cast<std::size_t>(k));
  return idx;
}

constexpr double kMinReach = 1e-12;

}  // namespace

LofModel fit_lof(const Matrix& x, int k) {
  if (k < 1) throw ValidationError("LOF k must be >= 1");
  if (x.rows() < std::max<Eigen::Index>(k + 1, 8))
    throw ValidationError("LOF needs at least max(k + 1, 8) points");
  LofModel model;
  model.k = k;
  model.reference = x;
  const Eigen::Index n = x.rows();
  const Matrix dist = pairwise_distances(x, x);

  std::vector<std::vector<Eigen::Index>> neighbours(static_cast<std::size_t>(n));
  model.k_distance.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    auto nn = k_nearest(dist.row(i), k, i);
    double kd = 0.0;
    for (auto j : nn) kd = std::max(kd, dist(i, j));
    model.k_distance[static_cast<std::size_t>(i)] = kd;
    neighbours[static_cast<std::size_t>(i)] = std::move(nn);
  }
  model.lrd.resize(static_cast<std::size_t>(n));
  for (Eigen::Index i = 0; i < n; ++i) {
    double reach = 0.0;
    for (auto j : neighbours[static_cast<std::size_t>(i)])
      reach += std::max(model.k_distance[static_cast<std::size_t>(j)], dist(i, j));
    model.lrd[static_cast<std::size_t>(i)] = 1.0 / std::max(reach / k, kMinReach);
  }
  return model;
}

double lof_value(const LofModel& model, std::span<const double> x) {
  if (static_cast<Eigen::Index>(x.size()) != model.reference.cols())
    throw ShapeError("LOF: dimension mismatch");
  const Eigen::Map<const RowVector> q(x.data(), static_cast<Eigen::Index>(x.size()));
  RowVector dist(model.reference.rows());
  for (Eigen::Index j = 0; j < model.reference.rows(); ++j) dist(j) = (model.reference.row(j) - q).norm();
  const auto nn = k_nearest(dist, model.k, -1);
  double reach = 0.0, lrd_sum = 0.0;
  for (auto j : nn) {
    reach += std::max(model.k_distance[static_cast<std::size_t>(j)], dist(j));
    lrd_sum += model.lrd[static_cast<std::size_t>(j)];
  }
  const double lrd_q = 1.0 / std::max(reach / model.k, kMinReach);
  return (lrd_sum / model.k) / lrd_q;
}

}  // namespace modad
