#include <algorithm>
#include <cmath>
#include <limits>

#include "modad/detectors.hpp"

namespace modad {

double rbf_kernel(std::span<const double> x, std::span<const double> y, double gamma) {
  if (x.size() != y.size()) throw ShapeError("rbf_kernel: dimension mismatch");
  if (!(gamma > 0.0)) throw ValidationError("rbf_kernel: gamma must be > 0");
  double d2 = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double d = x[i] - y[i];
    d2 += d * d;
  }
  return std::exp(-gamma * d2);
}

double default_gamma(const Matrix& x) {
  if (x.rows() == 0 || x.cols() == 0) return 1.0;
  const RowVector mean = x.colwise().mean();
  const double mean_var =
      (x.rowwise() - mean).array().square().colwise().mean().mean();
  if (!(mean_var > 0.0) || !std::isfinite(mean_var)) return 1.0;
  return 1.0 / (static_cast<double>(x.cols()) * mean_var);
}

Matrix rbf_gram(const Matrix& x, double gamma) {
  if (!(gamma > 0.0)) throw ValidationError("rbf_gram: gamma must be > 0");
  const Eigen::Index m = x.rows();
  const Vector sq = x.rowwise().squaredNorm();
  const Matrix dots = x * x.transpose();
  Matrix k(m, m);
  for (Eigen::Index i = 0; i < m; ++i) {
    k(i, i) = 1.0;
    for (Eigen::Index j = i + 1; j < m; ++j) {
      const double d2 = std::max(0.0, sq(i) + sq(j) - 2.0 * dots(i, j));
      k(i, j) = k(j, i) = std::exp(-gamma * d2);
    }
  }
  return k;
}

// Pairwise (SMO-style) coordinate descent. Each update moves mass delta from
// alpha_j to alpha_i, which keeps sum(alpha) fixed; i is the most violating
// index that can grow, j is picked by second-order gain among those that can
// shrink.
OcsvmDual solve_ocsvm_dual(const Matrix& gram, double nu, const OcsvmOptions& options) {
  const Eigen::Index m = gram.rows();
  if (gram.cols() != m) throw ShapeError("gram matrix must be square");
  if (m < 2) throw ValidationError("OCSVM needs at least 2 training points");
  if (!(nu > 0.0 && nu <= 1.0)) throw ValidationError("nu must lie in (0, 1]");

  const double upper = 1.0 / (nu * static_cast<double>(m));
  std::vector<double> alpha(static_cast<std::size_t>(m), 1.0 / static_cast<double>(m));
  Vector grad = gram * Eigen::Map<const Vector>(alpha.data(), m);

  OcsvmDual out;
  double violation = std::numeric_limits<double>::infinity();
  std::size_t it = 0;
  for (;; ++it) {
    Eigen::Index i = -1;
    double g_min = std::numeric_limits<double>::infinity();
    double g_max = -std::numeric_limits<double>::infinity();
    for (Eigen::Index t = 0; t < m; ++t) {
      const double a = alpha[static_cast<std::size_t>(t)];
      if (a < upper && grad(t) < g_min) {
        g_min = grad(t);
        i = t;
      }
      if (a > 0.0 && grad(t) > g_max) g_max = grad(t);
    }
    violation = (i < 0) ? 0.0 : g_max - g_min;
    if (violation <= options.tolerance) break;
    if (it >= options.max_iterations)
      throw ConvergenceError("OCSVM solver hit the iteration cap of " +
                                 std::to_string(options.max_iterations) + " (KKT violation " +
                                 std::to_string(violation) + ")",
                             violation);

    Eigen::Index j = -1;
    double best_gain = -1.0;
    double best_curv = 1.0;
    for (Eigen::Index t = 0; t < m; ++t) {
      if (!(alpha[static_cast<std::size_t>(t)] > 0.0)) continue;
      const double b = grad(t) - g_min;
      if (b <= 0.0) continue;
      double curv = gram(i, i) + gram(t, t) - 2.0 * gram(i, t);
      if (curv <= 1e-12) curv = 1e-12;
      const double gain = b * b / curv;
      if (gain > best_gain) {
        best_gain = gain;
        best_curv = curv;
        j = t;
      }
    }

    auto& ai = alpha[static_cast<std::size_t>(i)];
    auto& aj = alpha[static_cast<std::size_t>(j)];
    const double room_i = upper - ai;
    const double delta = std::min({(grad(j) - g_min) / best_curv, room_i, aj});
    if (delta == room_i) ai = upper;
    else ai += delta;
    if (delta == aj) aj = 0.0;
    else aj -= delta;
    grad += delta * (gram.col(i) - gram.col(j));
  }

  out.kkt_violation = violation;
  out.iterations = it;
  out.objective = 0.5 * Eigen::Map<const Vector>(alpha.data(), m).dot(grad);

  double free_sum = 0.0, sv_sum = 0.0;
  std::size_t free_count = 0, sv_count = 0;
  for (Eigen::Index t = 0; t < m; ++t) {
    const double a = alpha[static_cast<std::size_t>(t)];
    if (a > 0.0) {
      sv_sum += grad(t);
      ++sv_count;
      if (a < upper) {
        free_sum += grad(t);
        ++free_count;
      }
    }
  }
  out.offset_from_free = free_count > 0;
  out.offset = free_count > 0 ? free_sum / static_cast<double>(free_count)
                              : sv_sum / static_cast<double>(sv_count);
  out.alpha = std::move(alpha);
  return out;
}

OcsvmModel fit_ocsvm(const Matrix& x, double nu, std::optional<KernelSpec> kernel,
                     const OcsvmOptions& options) {
  if (x.rows() < 2) throw ValidationError("OCSVM needs at least 2 training points");
  if (!x.allFinite()) throw NumericError("OCSVM training data contains non-finite values");
  const KernelSpec spec = kernel.value_or(KernelSpec{default_gamma(x)});
  if (!(spec.gamma > 0.0)) throw ValidationError("OCSVM gamma must be > 0");

  const OcsvmDual dual = solve_ocsvm_dual(rbf_gram(x, spec.gamma), nu, options);

  OcsvmModel model;
  model.nu = nu;
  model.kernel = spec;
  model.train_count = static_cast<std::size_t>(x.rows());
  model.offset = dual.offset;
  model.kkt_violation = dual.kkt_violation;
  model.iterations = dual.iterations;
  model.dual_objective = dual.objective;
  model.offset_from_free = dual.offset_from_free;

  std::vector<Eigen::Index> support;
  for (std::size_t t = 0; t < dual.alpha.size(); ++t)
    if (dual.alpha[t] > 0.0) support.push_back(static_cast<Eigen::Index>(t));
  model.support_vectors.resize(static_cast<Eigen::Index>(support.size()), x.cols());
  for (std::size_t r = 0; r < support.size(); ++r) {
    model.support_vectors.row(static_cast<Eigen::Index>(r)) = x.row(support[r]);
    model.alphas.push_back(dual.alpha[static_cast<std::size_t>(support[r])]);
  }
  return model;
}

double ocsvm_score(const OcsvmModel& model, std::span<const double> x) {
  if (static_cast<Eigen::Index>(x.size()) != model.support_vectors.cols())
    throw ShapeError("ocsvm_score: dimension mismatch");
  const Eigen::Map<const RowVector> q(x.data(), static_cast<Eigen::Index>(x.size()));
  double sum = 0.0;
  for (Eigen::Index r = 0; r < model.support_vectors.rows(); ++r) {
    const double d2 = (model.support_vectors.row(r) - q).squaredNorm();
    sum += model.alphas[static_cast<std::size_t>(r)] * std::exp(-model.kernel.gamma * d2);
  }
  return sum - model.offset;
}

}  // namespace modad
