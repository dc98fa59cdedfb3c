#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "modad/common.hpp"

namespace modad {

// Every detector scores with the same orientation: higher = more in-class.

struct KernelSpec {
  double gamma = 1.0;
};

/// exp(-gamma * ||x - y||^2)
double rbf_kernel(std::span<const double> x, std::span<const double> y, double gamma);

/// 1 / (E * mean per-feature variance); 1 when the data has no variance.
double default_gamma(const Matrix& x);

struct OcsvmOptions {
  double tolerance = 1e-6;               // stop when max KKT violation <= tolerance
  std::size_t max_iterations = 100000;  // pair updates
};

/// nu-OCSVM in the normalised dual: min 1/2 a'Ka, 0 <= a_i <= 1/(nu m), sum a = 1.
struct OcsvmModel {
  Matrix support_vectors;
  std::vector<double> alphas;  // one per support vector
  double offset = 0.0;         // lambda
  double nu = 0.5;
  KernelSpec kernel;
  std::size_t train_count = 0;
  // Solver diagnostics.
  double kkt_violation = 0.0;
  std::size_t iterations = 0;
  double dual_objective = 0.0;
  bool offset_from_free = true;  // false when no 0 < a_i < C existed
};

OcsvmModel fit_ocsvm(const Matrix& x, double nu, std::optional<KernelSpec> kernel = std::nullopt,
                     const OcsvmOptions& options = {});
/// sum_i a_i K(x, sv_i) - lambda
double ocsvm_score(const OcsvmModel& model, std::span<const double> x);

/// Full solver output in training order, for oracle comparisons.
struct OcsvmDual {
  std::vector<double> alpha;
  double objective = 0.0;
  double offset = 0.0;
  double kkt_violation = 0.0;
  std::size_t iterations = 0;
  bool offset_from_free = true;
};
OcsvmDual solve_ocsvm_dual(const Matrix& gram, double nu, const OcsvmOptions& options = {});
Matrix rbf_gram(const Matrix& x, double gamma);

struct LofModel {
  int k = 20;
  Matrix reference;
  std::vector<double> k_distance;  // per reference point
  std::vector<double> lrd;         // local reachability density per reference point
};

struct IsolationNode {
  int feature = -1;  // -1 marks a leaf
  double split = 0.0;
  int left = -1;
  int right = -1;
  std::size_t size = 0;  // samples reaching a leaf
};

struct IsolationTree {
  std::vector<IsolationNode> nodes;  // nodes[0] is the root
};

struct IforestModel {
  std::vector<IsolationTree> trees;
  std::size_t subsample_size = 256;
  double normalizer = 1.0;  // c(subsample_size)
  int dim = 0;
};

struct RobustCovModel {
  Vector location;
  Matrix covariance;
  Matrix precision;
  double log_det = 0.0;
  bool regularized = false;
};

using DetectorModel = std::variant<OcsvmModel, LofModel, IforestModel, RobustCovModel>;

enum class DetectorKind { ocsvm, lof, iforest, robustcov };
std::string to_string(DetectorKind kind);
DetectorKind parse_detector_kind(const std::string& text);
DetectorKind detector_kind(const DetectorModel& model);

struct AlternateParams {
  int lof_k = 20;  // capped at n - 1 by fit_alternate_detector
  int iforest_trees = 100;
  std::size_t iforest_subsample = 256;
  int mcd_restarts = 50;
  int mcd_csteps = 10;
  double ridge = 1e-6;  // relative to the mean diagonal of the covariance
  std::uint64_t seed = 0;
};

/// 2 H(n - 1) - 2 (n - 1) / n with exact harmonic numbers; c(1) = 0.
double iforest_normalizer(std::size_t n);

DetectorModel fit_alternate_detector(DetectorKind kind, const Matrix& x, const AlternateParams& params);

LofModel fit_lof(const Matrix& x, int k);
double lof_value(const LofModel& model, std::span<const double> x);
IforestModel fit_iforest(const Matrix& x, int trees, std::size_t subsample, std::uint64_t seed);
double iforest_anomaly(const IforestModel& model, std::span<const double> x);
RobustCovModel fit_robust_cov(const Matrix& x, int restarts, int csteps, double ridge, std::uint64_t seed);
double mahalanobis_sq(const RobustCovModel& model, std::span<const double> x);

/// Everything needed to fit any detector kind.
struct DetectorConfig {
  DetectorKind kind = DetectorKind::ocsvm;
  double nu = 0.5;
  std::optional<double> gamma;  // nullopt = default_gamma of the fit data
  OcsvmOptions ocsvm;
  AlternateParams alternate;
};

DetectorModel fit_detector(const DetectorConfig& config, const Matrix& x);
double detector_score(const DetectorModel& model, std::span<const double> x);
std::vector<double> detector_score(const DetectorModel& model, const Matrix& x);
bool detector_regularized(const DetectorModel& model);

void save_detector(const DetectorModel& model, const std::filesystem::path& path);
DetectorModel load_detector(const std::filesystem::path& path);

}  // namespace modad
