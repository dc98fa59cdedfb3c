#include "modad/detectors.hpp"

#include <algorithm>
#include <fstream>

#include <json.hpp>

namespace modad {

namespace {

constexpr int kDetectorVersion = 1;

template <class... Ts>
struct overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
overloaded(Ts...) -> overloaded<Ts...>;

nlohmann::json matrix_json(const Matrix& m) {
  return {{"rows", m.rows()}, {"cols", m.cols()},
          {"data", std::vector<double>(m.data(), m.data() + m.size())}};
}

Matrix matrix_from(const nlohmann::json& j) {
  const auto rows = j.at("rows").get<Eigen::Index>();
  const auto cols = j.at("cols").get<Eigen::Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (static_cast<Eigen::Index>(data.size()) != rows * cols) throw IoError("detector matrix size mismatch");
  Matrix m(rows, cols);
  std::copy(data.begin(), data.end(), m.data());
  return m;
}

std::vector<double> vec(const Vector& v) { return {v.data(), v.data() + v.size()}; }

Vector vector_from(const nlohmann::json& j) {
  const auto data = j.get<std::vector<double>>();
  return Eigen::Map<const Vector>(data.data(), static_cast<Eigen::Index>(data.size()));
}

}  // namespace

std::string to_string(DetectorKind kind) {
  switch (kind) {
    case DetectorKind::ocsvm: return "ocsvm";
    case DetectorKind::lof: return "lof";
    case DetectorKind::iforest: return "iforest";
    case DetectorKind::robustcov: return "robustcov";
  }
  return "ocsvm";
}

DetectorKind parse_detector_kind(const std::string& text) {
  if (text == "ocsvm") return DetectorKind::ocsvm;
  if (text == "lof") return DetectorKind::lof;
  if (text == "iforest") return DetectorKind::iforest;
  if (text == "robustcov") return DetectorKind::robustcov;
  throw ValidationError("unknown detector kind '" + text + "'");
}

DetectorKind detector_kind(const DetectorModel& model) {
  return std::visit(overloaded{[](const OcsvmModel&) { return DetectorKind::ocsvm; },
                               [](const LofModel&) { return DetectorKind::lof; },
                               [](const IforestModel&) { return DetectorKind::iforest; },
                               [](const RobustCovModel&) { return DetectorKind::robustcov; }},
                    model);
}

DetectorModel fit_alternate_detector(DetectorKind kind, const Matrix& x, const AlternateParams& params) {
  switch (kind) {
    case DetectorKind::lof: {
      // Small fit sets shrink the neighbourhood to n - 1.
      const int k = static_cast<int>(std::min<Eigen::Index>(params.lof_k, std::max<Eigen::Index>(1, x.rows() - 1)));
      return fit_lof(x, k);
    }
    case DetectorKind::iforest:
      return fit_iforest(x, params.iforest_trees, params.iforest_subsample, params.seed);
    case DetectorKind::robustcov:
      return fit_robust_cov(x, params.mcd_restarts, params.mcd_csteps, params.ridge, params.seed);
    case DetectorKind::ocsvm: break;
  }
  throw ValidationError("fit_alternate_detector: ocsvm is not an alternate detector");
}

DetectorModel fit_detector(const DetectorConfig& config, const Matrix& x) {
  if (config.kind == DetectorKind::ocsvm) {
    std::optional<KernelSpec> kernel;
    if (config.gamma) kernel = KernelSpec{*config.gamma};
    return fit_ocsvm(x, config.nu, kernel, config.ocsvm);
  }
  return fit_alternate_detector(config.kind, x, config.alternate);
}

double detector_score(const DetectorModel& model, std::span<const double> x) {
  return std::visit(overloaded{[&](const OcsvmModel& m) { return ocsvm_score(m, x); },
                               [&](const LofModel& m) { return -lof_value(m, x); },
                               [&](const IforestModel& m) { return -iforest_anomaly(m, x); },
                               [&](const RobustCovModel& m) { return -mahalanobis_sq(m, x); }},
                    model);
}

std::vector<double> detector_score(const DetectorModel& model, const Matrix& x) {
  std::vector<double> out(static_cast<std::size_t>(x.rows()));
  for (Eigen::Index r = 0; r < x.rows(); ++r)
    out[static_cast<std::size_t>(r)] =
        detector_score(model, std::span<const double>(x.row(r).data(), static_cast<std::size_t>(x.cols())));
  return out;
}

bool detector_regularized(const DetectorModel& model) {
  if (const auto* cov = std::get_if<RobustCovModel>(&model)) return cov->regularized;
  return false;
}

void save_detector(const DetectorModel& model, const std::filesystem::path& path) {
  nlohmann::json j;
  j["format"] = "modad-detector";
  j["version"] = kDetectorVersion;
  j["kind"] = to_string(detector_kind(model));
  std::visit(overloaded{
                 [&](const OcsvmModel& m) {
                   j["support_vectors"] = matrix_json(m.support_vectors);
                   j["alphas"] = m.alphas;
                   j["offset"] = m.offset;
                   j["gamma"] = m.kernel.gamma;
                   j["nu"] = m.nu;
                   j["train_count"] = m.train_count;
                 },
                 [&](const LofModel& m) {
                   j["k"] = m.k;
                   j["reference"] = matrix_json(m.reference);
                   j["k_distance"] = m.k_distance;
                   j["lrd"] = m.lrd;
                 },
                 [&](const IforestModel& m) {
                   j["subsample_size"] = m.subsample_size;
                   j["normalizer"] = m.normalizer;
                   j["dim"] = m.dim;
                   auto& trees = j["trees"] = nlohmann::json::array();
                   for (const auto& t : m.trees) {
                     nlohmann::json nodes = nlohmann::json::array();
                     for (const auto& n : t.nodes)
                       nodes.push_back({n.feature, n.split, n.left, n.right, n.size});
                     trees.push_back(std::move(nodes));
                   }
                 },
                 [&](const RobustCovModel& m) {
                   j["location"] = vec(m.location);
                   j["covariance"] = matrix_json(m.covariance);
                   j["precision"] = matrix_json(m.precision);
                   j["log_det"] = m.log_det;
                   j["regularized"] = m.regularized;
                 }},
             model);
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write detector '" + path.string() + "'");
  os << j.dump() << '\n';
}

DetectorModel load_detector(const std::filesystem::path& path) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open detector '" + path.string() + "'");
  nlohmann::json j;
  try {
    j = nlohmann::json::parse(is);
  } catch (const nlohmann::json::exception& e) {
    throw IoError("detector file '" + path.string() + "' is not valid JSON: " + e.what());
  }
  if (j.value("format", std::string()) != "modad-detector" || j.value("version", 0) != kDetectorVersion)
    throw IoError("detector file '" + path.string() + "' has an unsupported format or version");

  switch (parse_detector_kind(j.at("kind").get<std::string>())) {
    case DetectorKind::ocsvm: {
      OcsvmModel m;
      m.support_vectors = matrix_from(j.at("support_vectors"));
      m.alphas = j.at("alphas").get<std::vector<double>>();
      m.offset = j.at("offset").get<double>();
      m.kernel.gamma = j.at("gamma").get<double>();
      m.nu = j.at("nu").get<double>();
      m.train_count = j.at("train_count").get<std::size_t>();
      return m;
    }
    case DetectorKind::lof: {
      LofModel m;
      m.k = j.at("k").get<int>();
      m.reference = matrix_from(j.at("reference"));
      m.k_distance = j.at("k_distance").get<std::vector<double>>();
      m.lrd = j.at("lrd").get<std::vector<double>>();
      return m;
    }
    case DetectorKind::iforest: {
      IforestModel m;
      m.subsample_size = j.at("subsample_size").get<std::size_t>();
      m.normalizer = j.at("normalizer").get<double>();
      m.dim = j.at("dim").get<int>();
      for (const auto& t : j.at("trees")) {
        IsolationTree tree;
        for (const auto& n : t)
          tree.nodes.push_back({n.at(0).get<int>(), n.at(1).get<double>(), n.at(2).get<int>(),
                                n.at(3).get<int>(), n.at(4).get<std::size_t>()});
        m.trees.push_back(std::move(tree));
      }
      return m;
    }
    case DetectorKind::robustcov: {
      RobustCovModel m;
      m.location = vector_from(j.at("location"));
      m.covariance = matrix_from(j.at("covariance"));
      m.precision = matrix_from(j.at("precision"));
      m.log_det = j.at("log_det").get<double>();
      m.regularized = j.at("regularized").get<bool>();
      return m;
    }
  }
  throw IoError("unreachable detector kind");
}

}  // namespace modad
