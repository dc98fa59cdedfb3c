#include "modad/evalkit.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>

#include <Eigen/Eigenvalues>
#include <json.hpp>

namespace modad {

std::string EvalReport::to_json() const {
  nlohmann::json j;
  j["average_accuracy"] = average_accuracy;
  j["conflicting_accuracy"] = conflicting_accuracy ? nlohmann::json(*conflicting_accuracy) : nlohmann::json();
  j["aligned_accuracy"] = aligned_accuracy ? nlohmann::json(*aligned_accuracy) : nlohmann::json();
  j["per_class_accuracy"] = per_class_accuracy;
  j["per_class_count"] = per_class_count;
  j["samples"] = samples;
  j["conflicting_samples"] = conflicting_samples;
  j["seed"] = seed;
  j["config_hash"] = config_hash;
  j["model"] = model;
  return j.dump(2);
}

EvalReport accuracy_metrics(std::span<const int> predictions, const LabeledDataset& data) {
  if (predictions.size() != data.size())
    throw ValidationError("accuracy_metrics: " + std::to_string(predictions.size()) + " predictions for " +
                          std::to_string(data.size()) + " samples");
  if (data.empty()) throw ValidationError("accuracy_metrics: empty dataset");
  const int k = data.num_classes();
  std::vector<std::size_t> correct(static_cast<std::size_t>(k), 0);
  EvalReport r;
  r.per_class_count.assign(static_cast<std::size_t>(k), 0);
  std::size_t total_correct = 0, conf = 0, conf_correct = 0, al = 0, al_correct = 0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const Sample& s = data.samples[i];
    const bool ok = predictions[i] == s.class_label;
    const auto y = static_cast<std::size_t>(s.class_label);
    ++r.per_class_count[y];
    if (ok) {
      ++correct[y];
      ++total_correct;
    }
    if (s.aligned) {
      ++al;
      al_correct += ok;
    } else {
      ++conf;
      conf_correct += ok;
    }
  }
  r.samples = data.size();
  r.conflicting_samples = conf;
  r.average_accuracy = 100.0 * static_cast<double>(total_correct) / static_cast<double>(data.size());
  if (conf > 0) r.conflicting_accuracy = 100.0 * static_cast<double>(conf_correct) / static_cast<double>(conf);
  if (al > 0) r.aligned_accuracy = 100.0 * static_cast<double>(al_correct) / static_cast<double>(al);
  for (int y = 0; y < k; ++y) {
    const auto c = static_cast<std::size_t>(y);
    r.per_class_accuracy.push_back(
        r.per_class_count[c] == 0 ? 0.0 : 100.0 * static_cast<double>(correct[c]) / r.per_class_count[c]);
  }
  return r;
}

Matrix PcaProjection::project(const Matrix& x) const {
  if (x.cols() != mean.size()) throw ShapeError("PCA projection: dimension mismatch");
  return (x.rowwise() - mean.transpose()) * components;
}

PcaProjection pca_top_components(const Matrix& x, int num_components) {
  if (x.rows() < 2) throw ValidationError("PCA needs at least 2 samples");
  if (num_components < 1 || num_components > x.cols())
    throw ValidationError("PCA: num_components must lie in [1, E]");
  PcaProjection p;
  p.mean = x.colwise().mean().transpose();
  const Matrix centred = x.rowwise() - p.mean.transpose();
  const Eigen::MatrixXd cov = (centred.transpose() * centred) / static_cast<double>(x.rows() - 1);

  const Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(cov);
  if (eig.info() != Eigen::Success) throw NumericError("PCA eigendecomposition failed");
  // Eigen sorts ascending.
  const Eigen::Index e = cov.rows();
  p.components.resize(e, num_components);
  for (int c = 0; c < num_components; ++c) {
    Vector v = eig.eigenvectors().col(e - 1 - c);
    for (Eigen::Index i = 0; i < v.size(); ++i) {
      if (std::abs(v(i)) > 1e-12) {
        if (v(i) < 0.0) v = -v;
        break;
      }
    }
    p.components.col(c) = v;
    p.explained_variance.push_back(std::max(0.0, eig.eigenvalues()(e - 1 - c)));
  }
  return p;
}

void export_projection(const PcaProjection& projection, const Matrix& embeddings,
                       const std::vector<bool>& aligned, const std::filesystem::path& path) {
  if (static_cast<std::size_t>(embeddings.rows()) != aligned.size())
    throw ShapeError("export_projection: one aligned flag per embedding required");
  if (projection.components.cols() < 2) throw ValidationError("export_projection needs two components");
  const Matrix proj = projection.project(embeddings);
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write projection '" + path.string() + "'");
  os << "pc1,pc2,aligned\n";
  char buf[80];
  for (Eigen::Index r = 0; r < proj.rows(); ++r) {
    std::snprintf(buf, sizeof(buf), "%.17g,%.17g,%d\n", proj(r, 0), proj(r, 1),
                  aligned[static_cast<std::size_t>(r)] ? 1 : 0);
    os << buf;
  }
  if (!os) throw IoError("write to '" + path.string() + "' failed");
}

std::vector<ComponentShift> projection_shift(const Matrix& projected, const std::vector<bool>& aligned) {
  if (static_cast<std::size_t>(projected.rows()) != aligned.size())
    throw ShapeError("projection_shift: one flag per row required");
  std::vector<ComponentShift> out;
  for (Eigen::Index c = 0; c < projected.cols(); ++c) {
    double sa = 0, sc = 0, qa = 0, qc = 0;
    std::size_t na = 0, nc = 0;
    for (Eigen::Index r = 0; r < projected.rows(); ++r) {
      const double v = projected(r, c);
      if (aligned[static_cast<std::size_t>(r)]) {
        sa += v;
        qa += v * v;
        ++na;
      } else {
        sc += v;
        qc += v * v;
        ++nc;
      }
    }
    ComponentShift s;
    if (na == 0 || nc == 0) {
      out.push_back(s);
      continue;
    }
    s.aligned_mean = sa / na;
    s.conflicting_mean = sc / nc;
    const double va = std::max(0.0, qa / na - s.aligned_mean * s.aligned_mean);
    const double vc = std::max(0.0, qc / nc - s.conflicting_mean * s.conflicting_mean);
    s.pooled_std = std::sqrt(0.5 * (va + vc));
    s.ratio = s.pooled_std > 0.0 ? std::abs(s.aligned_mean - s.conflicting_mean) / s.pooled_std : 0.0;
    out.push_back(s);
  }
  return out;
}

namespace {

Matrix class_rows(const Matrix& m, const LabeledDataset& data, int y) {
  std::vector<Eigen::Index> rows;
  for (std::size_t i = 0; i < data.size(); ++i)
    if (data.samples[i].class_label == y) rows.push_back(static_cast<Eigen::Index>(i));
  Matrix out(static_cast<Eigen::Index>(rows.size()), m.cols());
  for (std::size_t r = 0; r < rows.size(); ++r) out.row(static_cast<Eigen::Index>(r)) = m.row(rows[r]);
  return out;
}

}  // namespace

std::vector<std::vector<ComponentShift>> class_pca_shift(const Matrix& train_embeddings, const LabeledDataset& train,
                                                         const Matrix& test_embeddings, const LabeledDataset& test) {
  if (static_cast<std::size_t>(train_embeddings.rows()) != train.size() ||
      static_cast<std::size_t>(test_embeddings.rows()) != test.size())
    throw ShapeError("class_pca_shift: one embedding per sample required");
  const int k = std::max(train.num_classes(), test.num_classes());
  std::vector<std::vector<ComponentShift>> out(static_cast<std::size_t>(k));
  for (int y = 0; y < k; ++y) {
    std::vector<bool> flags;
    for (const auto& s : test.samples)
      if (s.class_label == y) flags.push_back(s.aligned);
    const auto aligned = std::count(flags.begin(), flags.end(), true);
    if (aligned == 0 || aligned == static_cast<std::ptrdiff_t>(flags.size())) continue;
    const Matrix fit = class_rows(train_embeddings, train, y);
    if (fit.rows() < 2) continue;
    const PcaProjection pca = pca_top_components(fit, std::min<int>(2, static_cast<int>(fit.cols())));
    out[static_cast<std::size_t>(y)] = projection_shift(pca.project(class_rows(test_embeddings, test, y)), flags);
  }
  return out;
}

}  // namespace modad
