#include "modad/netcore.hpp"

#include <algorithm>
#include <cmath>

#include "modad/rng.hpp"

namespace modad {

namespace {

void check_labels(std::span<const int> labels, const Matrix& logits) {
  if (static_cast<Eigen::Index>(labels.size()) != logits.rows())
    throw ShapeError("label count does not match logit rows");
  for (int y : labels)
    if (y < 0 || y >= logits.cols()) throw ValidationError("label out of range [0, K)");
  if (!logits.allFinite()) throw NumericError("non-finite logits");
}

DenseLayer make_layer(int in, int out, double stddev, Rng& rng) {
  std::normal_distribution<double> normal(0.0, stddev);
  DenseLayer layer;
  layer.weight.resize(out, in);
  for (Eigen::Index i = 0; i < layer.weight.size(); ++i) layer.weight.data()[i] = normal(rng);
  layer.bias = Vector::Zero(out);
  return layer;
}

Matrix affine(const Matrix& x, const DenseLayer& layer) {
  Matrix z = x * layer.weight.transpose();
  z.rowwise() += layer.bias.transpose();
  return z;
}

template <typename Fn>
void for_each_layer(const MlpModel& m, Fn&& fn) {
  for (const auto& l : m.backbone) fn(l);
  fn(m.head);
}

}  // namespace

std::vector<int> MlpModel::layer_dims() const {
  std::vector<int> dims{input_dim()};
  for (const auto& l : backbone) dims.push_back(l.out_dim());
  dims.push_back(num_classes());
  return dims;
}

std::size_t MlpModel::parameter_count() const {
  std::size_t n = 0;
  for_each_layer(*this, [&](const DenseLayer& l) {
    n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  });
  return n;
}

std::vector<double> MlpModel::flatten() const {
  std::vector<double> out;
  out.reserve(parameter_count());
  for_each_layer(*this, [&](const DenseLayer& l) {
    out.insert(out.end(), l.weight.data(), l.weight.data() + l.weight.size());
    out.insert(out.end(), l.bias.data(), l.bias.data() + l.bias.size());
  });
  return out;
}

void MlpModel::unflatten(std::span<const double> params) {
  if (params.size() != parameter_count()) throw ShapeError("parameter vector length mismatch");
  std::size_t at = 0;
  auto load = [&](DenseLayer& l) {
    std::copy_n(params.data() + at, l.weight.size(), l.weight.data());
    at += static_cast<std::size_t>(l.weight.size());
    std::copy_n(params.data() + at, l.bias.size(), l.bias.data());
    at += static_cast<std::size_t>(l.bias.size());
  };
  for (auto& l : backbone) load(l);
  load(head);
}

MlpModel init_mlp(int input_dim, std::span<const int> hidden_dims, int embedding_dim, int num_classes,
                  std::uint64_t seed) {
  if (input_dim < 1 || embedding_dim < 1 || num_classes < 1)
    throw ValidationError("network dimensions must be >= 1");
  for (int h : hidden_dims)
    if (h < 1) throw ValidationError("hidden widths must be >= 1");

  Rng rng(seed);
  MlpModel model;
  int in = input_dim;
  auto add_relu_layer = [&](int out) {
    // He initialisation for ReLU layers.
    model.backbone.push_back(make_layer(in, out, std::sqrt(2.0 / in), rng));
    in = out;
  };
  for (int h : hidden_dims) add_relu_layer(h);
  add_relu_layer(embedding_dim);
  model.head = make_layer(in, num_classes, std::sqrt(1.0 / in), rng);
  return model;
}

MlpModel init_mlp(int input_dim, const NetworkShape& shape, int num_classes, std::uint64_t seed) {
  return init_mlp(input_dim, shape.hidden_dims, shape.embedding_dim, num_classes, seed);
}

ForwardResult forward(const MlpModel& model, const Matrix& batch) {
  if (batch.cols() != model.input_dim())
    throw ShapeError("batch width " + std::to_string(batch.cols()) + " != model input " +
                     std::to_string(model.input_dim()));
  Matrix h = batch;
  for (const auto& layer : model.backbone) h = affine(h, layer).cwiseMax(0.0);
  ForwardResult out;
  out.logits = affine(h, model.head);
  out.embeddings = std::move(h);
  return out;
}

Matrix softmax(const Matrix& logits) {
  Matrix p = logits;
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    auto row = p.row(r);
    row.array() -= row.maxCoeff();
    row = row.array().exp().matrix();
    row /= row.sum();
  }
  return p;
}

std::string to_string(LossKind kind) { return kind == LossKind::ce ? "ce" : "gce"; }

LossKind parse_loss_kind(const std::string& text) {
  if (text == "ce") return LossKind::ce;
  if (text == "gce") return LossKind::gce;
  throw ValidationError("unknown loss kind '" + text + "'");
}

LossResult ce_loss_and_grad(const Matrix& logits, std::span<const int> labels) {
  check_labels(labels, logits);
  const auto n = static_cast<double>(logits.rows());
  LossResult out;
  out.grad_logits = softmax(logits);
  double total = 0.0;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const int y = labels[static_cast<std::size_t>(r)];
    const double mx = logits.row(r).maxCoeff();
    const double lse = mx + std::log((logits.row(r).array() - mx).exp().sum());
    total += lse - logits(r, y);
    out.grad_logits(r, y) -= 1.0;
  }
  out.grad_logits /= n;
  out.loss = total / n;
  return out;
}

LossResult gce_loss_and_grad(const Matrix& logits, std::span<const int> labels, double q) {
  if (!(q > 0.0 && q <= 1.0)) throw ValidationError("GCE exponent q must lie in (0, 1]");
  check_labels(labels, logits);
  const auto n = static_cast<double>(logits.rows());
  LossResult out;
  out.grad_logits = softmax(logits);
  double total = 0.0;
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const int y = labels[static_cast<std::size_t>(r)];
    // p_y^q through the log-softmax keeps tiny probabilities finite.
    const double mx = logits.row(r).maxCoeff();
    const double log_py = logits(r, y) - mx - std::log((logits.row(r).array() - mx).exp().sum());
    const double pq = std::exp(q * log_py);
    total += (1.0 - pq) / q;
    out.grad_logits(r, y) -= 1.0;
    out.grad_logits.row(r) *= pq;
  }
  out.grad_logits /= n;
  out.loss = total / n;
  return out;
}

void TrainConfig::validate() const {
  if (!(q > 0.0 && q <= 1.0)) throw ValidationError("q must lie in (0, 1]");
  if (!(learning_rate > 0.0)) throw ValidationError("learning_rate must be > 0");
  if (!(weight_decay >= 0.0)) throw ValidationError("weight_decay must be >= 0");
  if (!(beta1 >= 0.0 && beta1 < 1.0) || !(beta2 >= 0.0 && beta2 < 1.0))
    throw ValidationError("betas must lie in [0, 1)");
  if (!(epsilon > 0.0)) throw ValidationError("epsilon must be > 0");
  if (epochs < 0) throw ValidationError("epochs must be >= 0");
  if (batch_size < 1) throw ValidationError("batch_size must be >= 1");
}

double loss_and_gradients(const MlpModel& model, const Matrix& batch, std::span<const int> labels,
                          LossKind loss, double q, std::vector<double>& grads) {
  if (batch.cols() != model.input_dim()) throw ShapeError("batch width does not match the model");
  const std::size_t layers = model.backbone.size();
  std::vector<Matrix> acts;  // acts[l] is the input of backbone layer l; acts[layers] the embedding
  acts.reserve(layers + 1);
  acts.push_back(batch);
  for (const auto& layer : model.backbone) acts.push_back(affine(acts.back(), layer).cwiseMax(0.0));
  const Matrix logits = affine(acts.back(), model.head);

  const LossResult lr = loss == LossKind::ce ? ce_loss_and_grad(logits, labels)
                                             : gce_loss_and_grad(logits, labels, q);

  grads.assign(model.parameter_count(), 0.0);
  // Offsets of each layer's block inside the flattened layout.
  std::vector<std::size_t> offset;
  std::size_t at = 0;
  for_each_layer(model, [&](const DenseLayer& l) {
    offset.push_back(at);
    at += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  });

  auto store = [&](std::size_t block, const Matrix& gw, const RowVector& gb) {
    std::copy_n(gw.data(), gw.size(), grads.data() + offset[block]);
    std::copy_n(gb.data(), gb.size(), grads.data() + offset[block] + gw.size());
  };

  const Matrix& dlogits = lr.grad_logits;
  store(layers, dlogits.transpose() * acts.back(), dlogits.colwise().sum());
  Matrix dh = dlogits * model.head.weight;
  for (std::size_t l = layers; l-- > 0;) {
    // acts[l + 1] > 0 exactly where the pre-activation was positive.
    const Matrix dz = (acts[l + 1].array() > 0.0).select(dh.array(), 0.0).matrix();
    store(l, dz.transpose() * acts[l], dz.colwise().sum());
    if (l > 0) dh = dz * model.backbone[l].weight;
  }
  return lr.loss;
}

void adamw_step(std::span<double> params, std::span<const double> grads, OptimizerState& state,
                const TrainConfig& cfg) {
  if (params.size() != grads.size()) throw ShapeError("adamw: params/grads length mismatch");
  if (state.m.empty() && state.v.empty()) {
    state.m.assign(params.size(), 0.0);
    state.v.assign(params.size(), 0.0);
  }
  if (state.m.size() != params.size() || state.v.size() != params.size())
    throw ShapeError("adamw: optimizer state does not match the parameters");

  state.step += 1;
  const double t = static_cast<double>(state.step);
  const double bc1 = 1.0 - std::pow(cfg.beta1, t);
  const double bc2 = 1.0 - std::pow(cfg.beta2, t);
  const double decay = 1.0 - cfg.learning_rate * cfg.weight_decay;
  for (std::size_t i = 0; i < params.size(); ++i) {
    params[i] *= decay;
    state.m[i] = cfg.beta1 * state.m[i] + (1.0 - cfg.beta1) * grads[i];
    state.v[i] = cfg.beta2 * state.v[i] + (1.0 - cfg.beta2) * grads[i] * grads[i];
    const double m_hat = state.m[i] / bc1;
    const double v_hat = state.v[i] / bc2;
    params[i] -= cfg.learning_rate * m_hat / (std::sqrt(v_hat) + cfg.epsilon);
  }
}

TrainResult train_with_batches(MlpModel model, const TrainConfig& cfg, const EpochBatches& make_epoch) {
  cfg.validate();
  TrainResult result;
  std::vector<double> params = model.flatten();
  std::vector<double> grads;
  OptimizerState state;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const std::vector<TrainingBatch> batches = make_epoch(epoch);
    double sum = 0.0;
    std::size_t count = 0;
    for (const TrainingBatch& b : batches) {
      if (b.size() == 0) continue;
      const double loss = loss_and_gradients(model, b.features, b.labels, cfg.loss, cfg.q, grads);
      adamw_step(params, grads, state, cfg);
      model.unflatten(params);
      sum += loss;
      ++count;
    }
    result.loss_history.push_back(count > 0 ? sum / static_cast<double>(count) : 0.0);
  }
  result.model = std::move(model);
  return result;
}

TrainResult train_model(MlpModel model, const LabeledDataset& data, const TrainConfig& cfg,
                        const SamplerWeights& sampler_weights) {
  if (data.empty()) throw ValidationError("train_model: empty dataset");
  if (sampler_weights.size() != data.size())
    throw ValidationError("train_model: sampler has " + std::to_string(sampler_weights.size()) +
                          " weights for " + std::to_string(data.size()) + " samples");
  cfg.validate();
  const Matrix features = data.feature_matrix();
  const std::vector<int> labels = data.labels();
  const std::size_t n = data.size();
  const auto bs = static_cast<std::size_t>(cfg.batch_size);
  const std::size_t per_epoch = (n + bs - 1) / bs;

  auto make_epoch = [&](int epoch) {
    const std::uint64_t seed = derive_seed(cfg.seed, static_cast<std::uint64_t>(epoch));
    const std::vector<std::size_t> order = draw_batch(sampler_weights, n, seed);
    std::vector<TrainingBatch> batches;
    batches.reserve(per_epoch);
    for (std::size_t b = 0; b < per_epoch; ++b) {
      const std::size_t lo = b * bs;
      const std::size_t hi = std::min(n, lo + bs);
      batches.push_back(gather_batch(features, labels, std::span(order).subspan(lo, hi - lo)));
    }
    return batches;
  };
  return train_with_batches(std::move(model), cfg, make_epoch);
}

std::vector<int> argmax_rows(const Matrix& logits) {
  std::vector<int> out(static_cast<std::size_t>(logits.rows()), 0);
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    Eigen::Index best = 0;
    for (Eigen::Index c = 1; c < logits.cols(); ++c)
      if (logits(r, c) > logits(r, best)) best = c;
    out[static_cast<std::size_t>(r)] = static_cast<int>(best);
  }
  return out;
}

Predictions predict_with_correctness(const MlpModel& model, const LabeledDataset& data) {
  ForwardResult fr = forward(model, data.feature_matrix());
  Predictions out;
  out.predicted = argmax_rows(fr.logits);
  out.correct.reserve(data.size());
  for (std::size_t i = 0; i < data.size(); ++i)
    out.correct.push_back(out.predicted[i] == data.samples[i].class_label);
  out.embeddings = std::move(fr.embeddings);
  return out;
}

}  // namespace modad
