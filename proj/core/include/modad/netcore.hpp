#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "modad/common.hpp"
#include "modad/sampling.hpp"
#include "modad/synthdata.hpp"

namespace modad {

struct DenseLayer {
  Matrix weight;  // out x in
  Vector bias;    // out

  int in_dim() const { return static_cast<int>(weight.cols()); }
  int out_dim() const { return static_cast<int>(weight.rows()); }
  bool operator==(const DenseLayer& o) const { return weight == o.weight && bias == o.bias; }
};

/// f = head(backbone(x)). Every backbone layer is followed by a ReLU; the last
/// backbone layer is the embedding layer.
struct MlpModel {
  std::vector<DenseLayer> backbone;
  DenseLayer head;

  int input_dim() const { return backbone.front().in_dim(); }
  int embedding_dim() const { return backbone.back().out_dim(); }
  int num_classes() const { return head.out_dim(); }
  /// input, hidden..., embedding, classes
  std::vector<int> layer_dims() const;
  std::size_t parameter_count() const;

  /// Row-major weight then bias, layer by layer, head last.
  std::vector<double> flatten() const;
  void unflatten(std::span<const double> params);

  bool operator==(const MlpModel&) const = default;
};

struct NetworkShape {
  std::vector<int> hidden_dims{64};
  int embedding_dim = 128;
};

MlpModel init_mlp(int input_dim, std::span<const int> hidden_dims, int embedding_dim, int num_classes,
                  std::uint64_t seed);
MlpModel init_mlp(int input_dim, const NetworkShape& shape, int num_classes, std::uint64_t seed);

struct ForwardResult {
  Matrix embeddings;  // n x E
  Matrix logits;      // n x K
};

ForwardResult forward(const MlpModel& model, const Matrix& batch);

/// Row-wise softmax with max subtraction.
Matrix softmax(const Matrix& logits);

enum class LossKind { ce, gce };
std::string to_string(LossKind kind);
LossKind parse_loss_kind(const std::string& text);

struct LossResult {
  double loss = 0.0;
  Matrix grad_logits;
};

LossResult ce_loss_and_grad(const Matrix& logits, std::span<const int> labels);
/// Generalised cross-entropy (1 - p_y^q) / q. Its logit gradient is
/// p_y^q (p - onehot(y)) / n.
LossResult gce_loss_and_grad(const Matrix& logits, std::span<const int> labels, double q);

struct TrainConfig {
  LossKind loss = LossKind::ce;
  double q = 0.7;
  double learning_rate = 1e-3;
  double weight_decay = 1e-2;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int epochs = 30;
  int batch_size = 64;
  std::uint64_t seed = 0;

  void validate() const;
  bool operator==(const TrainConfig&) const = default;
};

/// Mean loss over the batch and its gradient with respect to every parameter,
/// returned in the layout of `flatten()`.
double loss_and_gradients(const MlpModel& model, const Matrix& batch, std::span<const int> labels,
                          LossKind loss, double q, std::vector<double>& grads);

struct OptimizerState {
  std::vector<double> m;
  std::vector<double> v;
  std::uint64_t step = 0;
};

/// Decoupled weight decay followed by a bias-corrected Adam step.
void adamw_step(std::span<double> params, std::span<const double> grads, OptimizerState& state,
                const TrainConfig& cfg);

struct TrainResult {
  MlpModel model;
  std::vector<double> loss_history;  // per-epoch mean batch loss
};

/// One epoch worth of batches for `train_with_batches`.
using EpochBatches = std::function<std::vector<TrainingBatch>(int epoch)>;

TrainResult train_with_batches(MlpModel model, const TrainConfig& cfg, const EpochBatches& make_epoch);

/// ceil(n / batch_size) weighted mini-batches per epoch: i.i.d. when the
/// sampler has replacement, otherwise one weighted permutation per epoch.
TrainResult train_model(MlpModel model, const LabeledDataset& data, const TrainConfig& cfg,
                        const SamplerWeights& sampler_weights);

struct Predictions {
  std::vector<int> predicted;
  std::vector<bool> correct;
  Matrix embeddings;
};

/// Argmax with ties going to the lowest class index.
std::vector<int> argmax_rows(const Matrix& logits);
Predictions predict_with_correctness(const MlpModel& model, const LabeledDataset& data);

struct Checkpoint {
  MlpModel model;
  TrainConfig config;
};

void save_checkpoint(const MlpModel& model, const TrainConfig& cfg, const std::filesystem::path& path);
Checkpoint load_checkpoint(const std::filesystem::path& path);

}  // namespace modad
