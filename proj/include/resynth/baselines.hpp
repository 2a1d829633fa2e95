#pragma once

// Trainable comparators for the few-shot study: a ReLU multilayer perceptron
// with a softmax head trained by Adam, and a nearest-centroid classifier.

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "resynth/error.hpp"
#include "resynth/features.hpp"
#include "resynth/metrics.hpp"

namespace resynth {

using LabeledSet = std::vector<std::pair<FeatureVector, std::string>>;

// How weight_decay enters training. `decoupled` shrinks weights directly in
// the optimizer step (AdamW); `coupled` adds weight_decay/2 * ||W||^2 to the
// loss. Biases are never decayed.
enum class DecayMode { decoupled, coupled };

struct MlpConfig {
  std::vector<std::size_t> hidden_layers{512, 32};
  double learning_rate = 1e-3;
  double weight_decay = 1e-4;
  DecayMode decay_mode = DecayMode::decoupled;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  int max_epochs = 1000;
  int patience = 10;
  // Minimum decrease of the monitored loss that resets the patience counter.
  double tolerance = 1e-4;
  // 0 picks full-batch up to kFullBatchLimit samples and 64 beyond.
  std::size_t batch_size = 0;
  std::uint64_t seed = 0;

  static constexpr std::size_t kFullBatchLimit = 280;

  static MlpConfig few_shot() {
    MlpConfig c;
    c.hidden_layers = {512};
    return c;
  }

  void validate() const;
};

struct DenseLayer {
  Eigen::MatrixXd weights;  // outputs x inputs
  Eigen::VectorXd bias;
};

class MlpModel {
 public:
  // All-zero parameters.
  MlpModel(std::size_t input_dim, std::vector<std::size_t> hidden, std::vector<std::string> classes);

  // Uniform in +-sqrt(6 / fan_in), biases zero.
  static MlpModel initialized(std::size_t input_dim, std::vector<std::size_t> hidden,
                              std::vector<std::string> classes, std::uint64_t seed);

  std::size_t input_dim() const noexcept { return input_dim_; }
  const std::vector<std::size_t>& hidden() const noexcept { return hidden_; }
  const std::vector<std::string>& classes() const noexcept { return classes_; }
  std::vector<DenseLayer>& layers() noexcept { return layers_; }
  const std::vector<DenseLayer>& layers() const noexcept { return layers_; }
  std::size_t parameter_count() const noexcept;

  // Row-wise class probabilities for a batch (rows are samples).
  Eigen::MatrixXd probabilities(const Eigen::MatrixXd& inputs) const;

  friend bool operator==(const MlpModel& a, const MlpModel& b);

 private:
  std::size_t input_dim_;
  std::vector<std::size_t> hidden_;
  std::vector<std::string> classes_;
  std::vector<DenseLayer> layers_;
};

struct LossGradient {
  double loss = 0.0;
  std::vector<DenseLayer> gradient;  // same shapes as the model's layers
};

// Mean cross-entropy over the batch plus l2/2 * sum ||W||^2, and its
// gradient with respect to every parameter.
LossGradient loss_and_gradient(const MlpModel& model, const Eigen::MatrixXd& inputs,
                               std::span<const int> labels, double l2);
double loss_value(const MlpModel& model, const Eigen::MatrixXd& inputs,
                  std::span<const int> labels, double l2);

class AdamOptimizer {
 public:
  AdamOptimizer(const MlpModel& model, const MlpConfig& config);
  void step(MlpModel& model, const std::vector<DenseLayer>& gradient);
  int steps() const noexcept { return t_; }

 private:
  MlpConfig config_;
  std::vector<DenseLayer> m_, v_;
  int t_ = 0;
};

struct TrainResult {
  MlpModel model;
  std::vector<double> monitored_loss;  // one entry per completed epoch
  int best_epoch = 0;                  // 1-based index into monitored_loss
  bool used_validation = false;
};

// Early stopping monitors the validation loss, or the training loss when
// `val` is empty, and restores the parameters of the best epoch.
TrainResult train_mlp(const LabeledSet& train, const LabeledSet& val, const MlpConfig& config);

struct MlpPrediction {
  std::string label;
  std::vector<double> probabilities;  // aligned with model.classes()
};

MlpPrediction predict_mlp(const MlpModel& model, std::span<const float> x);

void save_model(const MlpModel& model, std::ostream& out);
void save_model(const MlpModel& model, const std::filesystem::path& path);
MlpModel load_model(std::istream& in);
MlpModel load_model(const std::filesystem::path& path);

// Sorted class list and the inputs/labels matrices used by training.
struct EncodedSet {
  std::vector<std::string> classes;
  Eigen::MatrixXd inputs;
  std::vector<int> labels;
};
EncodedSet encode(const LabeledSet& set, const std::vector<std::string>& classes);

// ---------------------------------------------------------------------------
// Nearest centroid

struct CentroidModel {
  std::vector<std::string> classes;         // canonical order
  std::vector<FeatureVector> centroids;     // per-class mean
};

CentroidModel train_centroid(const LabeledSet& train);
std::string predict_centroid(const CentroidModel& model, std::span<const float> x,
                             const DistanceKind& kind);

}  // namespace resynth
