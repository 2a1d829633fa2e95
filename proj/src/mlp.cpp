#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <set>

#include "resynth/baselines.hpp"
#include "resynth/hash.hpp"

namespace resynth {

void MlpConfig::validate() const {
  for (std::size_t w : hidden_layers)
    if (w == 0) throw ConfigError("hidden layer widths must be positive");
  if (patience < 1) throw ConfigError("patience must be at least 1");
  if (max_epochs < 1) throw ConfigError("max_epochs must be at least 1");
  if (!(learning_rate > 0.0)) throw ConfigError("learning rate must be positive");
  if (weight_decay < 0.0) throw ConfigError("weight decay must be non-negative");
}

MlpModel::MlpModel(std::size_t input_dim, std::vector<std::size_t> hidden,
                   std::vector<std::string> classes)
    : input_dim_(input_dim), hidden_(std::move(hidden)), classes_(std::move(classes)) {
  if (input_dim_ == 0) throw DimensionError("input dim must be positive");
  if (classes_.empty()) throw ConfigError("model needs at least one class");
  std::size_t fan_in = input_dim_;
  auto add = [&](std::size_t out) {
    layers_.push_back({Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(out), static_cast<Eigen::Index>(fan_in)),
                       Eigen::VectorXd::Zero(static_cast<Eigen::Index>(out))});
    fan_in = out;
  };
  for (std::size_t w : hidden_) {
    if (w == 0) throw ConfigError("hidden layer widths must be positive");
    add(w);
  }
  add(classes_.size());
}

MlpModel MlpModel::initialized(std::size_t input_dim, std::vector<std::size_t> hidden,
                               std::vector<std::string> classes, std::uint64_t seed) {
  MlpModel m(input_dim, std::move(hidden), std::move(classes));
  for (std::size_t l = 0; l < m.layers_.size(); ++l) {
    auto& W = m.layers_[l].weights;
    const double bound = std::sqrt(6.0 / static_cast<double>(W.cols()));
    CounterRng rng(hash_key("mlp-init", seed, l));
    for (Eigen::Index r = 0; r < W.rows(); ++r)
      for (Eigen::Index c = 0; c < W.cols(); ++c) W(r, c) = bound * (2.0 * rng.uniform() - 1.0);
  }
  return m;
}

std::size_t MlpModel::parameter_count() const noexcept {
  std::size_t n = 0;
  for (const auto& l : layers_) n += static_cast<std::size_t>(l.weights.size() + l.bias.size());
  return n;
}

bool operator==(const MlpModel& a, const MlpModel& b) {
  if (a.input_dim_ != b.input_dim_ || a.hidden_ != b.hidden_ || a.classes_ != b.classes_) return false;
  for (std::size_t l = 0; l < a.layers_.size(); ++l) {
    const auto& x = a.layers_[l];
    const auto& y = b.layers_[l];
    if (std::memcmp(x.weights.data(), y.weights.data(), sizeof(double) * static_cast<std::size_t>(x.weights.size())) != 0 ||
        std::memcmp(x.bias.data(), y.bias.data(), sizeof(double) * static_cast<std::size_t>(x.bias.size())) != 0)
      return false;
  }
  return true;
}

namespace {

void softmax_rows(Eigen::MatrixXd& z) {
  for (Eigen::Index r = 0; r < z.rows(); ++r) {
    const double mx = z.row(r).maxCoeff();
    z.row(r) = (z.row(r).array() - mx).exp();
    z.row(r) /= z.row(r).sum();
  }
}

struct ForwardPass {
  std::vector<Eigen::MatrixXd> activations;  // input, hidden outputs (post-ReLU)
  std::vector<Eigen::MatrixXd> pre;          // pre-activations of hidden layers
  Eigen::MatrixXd probs;
};

ForwardPass forward(const MlpModel& model, const Eigen::MatrixXd& inputs) {
  if (static_cast<std::size_t>(inputs.cols()) != model.input_dim())
    throw DimensionError("input has dim " + std::to_string(inputs.cols()) + ", model expects " +
                         std::to_string(model.input_dim()));
  ForwardPass f;
  f.activations.push_back(inputs);
  const auto& layers = model.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    Eigen::MatrixXd z = f.activations.back() * layers[l].weights.transpose();
    z.rowwise() += layers[l].bias.transpose();
    if (l + 1 < layers.size()) {
      f.pre.push_back(z);
      f.activations.push_back(z.cwiseMax(0.0));
    } else {
      softmax_rows(z);
      f.probs = std::move(z);
    }
  }
  return f;
}

double cross_entropy(const Eigen::MatrixXd& probs, std::span<const int> labels) {
  double acc = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const double p = probs(static_cast<Eigen::Index>(i), labels[i]);
    acc -= std::log(std::max(p, 1e-300));
  }
  return acc / static_cast<double>(labels.size());
}

double weight_penalty(const MlpModel& model, double l2) {
  if (l2 == 0.0) return 0.0;
  double acc = 0.0;
  for (const auto& l : model.layers()) acc += l.weights.squaredNorm();
  return 0.5 * l2 * acc;
}

void check_labels(const MlpModel& model, const Eigen::MatrixXd& inputs, std::span<const int> labels) {
  if (labels.empty()) throw ConfigError("empty batch");
  if (static_cast<std::size_t>(inputs.rows()) != labels.size())
    throw DimensionError("inputs and labels differ in length");
  for (int y : labels)
    if (y < 0 || static_cast<std::size_t>(y) >= model.classes().size())
      throw ConfigError("label index out of range");
}

}  // namespace

Eigen::MatrixXd MlpModel::probabilities(const Eigen::MatrixXd& inputs) const {
  return forward(*this, inputs).probs;
}

double loss_value(const MlpModel& model, const Eigen::MatrixXd& inputs, std::span<const int> labels,
                  double l2) {
  check_labels(model, inputs, labels);
  return cross_entropy(forward(model, inputs).probs, labels) + weight_penalty(model, l2);
}

LossGradient loss_and_gradient(const MlpModel& model, const Eigen::MatrixXd& inputs,
                               std::span<const int> labels, double l2) {
  check_labels(model, inputs, labels);
  ForwardPass f = forward(model, inputs);
  const auto n = static_cast<double>(labels.size());

  LossGradient out;
  out.loss = cross_entropy(f.probs, labels) + weight_penalty(model, l2);

  const auto& layers = model.layers();
  out.gradient.resize(layers.size());
  Eigen::MatrixXd delta = f.probs;
  for (std::size_t i = 0; i < labels.size(); ++i) delta(static_cast<Eigen::Index>(i), labels[i]) -= 1.0;
  delta /= n;

  for (std::size_t l = layers.size(); l-- > 0;) {
    const Eigen::MatrixXd& input = f.activations[l];
    out.gradient[l].weights = delta.transpose() * input;
    if (l2 != 0.0) out.gradient[l].weights += l2 * layers[l].weights;
    out.gradient[l].bias = delta.colwise().sum().transpose();
    if (l > 0) {
      Eigen::MatrixXd back = delta * layers[l].weights;
      delta = back.cwiseProduct((f.pre[l - 1].array() > 0.0).cast<double>().matrix());
    }
  }
  return out;
}

AdamOptimizer::AdamOptimizer(const MlpModel& model, const MlpConfig& config) : config_(config) {
  for (const auto& l : model.layers()) {
    m_.push_back({Eigen::MatrixXd::Zero(l.weights.rows(), l.weights.cols()),
                  Eigen::VectorXd::Zero(l.bias.size())});
  }
  v_ = m_;
}

void AdamOptimizer::step(MlpModel& model, const std::vector<DenseLayer>& gradient) {
  ++t_;
  const double b1 = config_.beta1, b2 = config_.beta2;
  const double c1 = 1.0 - std::pow(b1, t_);
  const double c2 = 1.0 - std::pow(b2, t_);
  const double lr = config_.learning_rate;
  const double eps = config_.epsilon;
  const bool decoupled = config_.decay_mode == DecayMode::decoupled && config_.weight_decay > 0.0;

  auto& layers = model.layers();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    auto update = [&](auto& param, const auto& g, auto& m, auto& v, bool decay) {
      m = b1 * m + (1.0 - b1) * g;
      v = b2 * v + (1.0 - b2) * g.cwiseProduct(g);
      if (decay) param *= (1.0 - lr * config_.weight_decay);
      param.array() -= lr * (m.array() / c1) / ((v.array() / c2).sqrt() + eps);
    };
    update(layers[l].weights, gradient[l].weights, m_[l].weights, v_[l].weights, decoupled);
    update(layers[l].bias, gradient[l].bias, m_[l].bias, v_[l].bias, false);
  }
}

EncodedSet encode(const LabeledSet& set, const std::vector<std::string>& classes) {
  EncodedSet out;
  out.classes = classes;
  if (set.empty()) return out;
  const std::size_t dim = set.front().first.dim();
  out.inputs.resize(static_cast<Eigen::Index>(set.size()), static_cast<Eigen::Index>(dim));
  out.labels.reserve(set.size());
  for (std::size_t i = 0; i < set.size(); ++i) {
    const auto& [vec, label] = set[i];
    if (vec.dim() != dim) throw DimensionError("training vectors differ in dim");
    for (std::size_t c = 0; c < dim; ++c) out.inputs(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(c)) = vec[c];
    auto it = std::lower_bound(classes.begin(), classes.end(), label);
    if (it == classes.end() || *it != label) throw ConfigError("label '" + label + "' is not a known class");
    out.labels.push_back(static_cast<int>(it - classes.begin()));
  }
  return out;
}

TrainResult train_mlp(const LabeledSet& train, const LabeledSet& val, const MlpConfig& config) {
  config.validate();
  if (train.empty()) throw ConfigError("training set is empty");

  std::set<std::string> class_set;
  for (const auto& [v, label] : train) class_set.insert(label);
  for (const auto& [v, label] : val) {
    if (!class_set.contains(label))
      throw ConfigError("class '" + label + "' appears in validation but not in training");
  }
  const std::vector<std::string> classes(class_set.begin(), class_set.end());
  const EncodedSet tr = encode(train, classes);
  const EncodedSet va = encode(val, classes);
  const std::size_t dim = static_cast<std::size_t>(tr.inputs.cols());
  if (!val.empty() && static_cast<std::size_t>(va.inputs.cols()) != dim)
    throw DimensionError("validation vectors differ in dim from training vectors");

  const double l2 = config.decay_mode == DecayMode::coupled ? config.weight_decay : 0.0;
  const std::size_t n = train.size();
  const std::size_t batch =
      config.batch_size > 0 ? config.batch_size : (n <= MlpConfig::kFullBatchLimit ? n : 64);

  MlpModel model = MlpModel::initialized(dim, config.hidden_layers, classes, config.seed);
  AdamOptimizer adam(model, config);

  TrainResult result{model, {}, 0, !val.empty()};
  double best = std::numeric_limits<double>::infinity();
  double reference = best;
  int stale = 0;

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Eigen::MatrixXd xb;
  std::vector<int> yb;

  for (int epoch = 1; epoch <= config.max_epochs; ++epoch) {
    if (batch < n) {
      CounterRng rng(hash_key("mlp-epoch", config.seed, epoch));
      seeded_shuffle(order.begin(), order.end(), rng);
    }
    for (std::size_t start = 0; start < n; start += batch) {
      const std::size_t end = std::min(n, start + batch);
      if (batch >= n) {
        const LossGradient lg = loss_and_gradient(model, tr.inputs, tr.labels, l2);
        if (!std::isfinite(lg.loss)) throw TrainingError("non-finite training loss", epoch);
        adam.step(model, lg.gradient);
        continue;
      }
      xb.resize(static_cast<Eigen::Index>(end - start), tr.inputs.cols());
      yb.resize(end - start);
      for (std::size_t i = start; i < end; ++i) {
        xb.row(static_cast<Eigen::Index>(i - start)) = tr.inputs.row(static_cast<Eigen::Index>(order[i]));
        yb[i - start] = tr.labels[order[i]];
      }
      const LossGradient lg = loss_and_gradient(model, xb, yb, l2);
      if (!std::isfinite(lg.loss)) throw TrainingError("non-finite training loss", epoch);
      adam.step(model, lg.gradient);
    }

    const double monitored = val.empty() ? loss_value(model, tr.inputs, tr.labels, 0.0)
                                         : loss_value(model, va.inputs, va.labels, 0.0);
    if (!std::isfinite(monitored)) throw TrainingError("non-finite monitored loss", epoch);
    result.monitored_loss.push_back(monitored);

    if (monitored < best) {
      best = monitored;
      result.model = model;
      result.best_epoch = epoch;
    }
    if (monitored < reference - config.tolerance) {
      reference = monitored;
      stale = 0;
    } else if (++stale >= config.patience) {
      break;
    }
  }
  return result;
}

MlpPrediction predict_mlp(const MlpModel& model, std::span<const float> x) {
  if (x.size() != model.input_dim())
    throw DimensionError("input has dim " + std::to_string(x.size()) + ", model expects " +
                         std::to_string(model.input_dim()));
  Eigen::MatrixXd row(1, static_cast<Eigen::Index>(x.size()));
  for (std::size_t i = 0; i < x.size(); ++i) row(0, static_cast<Eigen::Index>(i)) = x[i];
  const Eigen::MatrixXd p = model.probabilities(row);

  MlpPrediction out;
  out.probabilities.resize(model.classes().size());
  std::size_t best = 0;
  for (std::size_t c = 0; c < model.classes().size(); ++c) {
    out.probabilities[c] = p(0, static_cast<Eigen::Index>(c));
    if (out.probabilities[c] > out.probabilities[best]) best = c;  // classes are sorted
  }
  out.label = model.classes()[best];
  return out;
}

// ---------------------------------------------------------------------------
// Checkpoints: "RMLP", u16 version, u32 input dim, u32 hidden count, u32
// widths, u32 class count, classes as (u16 length, bytes), then per layer the
// row-major weights followed by the bias, all little-endian float64.

namespace {

constexpr char kModelMagic[4] = {'R', 'M', 'L', 'P'};
constexpr std::uint16_t kModelVersion = 1;

template <class UInt>
void put(std::ostream& out, UInt v) {
  char buf[sizeof(UInt)];
  for (std::size_t i = 0; i < sizeof(UInt); ++i) buf[i] = static_cast<char>((v >> (8 * i)) & 0xFF);
  out.write(buf, sizeof(UInt));
}

template <class UInt>
UInt get(std::istream& in, std::uint64_t& offset) {
  unsigned char buf[sizeof(UInt)];
  in.read(reinterpret_cast<char*>(buf), sizeof(UInt));
  if (in.gcount() != static_cast<std::streamsize>(sizeof(UInt)))
    throw FormatError("truncated model checkpoint", offset + static_cast<std::uint64_t>(in.gcount()));
  offset += sizeof(UInt);
  UInt v = 0;
  for (std::size_t i = 0; i < sizeof(UInt); ++i) v |= static_cast<UInt>(buf[i]) << (8 * i);
  return v;
}

}  // namespace

void save_model(const MlpModel& model, std::ostream& out) {
  out.write(kModelMagic, 4);
  put<std::uint16_t>(out, kModelVersion);
  put<std::uint32_t>(out, static_cast<std::uint32_t>(model.input_dim()));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(model.hidden().size()));
  for (std::size_t w : model.hidden()) put<std::uint32_t>(out, static_cast<std::uint32_t>(w));
  put<std::uint32_t>(out, static_cast<std::uint32_t>(model.classes().size()));
  for (const auto& c : model.classes()) {
    put<std::uint16_t>(out, static_cast<std::uint16_t>(c.size()));
    out.write(c.data(), static_cast<std::streamsize>(c.size()));
  }
  for (const auto& l : model.layers()) {
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c)
        put<std::uint64_t>(out, std::bit_cast<std::uint64_t>(l.weights(r, c)));
    for (Eigen::Index r = 0; r < l.bias.size(); ++r)
      put<std::uint64_t>(out, std::bit_cast<std::uint64_t>(l.bias(r)));
  }
}

void save_model(const MlpModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot open '" + path.string() + "' for writing");
  save_model(model, out);
}

MlpModel load_model(std::istream& in) {
  std::uint64_t offset = 0;
  char magic[4];
  in.read(magic, 4);
  if (in.gcount() != 4 || std::memcmp(magic, kModelMagic, 4) != 0) throw FormatError("bad model magic", 0);
  offset = 4;
  if (get<std::uint16_t>(in, offset) != kModelVersion) throw FormatError("unsupported model version", 4);
  const auto input_dim = get<std::uint32_t>(in, offset);
  const auto n_hidden = get<std::uint32_t>(in, offset);
  std::vector<std::size_t> hidden(n_hidden);
  for (auto& w : hidden) w = get<std::uint32_t>(in, offset);
  const auto n_classes = get<std::uint32_t>(in, offset);
  std::vector<std::string> classes(n_classes);
  for (auto& c : classes) {
    const auto len = get<std::uint16_t>(in, offset);
    c.resize(len);
    in.read(c.data(), len);
    if (in.gcount() != len) throw FormatError("truncated class name", offset + static_cast<std::uint64_t>(in.gcount()));
    offset += len;
  }
  MlpModel model(input_dim, hidden, classes);
  for (auto& l : model.layers()) {
    for (Eigen::Index r = 0; r < l.weights.rows(); ++r)
      for (Eigen::Index c = 0; c < l.weights.cols(); ++c)
        l.weights(r, c) = std::bit_cast<double>(get<std::uint64_t>(in, offset));
    for (Eigen::Index r = 0; r < l.bias.size(); ++r)
      l.bias(r) = std::bit_cast<double>(get<std::uint64_t>(in, offset));
  }
  return model;
}

MlpModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open model '" + path.string() + "'");
  return load_model(in);
}

// ---------------------------------------------------------------------------
// Nearest centroid

CentroidModel train_centroid(const LabeledSet& train) {
  if (train.empty()) throw ConfigError("training set is empty");
  std::map<std::string, std::vector<const FeatureVector*>> members;
  for (const auto& [vec, label] : train) members[label].push_back(&vec);

  const std::size_t dim = train.front().first.dim();
  CentroidModel model;
  for (auto& [label, vecs] : members) {
    // Canonical member order makes the sum independent of training order.
    std::sort(vecs.begin(), vecs.end(), [](const FeatureVector* a, const FeatureVector* b) {
      return std::lexicographical_compare(a->values().begin(), a->values().end(),
                                          b->values().begin(), b->values().end());
    });
    std::vector<double> acc(dim, 0.0);
    for (const FeatureVector* v : vecs) {
      if (v->dim() != dim) throw DimensionError("training vectors differ in dim");
      for (std::size_t i = 0; i < dim; ++i) acc[i] += (*v)[i];
    }
    std::vector<float> mean(dim);
    for (std::size_t i = 0; i < dim; ++i)
      mean[i] = static_cast<float>(acc[i] / static_cast<double>(vecs.size()));
    model.classes.push_back(label);
    model.centroids.emplace_back(std::move(mean));
  }
  return model;
}

std::string predict_centroid(const CentroidModel& model, std::span<const float> x,
                             const DistanceKind& kind) {
  if (model.classes.empty()) throw ConfigError("centroid model has no classes");
  std::size_t best = 0;
  double best_d = 0.0;
  for (std::size_t c = 0; c < model.classes.size(); ++c) {
    const double d = distance(kind, x, model.centroids[c].values());
    if (c == 0 || d < best_d) {
      best_d = d;
      best = c;
    }
  }
  return model.classes[best];
}

}  // namespace resynth
