#pragma once

// Minimal differentiable model: a dense ReLU feature embedding followed by two
// linear-softmax classifier heads, with analytic backpropagation and SGD.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include "sslt/common.hpp"

namespace sslt {

struct DenseLayer {
  Matrix weight;  // out x in
  Vector bias;    // out
};

/// Feature embedding f(x; theta). Every layer is followed by a rectifier, so
/// the embedding z is the output of the last hidden layer.
struct EmbeddingParams {
  std::vector<DenseLayer> layers;

  int input_dim() const;
  int output_dim() const;
  std::size_t parameter_count() const;
  /// Throws ConfigError on an inconsistent shape chain or non-finite entries.
  void validate() const;
};

/// Linear classifier: probs = softmax(W z + b).
struct ClassifierParams {
  Matrix weight;  // C x d
  Vector bias;    // C

  int num_classes() const { return static_cast<int>(weight.rows()); }
  int input_dim() const { return static_cast<int>(weight.cols()); }
  void validate() const;
};

enum class Head { balanced, random };

struct ModelState {
  EmbeddingParams embedding;
  ClassifierParams head_balanced;  // g, trained with class-balanced sampling
  ClassifierParams head_random;    // g', trained with random sampling

  const ClassifierParams& head(Head h) const { return h == Head::balanced ? head_balanced : head_random; }
  ClassifierParams& head(Head h) { return h == Head::balanced ? head_balanced : head_random; }
  int num_classes() const { return head_balanced.num_classes(); }
  void validate() const;
};

struct NetworkShape {
  int input_dim = 0;
  std::vector<int> hidden_widths{64, 64};
  int num_classes = 0;
};

/// Uniform(-1/sqrt(fan_in), 1/sqrt(fan_in)) for weights and biases.
DenseLayer init_dense(int in, int out, Rng& rng);
ClassifierParams init_classifier(int d, int num_classes, Rng& rng);
ModelState init_model(const NetworkShape& shape, std::uint64_t seed);

// ---- forward ----------------------------------------------------------------

/// Numerically stable softmax (max subtraction) on each row.
Matrix softmax_rows(const Matrix& logits);
/// Log-softmax via log-sum-exp on each row.
Matrix log_softmax_rows(const Matrix& logits);
/// Argmax with the lowest index winning ties.
int argmax(std::span<const double> values);

struct EmbeddingCache {
  std::vector<Matrix> activations;  // activations[0] = input, activations[k] = post-ReLU output of layer k
  const Matrix& output() const { return activations.back(); }
};

EmbeddingCache embed_batch(const EmbeddingParams& embedding, const Matrix& inputs);
Matrix embed(const EmbeddingParams& embedding, const Matrix& inputs);
Matrix head_logits(const ClassifierParams& head, const Matrix& features);

struct Prediction {
  Vector embedding;  // z
  Vector probs;      // softmax over C classes
};

Prediction forward(std::span<const double> x, const ModelState& model, Head head);
/// Row-wise class probabilities for a batch of inputs.
Matrix predict_probs(const ModelState& model, Head head, const Matrix& inputs);
std::vector<int> predict_labels(const ModelState& model, Head head, const Matrix& inputs);

// ---- losses and gradients ---------------------------------------------------

enum class LossKind {
  cross_entropy,  // mean CE through the chosen head
  consistency,    // mean KL(prev || cur) over rows that carry a previous prediction
  semi,           // cross_entropy + lambda * consistency
  supervised,     // mean CE through the balanced head with the embedding frozen
};

struct LossSpec {
  LossKind kind = LossKind::cross_entropy;
  Head head = Head::random;
  bool train_embedding = true;
  double lambda = 1.0;

  static LossSpec cross_entropy(Head head, bool train_embedding = true);
  static LossSpec consistency(Head head);
  static LossSpec semi(double lambda);
  static LossSpec supervised();
};

struct LossValue {
  double total = 0.0;
  double ce_part = 0.0;
  double consistency_part = 0.0;
};

/// Inputs and targets of one minibatch. `inputs` are raw features, or
/// precomputed embeddings when `inputs_are_features` is set (frozen-embedding
/// phases only).
struct TrainBatch {
  Matrix inputs;
  std::vector<int> labels;
  Matrix previous;                 // p^{e-1} rows; only read where has_previous is set
  std::vector<bool> has_previous;  // empty means no row has a previous prediction
  bool inputs_are_features = false;

  int size() const { return static_cast<int>(inputs.rows()); }
};

struct Gradients {
  std::optional<EmbeddingParams> embedding;  // absent when the embedding is frozen
  ClassifierParams head;
  Head which = Head::random;

  double squared_norm() const;
};

struct BackwardResult {
  LossValue loss;
  Gradients grads;
  Matrix probs;  // current predictions p^e, one row per sample
};

/// Loss plus analytic gradients for one batch. Throws NumericError when the
/// loss is not finite.
BackwardResult backward(const TrainBatch& batch, const ModelState& model, const LossSpec& spec);
/// Loss only (used by gradient checking).
LossValue evaluate_loss(const TrainBatch& batch, const ModelState& model, const LossSpec& spec);

/// Largest relative deviation between analytic gradients and central
/// differences over all trainable parameters. The per-parameter relative
/// error is |a - n| / max(|a|, |n|, 1e-6).
double grad_check(const ModelState& model, const TrainBatch& batch, const LossSpec& spec, double eps);

// ---- optimization -----------------------------------------------------------

struct OptimState {
  double base_lr = 0.1;
  double momentum = 0.9;
  double weight_decay = 0.0005;
  int epoch = 0;
  int total_epochs = 1;
  std::optional<EmbeddingParams> velocity_embedding;
  std::optional<ClassifierParams> velocity_head;
};

OptimState make_optimizer(double base_lr, double momentum, double weight_decay, int total_epochs);

/// v <- momentum * v + grad + weight_decay * param;  param <- param - lr * v
void sgd_update(std::span<double> param, std::span<const double> grad, std::span<double> velocity, double lr,
                double momentum, double weight_decay);

/// Applies one step at the learning rate of the optimizer's current epoch.
/// Parameters without a gradient are left untouched.
void sgd_step(ModelState& model, const Gradients& grads, OptimState& opt);

double cosine_lr(int epoch, int total, double base);

}  // namespace sslt
