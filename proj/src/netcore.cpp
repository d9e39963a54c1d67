#include "sslt/netcore.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>

#include "sslt/errors.hpp"

namespace sslt {

namespace {

std::string join_problems(const std::vector<std::string>& problems) {
  std::string out = "invalid configuration:";
  for (const auto& p : problems) out += "\n  - " + p;
  return out;
}

bool all_finite(const Matrix& m) { return m.allFinite(); }
bool all_finite(const Vector& v) { return v.allFinite(); }

}  // namespace

ConfigError::ConfigError(std::vector<std::string> problems)
    : Error(ErrorKind::config, join_problems(problems)), problems_(std::move(problems)) {}

// ---- parameters ---------------------------------------------------------------

int EmbeddingParams::input_dim() const { return layers.empty() ? 0 : static_cast<int>(layers.front().weight.cols()); }

int EmbeddingParams::output_dim() const { return layers.empty() ? 0 : static_cast<int>(layers.back().weight.rows()); }

std::size_t EmbeddingParams::parameter_count() const {
  std::size_t n = 0;
  for (const auto& l : layers) n += static_cast<std::size_t>(l.weight.size() + l.bias.size());
  return n;
}

void EmbeddingParams::validate() const {
  SSLT_CHECK(!layers.empty(), ConfigError, "embedding must have at least one layer");
  for (std::size_t k = 0; k < layers.size(); ++k) {
    const auto& l = layers[k];
    SSLT_CHECK(l.weight.rows() == l.bias.size(), ConfigError,
               "embedding layer " + std::to_string(k) + ": bias size does not match weight rows");
    if (k > 0) {
      SSLT_CHECK(l.weight.cols() == layers[k - 1].weight.rows(), ConfigError,
                 "embedding layer " + std::to_string(k) + ": input width does not match previous layer");
    }
    SSLT_CHECK(all_finite(l.weight) && all_finite(l.bias), ConfigError,
               "embedding layer " + std::to_string(k) + " has non-finite parameters");
  }
}

void ClassifierParams::validate() const {
  SSLT_CHECK(weight.rows() >= 1, ConfigError, "classifier needs at least one class");
  SSLT_CHECK(weight.rows() == bias.size(), ConfigError, "classifier bias size does not match class count");
  SSLT_CHECK(all_finite(weight) && all_finite(bias), ConfigError, "classifier has non-finite parameters");
}

void ModelState::validate() const {
  embedding.validate();
  head_balanced.validate();
  head_random.validate();
  SSLT_CHECK(head_balanced.input_dim() == embedding.output_dim() && head_random.input_dim() == embedding.output_dim(),
             ConfigError, "classifier heads must consume the embedding dimension");
  SSLT_CHECK(head_balanced.num_classes() == head_random.num_classes(), ConfigError,
             "classifier heads disagree on the class count");
}

DenseLayer init_dense(int in, int out, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::uniform_real_distribution<double> u(-bound, bound);
  DenseLayer layer{Matrix(out, in), Vector(out)};
  for (Eigen::Index i = 0; i < layer.weight.size(); ++i) layer.weight.data()[i] = u(rng);
  for (Eigen::Index i = 0; i < layer.bias.size(); ++i) layer.bias[i] = u(rng);
  return layer;
}

ClassifierParams init_classifier(int d, int num_classes, Rng& rng) {
  auto layer = init_dense(d, num_classes, rng);
  return {std::move(layer.weight), std::move(layer.bias)};
}

ModelState init_model(const NetworkShape& shape, std::uint64_t seed) {
  std::vector<std::string> problems;
  if (shape.input_dim < 1) problems.push_back("input_dim must be >= 1");
  if (shape.num_classes < 2) problems.push_back("num_classes must be >= 2");
  if (shape.hidden_widths.empty()) problems.push_back("at least one hidden layer is required");
  for (int w : shape.hidden_widths)
    if (w < 1) problems.push_back("hidden widths must be >= 1");
  if (!problems.empty()) throw ConfigError(std::move(problems));

  Rng rng(seed);
  ModelState model;
  int in = shape.input_dim;
  for (int w : shape.hidden_widths) {
    model.embedding.layers.push_back(init_dense(in, w, rng));
    in = w;
  }
  model.head_random = init_classifier(in, shape.num_classes, rng);
  model.head_balanced = init_classifier(in, shape.num_classes, rng);
  return model;
}

// ---- forward --------------------------------------------------------------------

Matrix softmax_rows(const Matrix& logits) {
  Matrix out = logits;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    auto row = out.row(i);
    row.array() -= row.maxCoeff();
    row = row.array().exp().matrix();
    row /= row.sum();
  }
  return out;
}

Matrix log_softmax_rows(const Matrix& logits) {
  Matrix out = logits;
  for (Eigen::Index i = 0; i < out.rows(); ++i) {
    auto row = out.row(i);
    const double m = row.maxCoeff();
    const double lse = m + std::log((row.array() - m).exp().sum());
    row.array() -= lse;
  }
  return out;
}

int argmax(std::span<const double> values) {
  int best = 0;
  for (std::size_t j = 1; j < values.size(); ++j)
    if (values[j] > values[static_cast<std::size_t>(best)]) best = static_cast<int>(j);
  return best;
}

EmbeddingCache embed_batch(const EmbeddingParams& embedding, const Matrix& inputs) {
  SSLT_CHECK(!embedding.layers.empty(), ConfigError, "embedding has no layers");
  SSLT_CHECK(inputs.cols() == embedding.input_dim(), ConfigError,
             "input dimension " + std::to_string(inputs.cols()) + " does not match embedding input " +
                 std::to_string(embedding.input_dim()));
  EmbeddingCache cache;
  cache.activations.reserve(embedding.layers.size() + 1);
  cache.activations.push_back(inputs);
  for (const auto& layer : embedding.layers) {
    Matrix h = cache.activations.back() * layer.weight.transpose();
    h.rowwise() += layer.bias.transpose();
    cache.activations.push_back(h.cwiseMax(0.0));
  }
  return cache;
}

Matrix embed(const EmbeddingParams& embedding, const Matrix& inputs) {
  return std::move(embed_batch(embedding, inputs).activations.back());
}

Matrix head_logits(const ClassifierParams& head, const Matrix& features) {
  SSLT_CHECK(features.cols() == head.input_dim(), ConfigError, "feature dimension does not match classifier input");
  Matrix logits = features * head.weight.transpose();
  logits.rowwise() += head.bias.transpose();
  return logits;
}

Prediction forward(std::span<const double> x, const ModelState& model, Head head) {
  SSLT_CHECK(static_cast<int>(x.size()) == model.embedding.input_dim(), ConfigError,
             "input has " + std::to_string(x.size()) + " features, model expects " +
                 std::to_string(model.embedding.input_dim()));
  Matrix row = Eigen::Map<const Matrix>(x.data(), 1, static_cast<Eigen::Index>(x.size()));
  Matrix z = embed(model.embedding, row);
  Matrix probs = softmax_rows(head_logits(model.head(head), z));
  return {z.row(0).transpose(), probs.row(0).transpose()};
}

Matrix predict_probs(const ModelState& model, Head head, const Matrix& inputs) {
  return softmax_rows(head_logits(model.head(head), embed(model.embedding, inputs)));
}

std::vector<int> predict_labels(const ModelState& model, Head head, const Matrix& inputs) {
  const Matrix logits = head_logits(model.head(head), embed(model.embedding, inputs));
  std::vector<int> labels(static_cast<std::size_t>(logits.rows()));
  for (Eigen::Index i = 0; i < logits.rows(); ++i)
    labels[static_cast<std::size_t>(i)] =
        argmax(std::span<const double>(logits.row(i).data(), static_cast<std::size_t>(logits.cols())));
  return labels;
}

// ---- losses ---------------------------------------------------------------------

LossSpec LossSpec::cross_entropy(Head head, bool train_embedding) {
  return {LossKind::cross_entropy, head, train_embedding, 0.0};
}
LossSpec LossSpec::consistency(Head head) { return {LossKind::consistency, head, true, 1.0}; }
LossSpec LossSpec::semi(double lambda) { return {LossKind::semi, Head::random, true, lambda}; }
LossSpec LossSpec::supervised() { return {LossKind::supervised, Head::balanced, false, 0.0}; }

namespace {

struct LogitLoss {
  LossValue value;
  Matrix dlogits;
  Matrix probs;
};

void check_spec(const TrainBatch& batch, const ModelState& model, const LossSpec& spec) {
  if (spec.kind == LossKind::supervised) {
    SSLT_CHECK(spec.head == Head::balanced && !spec.train_embedding, ContractError,
               "supervised loss trains only the balanced head on a frozen embedding");
  }
  SSLT_CHECK(!batch.inputs_are_features || !spec.train_embedding, ContractError,
             "precomputed features require a frozen embedding");
  SSLT_CHECK(batch.size() > 0, ContractError, "empty batch");
  const bool needs_labels = spec.kind != LossKind::consistency;
  if (needs_labels) {
    SSLT_CHECK(static_cast<int>(batch.labels.size()) == batch.size(), ContractError,
               "label count does not match batch size");
    for (int y : batch.labels)
      SSLT_CHECK(y >= 0 && y < model.num_classes(), ContractError, "label " + std::to_string(y) + " out of range");
  }
  if (!batch.has_previous.empty()) {
    SSLT_CHECK(static_cast<int>(batch.has_previous.size()) == batch.size() && batch.previous.rows() == batch.size() &&
                   batch.previous.cols() == model.num_classes(),
               ContractError, "previous-prediction block does not match batch shape");
  }
}

LogitLoss loss_from_logits(const Matrix& logits, const TrainBatch& batch, const LossSpec& spec) {
  const Eigen::Index n = logits.rows();
  const Eigen::Index c = logits.cols();
  LogitLoss out;
  const Matrix logp = log_softmax_rows(logits);
  out.probs = logp.array().exp().matrix();
  out.dlogits = Matrix::Zero(n, c);

  const bool use_ce = spec.kind != LossKind::consistency;
  const bool use_kl = spec.kind == LossKind::consistency || spec.kind == LossKind::semi;
  const double kl_weight = spec.kind == LossKind::semi ? spec.lambda : 1.0;

  if (use_ce) {
    double ce = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      const int y = batch.labels[static_cast<std::size_t>(i)];
      ce -= logp(i, y);
      out.dlogits.row(i) += out.probs.row(i) / static_cast<double>(n);
      out.dlogits(i, y) -= 1.0 / static_cast<double>(n);
    }
    out.value.ce_part = ce / static_cast<double>(n);
  }

  if (use_kl && !batch.has_previous.empty()) {
    Eigen::Index rows_with_prev = 0;
    for (bool b : batch.has_previous) rows_with_prev += b ? 1 : 0;
    if (rows_with_prev > 0) {
      double kl = 0.0;
      const double scale = kl_weight / static_cast<double>(rows_with_prev);
      for (Eigen::Index i = 0; i < n; ++i) {
        if (!batch.has_previous[static_cast<std::size_t>(i)]) continue;
        double mass = 0.0;
        for (Eigen::Index j = 0; j < c; ++j) {
          const double q = batch.previous(i, j);
          mass += q;
          if (q > 0.0) kl += q * (std::log(q) - logp(i, j));
        }
        // d/dlogit_k of -sum_j q_j log p_j  =  p_k * sum(q) - q_k
        out.dlogits.row(i) += scale * (out.probs.row(i) * mass - batch.previous.row(i));
      }
      out.value.consistency_part = kl / static_cast<double>(rows_with_prev);
    }
  }

  switch (spec.kind) {
    case LossKind::cross_entropy:
    case LossKind::supervised: out.value.total = out.value.ce_part; break;
    case LossKind::consistency: out.value.total = out.value.consistency_part; break;
    case LossKind::semi: out.value.total = out.value.ce_part + spec.lambda * out.value.consistency_part; break;
  }

  if (!std::isfinite(out.value.total)) {
    std::ostringstream msg;
    msg << "non-finite loss (batch size " << n << ", max |logit| " << logits.cwiseAbs().maxCoeff() << ", ce "
        << out.value.ce_part << ", consistency " << out.value.consistency_part << ")";
    throw NumericError(msg.str());
  }
  return out;
}

Matrix features_for(const TrainBatch& batch, const ModelState& model, EmbeddingCache* cache) {
  if (batch.inputs_are_features) {
    SSLT_CHECK(batch.inputs.cols() == model.embedding.output_dim(), ConfigError,
               "precomputed feature width does not match embedding output");
    return batch.inputs;
  }
  *cache = embed_batch(model.embedding, batch.inputs);
  return cache->output();
}

}  // namespace

BackwardResult backward(const TrainBatch& batch, const ModelState& model, const LossSpec& spec) {
  check_spec(batch, model, spec);
  EmbeddingCache cache;
  const Matrix z = features_for(batch, model, &cache);
  const ClassifierParams& head = model.head(spec.head);
  LogitLoss ll = loss_from_logits(head_logits(head, z), batch, spec);

  BackwardResult result;
  result.loss = ll.value;
  result.grads.which = spec.head;
  result.grads.head.weight = ll.dlogits.transpose() * z;
  result.grads.head.bias = ll.dlogits.colwise().sum().transpose();

  if (spec.train_embedding) {
    const auto& layers = model.embedding.layers;
    EmbeddingParams g;
    g.layers.resize(layers.size());
    Matrix delta = ll.dlogits * head.weight;  // dL/dz
    for (std::size_t k = layers.size(); k-- > 0;) {
      const Matrix& out = cache.activations[k + 1];
      delta = delta.cwiseProduct((out.array() > 0.0).cast<double>().matrix());
      g.layers[k].weight = delta.transpose() * cache.activations[k];
      g.layers[k].bias = delta.colwise().sum().transpose();
      if (k > 0) delta = delta * layers[k].weight;
    }
    result.grads.embedding = std::move(g);
  }
  result.probs = std::move(ll.probs);
  return result;
}

LossValue evaluate_loss(const TrainBatch& batch, const ModelState& model, const LossSpec& spec) {
  check_spec(batch, model, spec);
  EmbeddingCache cache;
  const Matrix z = features_for(batch, model, &cache);
  return loss_from_logits(head_logits(model.head(spec.head), z), batch, spec).value;
}

double Gradients::squared_norm() const {
  double s = head.weight.squaredNorm() + head.bias.squaredNorm();
  if (embedding)
    for (const auto& l : embedding->layers) s += l.weight.squaredNorm() + l.bias.squaredNorm();
  return s;
}

namespace {

struct ParamView {
  double* data;
  std::size_t size;
};

void collect(EmbeddingParams& p, std::vector<ParamView>& out) {
  for (auto& l : p.layers) {
    out.push_back({l.weight.data(), static_cast<std::size_t>(l.weight.size())});
    out.push_back({l.bias.data(), static_cast<std::size_t>(l.bias.size())});
  }
}

void collect(ClassifierParams& p, std::vector<ParamView>& out) {
  out.push_back({p.weight.data(), static_cast<std::size_t>(p.weight.size())});
  out.push_back({p.bias.data(), static_cast<std::size_t>(p.bias.size())});
}

}  // namespace

double grad_check(const ModelState& model, const TrainBatch& batch, const LossSpec& spec, double eps) {
  SSLT_CHECK(eps > 0.0 && std::isfinite(eps), ConfigError, "grad_check step must be positive");
  BackwardResult analytic = backward(batch, model, spec);

  ModelState probe = model;
  std::vector<ParamView> params, grads;
  if (spec.train_embedding) {
    collect(probe.embedding, params);
    collect(*analytic.grads.embedding, grads);
  }
  collect(probe.head(spec.head), params);
  collect(analytic.grads.head, grads);

  double worst = 0.0;
  for (std::size_t b = 0; b < params.size(); ++b) {
    for (std::size_t i = 0; i < params[b].size; ++i) {
      double& w = params[b].data[i];
      const double saved = w;
      w = saved + eps;
      const double up = evaluate_loss(batch, probe, spec).total;
      w = saved - eps;
      const double down = evaluate_loss(batch, probe, spec).total;
      w = saved;
      const double numeric = (up - down) / (2.0 * eps);
      const double a = grads[b].data[i];
      const double denom = std::max({std::abs(a), std::abs(numeric), 1e-6});
      worst = std::max(worst, std::abs(a - numeric) / denom);
    }
  }
  return worst;
}

// ---- optimization ---------------------------------------------------------------

OptimState make_optimizer(double base_lr, double momentum, double weight_decay, int total_epochs) {
  SSLT_CHECK(base_lr >= 0.0, ConfigError, "learning rate must be >= 0");
  SSLT_CHECK(total_epochs >= 1, ConfigError, "optimizer horizon must be >= 1 epoch");
  OptimState opt;
  opt.base_lr = base_lr;
  opt.momentum = momentum;
  opt.weight_decay = weight_decay;
  opt.total_epochs = total_epochs;
  return opt;
}

void sgd_update(std::span<double> param, std::span<const double> grad, std::span<double> velocity, double lr,
                double momentum, double weight_decay) {
  SSLT_CHECK(param.size() == grad.size() && param.size() == velocity.size(), ConfigError,
             "sgd_update: parameter, gradient and velocity sizes differ");
  for (std::size_t i = 0; i < param.size(); ++i) {
    velocity[i] = momentum * velocity[i] + grad[i] + weight_decay * param[i];
    param[i] -= lr * velocity[i];
  }
}

namespace {

template <class Block>
void step_block(Block& param, const Block& grad, Block& vel, const OptimState& opt, double lr) {
  SSLT_CHECK(param.rows() == grad.rows() && param.cols() == grad.cols(), ConfigError,
             "gradient shape does not match parameter shape");
  sgd_update(std::span<double>(param.data(), static_cast<std::size_t>(param.size())),
             std::span<const double>(grad.data(), static_cast<std::size_t>(grad.size())),
             std::span<double>(vel.data(), static_cast<std::size_t>(vel.size())), lr, opt.momentum, opt.weight_decay);
}

ClassifierParams zeros_like(const ClassifierParams& p) {
  return {Matrix::Zero(p.weight.rows(), p.weight.cols()), Vector::Zero(p.bias.size())};
}

}  // namespace

void sgd_step(ModelState& model, const Gradients& grads, OptimState& opt) {
  const double lr = cosine_lr(opt.epoch, opt.total_epochs, opt.base_lr);
  ClassifierParams& head = model.head(grads.which);
  if (!opt.velocity_head) opt.velocity_head = zeros_like(head);
  step_block(head.weight, grads.head.weight, opt.velocity_head->weight, opt, lr);
  step_block(head.bias, grads.head.bias, opt.velocity_head->bias, opt, lr);

  if (grads.embedding) {
    auto& layers = model.embedding.layers;
    SSLT_CHECK(grads.embedding->layers.size() == layers.size(), ConfigError, "embedding gradient depth mismatch");
    if (!opt.velocity_embedding) {
      EmbeddingParams v;
      for (const auto& l : layers)
        v.layers.push_back({Matrix::Zero(l.weight.rows(), l.weight.cols()), Vector::Zero(l.bias.size())});
      opt.velocity_embedding = std::move(v);
    }
    for (std::size_t k = 0; k < layers.size(); ++k) {
      step_block(layers[k].weight, grads.embedding->layers[k].weight, opt.velocity_embedding->layers[k].weight, opt,
                 lr);
      step_block(layers[k].bias, grads.embedding->layers[k].bias, opt.velocity_embedding->layers[k].bias, opt, lr);
    }
  }
}

double cosine_lr(int epoch, int total, double base) {
  SSLT_CHECK(total >= 1, ConfigError, "cosine schedule needs total >= 1");
  SSLT_CHECK(epoch >= 0 && epoch <= total, ConfigError, "cosine schedule epoch out of range");
  constexpr double pi = 3.14159265358979323846;
  return base * 0.5 * (1.0 + std::cos(pi * static_cast<double>(epoch) / static_cast<double>(total)));
}

}  // namespace sslt
