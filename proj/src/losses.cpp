#include "sslt/losses.hpp"

#include <cmath>
#include <limits>

#include "sslt/errors.hpp"

namespace sslt {

double cross_entropy(std::span<const double> probs, int label) {
  SSLT_CHECK(label >= 0 && static_cast<std::size_t>(label) < probs.size(), ContractError, "label out of range");
  for (double p : probs) SSLT_CHECK(!std::isnan(p), NumericError, "NaN in probability vector");
  const double p = std::max(probs[static_cast<std::size_t>(label)], std::numeric_limits<double>::min());
  return -std::log(p);
}

double cross_entropy_from_logits(std::span<const double> logits, int label) {
  SSLT_CHECK(label >= 0 && static_cast<std::size_t>(label) < logits.size(), ContractError, "label out of range");
  double m = -std::numeric_limits<double>::infinity();
  for (double v : logits) {
    SSLT_CHECK(!std::isnan(v), NumericError, "NaN logit");
    m = std::max(m, v);
  }
  double s = 0.0;
  for (double v : logits) s += std::exp(v - m);
  return m + std::log(s) - logits[static_cast<std::size_t>(label)];
}

double consistency_kl(std::span<const double> prev, std::span<const double> cur, int* clamp_count) {
  SSLT_CHECK(prev.size() == cur.size(), ContractError, "KL operands differ in length");
  double kl = 0.0;
  for (std::size_t j = 0; j < prev.size(); ++j) {
    SSLT_CHECK(!std::isnan(prev[j]) && !std::isnan(cur[j]), NumericError, "NaN in KL operand");
    if (prev[j] <= 0.0) continue;
    double q = cur[j];
    if (q < kKlClamp) {
      q = kKlClamp;
      if (clamp_count) ++*clamp_count;
    }
    kl += prev[j] * std::log(prev[j] / q);
  }
  return kl;
}

// ---- prediction memory -----------------------------------------------------------

PredictionMemory::PredictionMemory(int labeled_size, int pseudo_size, int num_classes)
    : labeled_size_(labeled_size), pseudo_size_(pseudo_size), num_classes_(num_classes) {
  SSLT_CHECK(labeled_size >= 0 && pseudo_size >= 0 && num_classes >= 1, ConfigError, "bad prediction memory shape");
  const auto rows = static_cast<Eigen::Index>(labeled_size + pseudo_size);
  current_ = Matrix::Zero(rows, num_classes);
  previous_ = Matrix::Zero(rows, num_classes);
  clear();
}

void PredictionMemory::clear() {
  const auto rows = static_cast<std::size_t>(labeled_size_ + pseudo_size_);
  current_stamp_.assign(rows, -1);
  previous_stamp_.assign(rows, -1);
  epoch_ = 0;
}

void PredictionMemory::begin_epoch(int epoch) {
  SSLT_CHECK(epoch >= epoch_, ContractError, "prediction memory epochs must not go backwards");
  epoch_ = epoch;
  previous_ = current_;
  previous_stamp_ = current_stamp_;
}

std::size_t PredictionMemory::row(SampleRef ref) const {
  const int limit = ref.source == Source::labeled ? labeled_size_ : pseudo_size_;
  SSLT_CHECK(ref.id >= 0 && ref.id < limit, ContractError, "prediction memory key out of range");
  return static_cast<std::size_t>(ref.source == Source::labeled ? ref.id : labeled_size_ + ref.id);
}

std::optional<std::span<const double>> PredictionMemory::previous(SampleRef ref) const {
  const auto r = row(ref);
  if (previous_stamp_[r] < 0 || previous_stamp_[r] != epoch_ - 1) return std::nullopt;
  return std::span<const double>(previous_.row(static_cast<Eigen::Index>(r)).data(),
                                 static_cast<std::size_t>(num_classes_));
}

void PredictionMemory::record(SampleRef ref, std::span<const double> probs) {
  SSLT_CHECK(static_cast<int>(probs.size()) == num_classes_, ContractError, "prediction has wrong class count");
  double sum = 0.0;
  for (double p : probs) {
    SSLT_CHECK(p >= 0.0 && p <= 1.0, ContractError, "memory entries must be probability vectors");
    sum += p;
  }
  SSLT_CHECK(std::abs(sum - 1.0) < 1e-9, ContractError, "memory entries must sum to 1");
  const auto r = row(ref);
  for (int j = 0; j < num_classes_; ++j) current_(static_cast<Eigen::Index>(r), j) = probs[static_cast<std::size_t>(j)];
  current_stamp_[r] = epoch_;
}

std::size_t PredictionMemory::readable_count() const {
  std::size_t n = 0;
  for (int s : previous_stamp_) n += (s >= 0 && s == epoch_ - 1) ? 1 : 0;
  return n;
}

// ---- batches ----------------------------------------------------------------------

TrainBatch assemble_batch(std::span<const SampleRef> refs, const DataView& view) {
  SSLT_CHECK(view.labeled != nullptr, ContractError, "data view without labeled set");
  const bool use_features = view.labeled_features != nullptr;
  const Eigen::Index width = use_features ? view.labeled_features->cols() : view.labeled->features.cols();

  TrainBatch batch;
  batch.inputs_are_features = use_features;
  batch.inputs.resize(static_cast<Eigen::Index>(refs.size()), width);
  batch.labels.resize(refs.size());
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const auto& ref = refs[i];
    const auto r = static_cast<Eigen::Index>(i);
    if (ref.source == Source::labeled) {
      SSLT_CHECK(ref.id >= 0 && ref.id < view.labeled->size(), ContractError, "labeled id out of range");
      batch.inputs.row(r) = use_features ? view.labeled_features->row(ref.id) : view.labeled->features.row(ref.id);
      batch.labels[i] = view.labeled->labels[static_cast<std::size_t>(ref.id)];
    } else {
      SSLT_CHECK(view.pseudo != nullptr && view.unlabeled != nullptr, ContractError,
                 "pseudo-labeled reference without pseudo-labeled data");
      SSLT_CHECK(ref.id >= 0 && ref.id < view.pseudo->size(), ContractError, "pseudo id out of range");
      const int u = view.pseudo->sample_ids[static_cast<std::size_t>(ref.id)];
      if (use_features) {
        SSLT_CHECK(view.unlabeled_features != nullptr, ContractError, "missing precomputed unlabeled features");
        batch.inputs.row(r) = view.unlabeled_features->row(u);
      } else {
        batch.inputs.row(r) = view.unlabeled->features.row(u);
      }
      batch.labels[i] = view.pseudo->labels[static_cast<std::size_t>(ref.id)];
    }
  }
  return batch;
}

BackwardResult semi_loss(std::span<const SampleRef> refs, const DataView& view, const ModelState& model,
                         PredictionMemory& memory, double lambda) {
  TrainBatch batch = assemble_batch(refs, view);
  SSLT_CHECK(!batch.inputs_are_features, ContractError, "semi-supervised loss trains the embedding");
  const int c = model.num_classes();
  batch.previous = Matrix::Zero(batch.size(), c);
  batch.has_previous.assign(refs.size(), false);
  for (std::size_t i = 0; i < refs.size(); ++i) {
    if (auto prev = memory.previous(refs[i])) {
      batch.has_previous[i] = true;
      for (int j = 0; j < c; ++j) batch.previous(static_cast<Eigen::Index>(i), j) = (*prev)[static_cast<std::size_t>(j)];
    }
  }
  BackwardResult result = backward(batch, model, LossSpec::semi(lambda));
  for (std::size_t i = 0; i < refs.size(); ++i)
    memory.record(refs[i], std::span<const double>(result.probs.row(static_cast<Eigen::Index>(i)).data(),
                                                   static_cast<std::size_t>(c)));
  return result;
}

BackwardResult sup_loss(std::span<const SampleRef> refs, const DataView& view, const ModelState& model,
                        SourcePolicy policy) {
  if (policy == SourcePolicy::labeled_only) {
    for (const auto& ref : refs)
      SSLT_CHECK(ref.source == Source::labeled, ContractError,
                 "pseudo-labeled sample reached the supervised classifier loss");
  }
  return backward(assemble_batch(refs, view), model, LossSpec::supervised());
}

}  // namespace sslt
