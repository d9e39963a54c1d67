#pragma once

// Cross-entropy, temporal-consistency KL, the combined semi-supervised loss,
// the class-balanced supervised loss, and the per-sample prediction memory
// that supplies last epoch's probabilities.

#include <optional>
#include <span>
#include <vector>

#include "sslt/datagen.hpp"
#include "sslt/netcore.hpp"
#include "sslt/sampling.hpp"

namespace sslt {

inline constexpr double kKlClamp = 1e-12;

/// -log probs[label]. Zero probability is clamped to the smallest positive
/// double rather than producing infinity; NaN input throws NumericError.
double cross_entropy(std::span<const double> probs, int label);
/// Same quantity through log-sum-exp on raw logits.
double cross_entropy_from_logits(std::span<const double> logits, int label);

/// KL(prev || cur) = sum_j prev_j log(prev_j / cur_j), with 0 log 0 = 0. Where
/// cur_j underflows below kKlClamp while prev_j > 0, cur_j is clamped and
/// `clamp_count` (if given) is incremented.
double consistency_kl(std::span<const double> prev, std::span<const double> cur, int* clamp_count = nullptr);

/// Previous-epoch predictions keyed by (source, sample id).
///
/// Predictions recorded during epoch e become readable once begin_epoch(e+1)
/// is called; a lookup only succeeds for entries written in the immediately
/// preceding epoch.
class PredictionMemory {
 public:
  PredictionMemory() = default;
  PredictionMemory(int labeled_size, int pseudo_size, int num_classes);

  void begin_epoch(int epoch);
  int epoch() const { return epoch_; }
  std::optional<std::span<const double>> previous(SampleRef ref) const;
  void record(SampleRef ref, std::span<const double> probs);
  void clear();
  std::size_t readable_count() const;

 private:
  std::size_t row(SampleRef ref) const;

  int labeled_size_ = 0;
  int pseudo_size_ = 0;
  int num_classes_ = 0;
  int epoch_ = 0;
  Matrix current_, previous_;
  std::vector<int> current_stamp_, previous_stamp_;
};

/// Where a batch's rows come from. When feature matrices are supplied the
/// batch is assembled from precomputed embeddings instead of raw inputs.
struct DataView {
  const LabeledSet* labeled = nullptr;
  const UnlabeledSet* unlabeled = nullptr;
  const PseudoLabeledSet* pseudo = nullptr;
  const Matrix* labeled_features = nullptr;
  const Matrix* unlabeled_features = nullptr;
};

TrainBatch assemble_batch(std::span<const SampleRef> refs, const DataView& view);

/// L_semi = mean CE + lambda * mean KL through g' o f. Samples without a
/// previous prediction contribute no consistency term. Afterwards the current
/// p^e of every sample is written to `memory`.
BackwardResult semi_loss(std::span<const SampleRef> refs, const DataView& view, const ModelState& model,
                         PredictionMemory& memory, double lambda);

enum class SourcePolicy { labeled_only, allow_pseudo };

/// L_sup: mean CE through g with the embedding frozen. A pseudo-labeled
/// reference under `labeled_only` throws ContractError.
BackwardResult sup_loss(std::span<const SampleRef> refs, const DataView& view, const ModelState& model,
                        SourcePolicy policy = SourcePolicy::labeled_only);

}  // namespace sslt
