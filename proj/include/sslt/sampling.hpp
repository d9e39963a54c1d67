#pragma once

// Minibatch plans: random sampling (without replacement per epoch) and
// class-balanced sampling (class uniform, then instance uniform with
// replacement).

#include <cstdint>
#include <span>
#include <vector>

#include "sslt/datagen.hpp"

namespace sslt {

enum class Source : std::uint8_t { labeled, pseudo };

struct SampleRef {
  Source source = Source::labeled;
  int id = 0;  // row in D, or position in the pseudo-labeled set

  friend bool operator==(const SampleRef&, const SampleRef&) = default;
};

struct BatchPlan {
  std::vector<std::vector<SampleRef>> batches;
  std::uint64_t seed = 0;

  std::size_t total_draws() const;
  friend bool operator==(const BatchPlan&, const BatchPlan&) = default;
};

/// Per-class lists of samples, the input of class-balanced sampling.
using ClassIndex = std::vector<std::vector<SampleRef>>;

ClassIndex build_class_index(std::span<const int> labels, int num_classes, Source source);
/// Class index over D united with U-hat, keyed by true labels for D and by
/// pseudo labels for U-hat.
ClassIndex build_union_class_index(const LabeledSet& labeled, const PseudoLabeledSet& pseudo);

/// A seeded shuffle of [0, set_size) chunked into batches of `batch`; only the
/// last batch may be shorter.
BatchPlan random_batches(int set_size, int batch, std::uint64_t seed, Source source = Source::labeled);

/// `steps` batches of `batch` draws each: a class uniformly from C, then an
/// instance uniformly (with replacement) from that class.
BatchPlan class_balanced_batches(const ClassIndex& index, int batch, int steps, std::uint64_t seed);

/// Random batches over the concatenation of D (ids 0..N-1) and U-hat
/// (ids 0..M-1), each reference tagged with its source.
BatchPlan mixed_union_batches(int labeled_size, int pseudo_size, int batch, std::uint64_t seed);
BatchPlan mixed_union_batches(const LabeledSet& labeled, const PseudoLabeledSet& pseudo, int batch,
                              std::uint64_t seed);

/// Steps that make one class-balanced "epoch": ceil(n / batch).
int balanced_steps_per_epoch(int n, int batch);

}  // namespace sslt
