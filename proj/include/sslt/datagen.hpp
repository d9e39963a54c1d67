#pragma once

// Long-tailed corpora: class-count profiles, synthetic Gaussian tasks,
// CIFAR-10 binary ingestion and many/medium/few split bookkeeping.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "sslt/common.hpp"

namespace sslt {

struct LabeledExample {
  std::vector<double> features;
  int label = 0;
};

/// Labeled corpus D (or a balanced test set). Rows of `features` are samples.
struct LabeledSet {
  Matrix features;
  std::vector<int> labels;
  std::vector<int> class_counts;  // n_j

  int num_classes() const { return static_cast<int>(class_counts.size()); }
  int size() const { return static_cast<int>(labels.size()); }
  int dim() const { return static_cast<int>(features.cols()); }
  LabeledExample example(int i) const;

  static LabeledSet from_examples(std::span<const LabeledExample> examples, int num_classes);
  /// Labels in range, tallies equal class_counts, finite features.
  void validate() const;
  /// n_i <= n_j for all i > j.
  bool counts_non_increasing() const;
};

/// Unlabeled corpus U as seen by training code: features only.
struct UnlabeledSet {
  Matrix features;

  int size() const { return static_cast<int>(features.rows()); }
  int dim() const { return static_cast<int>(features.cols()); }
};

/// Ground-truth labels of U, kept apart from UnlabeledSet so nothing that
/// trains a model can reach them. Only evaluation code takes this type.
struct HiddenLabels {
  std::vector<int> labels;
  int num_classes = 0;

  std::vector<int> class_counts() const;  // m_j
};

/// U with pseudo labels assigned (U-hat).
struct PseudoLabeledSet {
  std::vector<int> sample_ids;  // indices into the UnlabeledSet
  std::vector<int> labels;      // y-hat_i
  int num_classes = 0;

  int size() const { return static_cast<int>(labels.size()); }
  void validate(int unlabeled_size) const;
};

// ---- class profiles ---------------------------------------------------------

enum class ProfileKind { exponential, lomax, explicit_counts };
enum class LomaxMode {
  density,  // counts follow the Lomax density over class rank, scaled to `cap`
  draw,     // one random Lomax draw per class, clamped to [floor, cap]
};

struct ClassProfile {
  ProfileKind kind = ProfileKind::explicit_counts;
  std::vector<int> counts;
  double imbalance = 1.0;
  double lomax_alpha = 0.0;
  double lomax_scale = 0.0;
  int lomax_cap = 0;
  int lomax_floor = 0;
  LomaxMode lomax_mode = LomaxMode::density;
  std::uint64_t seed = 0;

  int num_classes() const { return static_cast<int>(counts.size()); }
  long long total() const;
};

/// Half-away-from-zero rounding used for every profile count.
long long round_count(double value);

/// counts[j] = round(n_max * imbalance^(-j/(C-1))), clamped to >= 1.
ClassProfile exponential_profile(int num_classes, int n_max, double imbalance);

/// One Lomax(shape alpha, scale) variate by inverse CDF: scale * (U^(-1/alpha) - 1), U in (0,1].
double lomax_sample(double alpha, double scale, Rng& rng);

/// Lomax-shaped profile, sorted non-increasing. In `density` mode the counts
/// are round(cap * (1 + j/scale)^-(alpha+1)) clamped to >= floor; in `draw`
/// mode each class count is a rounded Lomax draw clamped to [floor, cap].
ClassProfile lomax_profile(int num_classes, double alpha, double scale, int cap, int floor, std::uint64_t seed,
                           LomaxMode mode = LomaxMode::density);

ClassProfile explicit_profile(std::vector<int> counts);

// ---- splits -----------------------------------------------------------------

enum class Split { many = 0, medium = 1, few = 2 };
inline constexpr int kNumSplits = 3;
std::string_view to_string(Split s);

struct SplitRule {
  enum class Mode { count_thresholds, rank_buckets } mode = Mode::rank_buckets;
  int hi = 100;  // many: n > hi
  int lo = 10;   // medium: lo < n <= hi; few: n <= lo
  int many_k = 3;
  int medium_k = 3;

  static SplitRule thresholds(int hi, int lo) { return {Mode::count_thresholds, hi, lo, 0, 0}; }
  static SplitRule ranks(int many_k, int medium_k) { return {Mode::rank_buckets, 100, 10, many_k, medium_k}; }
};

struct SplitSpec {
  std::vector<Split> tags;  // one per class
  SplitRule rule;
  std::vector<std::string> warnings;  // e.g. an empty split

  int num_classes() const { return static_cast<int>(tags.size()); }
  std::vector<int> classes_in(Split s) const;
};

/// Rank mode orders classes by decreasing count, ties broken by lower class
/// index. Threshold mode uses the labeled counts directly.
SplitSpec assign_splits(const ClassProfile& profile, const SplitRule& rule);
SplitSpec assign_splits(std::span<const int> counts, const SplitRule& rule);

// ---- synthetic tasks ----------------------------------------------------------

struct GaussianTaskSpec {
  int input_dim = 16;
  double unlabeled_factor = 5.0;
  double class_sep = 4.0;
  double noise_sigma = 1.0;
  int test_per_class = 100;
  SplitRule split = SplitRule::ranks(3, 3);
};

struct Task {
  LabeledSet labeled;
  UnlabeledSet unlabeled;
  std::optional<HiddenLabels> unlabeled_truth;
  LabeledSet test;
  SplitSpec splits;
  ClassProfile profile;
};

/// Per-class unlabeled counts summing to round(factor * N), apportioned by
/// largest remainder so each m_j is within 1 of its share.
std::vector<int> unlabeled_counts(std::span<const int> labeled_counts, double factor);

/// Seeded random class means rescaled so the closest pair sits exactly
/// `class_sep` apart.
Matrix place_class_means(int num_classes, int input_dim, double class_sep, std::uint64_t seed);

Task synth_gaussian_task(const ClassProfile& profile, const GaussianTaskSpec& spec, std::uint64_t seed);

// ---- CIFAR-10 -----------------------------------------------------------------

inline constexpr int kCifarRecordBytes = 3073;
inline constexpr int kCifarPixels = 3072;
inline constexpr int kCifarClasses = 10;

/// Reads CIFAR-10 binary batches (1 label byte + 3072 channel-planar pixel
/// bytes per record). Pixels are scaled to [0,1]. Throws DataError with the
/// byte offset of the first bad record.
LabeledSet ingest_cifar10_binary(std::span<const std::filesystem::path> paths);
LabeledSet decode_cifar10_records(std::string_view bytes, const std::string& source = "<memory>");

/// Uniform per-class subsampling without replacement to exactly the profile's
/// counts. Throws DataError naming the first class that falls short.
LabeledSet subsample_to_profile(const LabeledSet& set, const ClassProfile& profile, std::uint64_t seed);

/// Draws D to the profile and U with round(factor * n_j) per class from the
/// remaining samples of `pool`.
Task split_labeled_unlabeled(const LabeledSet& pool, const ClassProfile& profile, double factor, const LabeledSet& test,
                             const SplitRule& rule, std::uint64_t seed);

// ---- on-disk datasets -----------------------------------------------------------

/// Writes manifest.json plus labeled.bin, unlabeled.bin and test.bin.
void write_dataset(const std::filesystem::path& dir, const Task& task, std::uint64_t seed, std::uint64_t config_hash);
Task read_dataset(const std::filesystem::path& dir);

}  // namespace sslt
