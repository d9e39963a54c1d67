#include "sslt/datagen.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

#include <json.hpp>

#include "sslt/errors.hpp"

namespace sslt {

using json = nlohmann::json;

// ---- corpora ------------------------------------------------------------------

LabeledExample LabeledSet::example(int i) const {
  SSLT_CHECK(i >= 0 && i < size(), ContractError, "example index out of range");
  const auto row = features.row(i);
  return {std::vector<double>(row.data(), row.data() + row.size()), labels[static_cast<std::size_t>(i)]};
}

LabeledSet LabeledSet::from_examples(std::span<const LabeledExample> examples, int num_classes) {
  SSLT_CHECK(num_classes >= 1, ConfigError, "num_classes must be >= 1");
  LabeledSet set;
  set.class_counts.assign(static_cast<std::size_t>(num_classes), 0);
  const auto dim = examples.empty() ? 0 : static_cast<Eigen::Index>(examples.front().features.size());
  set.features.resize(static_cast<Eigen::Index>(examples.size()), dim);
  set.labels.reserve(examples.size());
  for (std::size_t i = 0; i < examples.size(); ++i) {
    const auto& ex = examples[i];
    SSLT_CHECK(static_cast<Eigen::Index>(ex.features.size()) == dim, DataError,
               "example " + std::to_string(i) + " has a different feature dimension");
    SSLT_CHECK(ex.label >= 0 && ex.label < num_classes, DataError,
               "example " + std::to_string(i) + " has label " + std::to_string(ex.label) + " outside [0, C)");
    for (Eigen::Index k = 0; k < dim; ++k) set.features(static_cast<Eigen::Index>(i), k) = ex.features[k];
    set.labels.push_back(ex.label);
    ++set.class_counts[static_cast<std::size_t>(ex.label)];
  }
  return set;
}

void LabeledSet::validate() const {
  SSLT_CHECK(features.rows() == static_cast<Eigen::Index>(labels.size()), DataError,
             "feature rows and labels disagree");
  std::vector<int> tally(class_counts.size(), 0);
  for (int y : labels) {
    SSLT_CHECK(y >= 0 && y < num_classes(), DataError, "label " + std::to_string(y) + " outside [0, C)");
    ++tally[static_cast<std::size_t>(y)];
  }
  SSLT_CHECK(tally == class_counts, DataError, "class_counts do not match label tallies");
  SSLT_CHECK(features.allFinite(), DataError, "non-finite feature values");
}

bool LabeledSet::counts_non_increasing() const {
  return std::is_sorted(class_counts.begin(), class_counts.end(), std::greater<>());
}

std::vector<int> HiddenLabels::class_counts() const {
  std::vector<int> counts(static_cast<std::size_t>(num_classes), 0);
  for (int y : labels) ++counts.at(static_cast<std::size_t>(y));
  return counts;
}

void PseudoLabeledSet::validate(int unlabeled_size) const {
  SSLT_CHECK(sample_ids.size() == labels.size(), ContractError, "one pseudo label per sample is required");
  SSLT_CHECK(size() == unlabeled_size, ContractError, "pseudo labels must cover every unlabeled sample");
  for (std::size_t i = 0; i < labels.size(); ++i) {
    SSLT_CHECK(labels[i] >= 0 && labels[i] < num_classes, ContractError, "pseudo label out of range");
    SSLT_CHECK(sample_ids[i] >= 0 && sample_ids[i] < unlabeled_size, ContractError, "pseudo sample id out of range");
  }
}

// ---- profiles -------------------------------------------------------------------

long long ClassProfile::total() const { return std::accumulate(counts.begin(), counts.end(), 0LL); }

long long round_count(double value) { return std::llround(value); }

ClassProfile exponential_profile(int num_classes, int n_max, double imbalance) {
  std::vector<std::string> problems;
  if (num_classes < 2) problems.push_back("exponential profile needs C >= 2");
  if (n_max < 1) problems.push_back("n_max must be >= 1");
  if (!(imbalance >= 1.0) || !std::isfinite(imbalance)) problems.push_back("imbalance must be >= 1");
  if (!problems.empty()) throw ConfigError(std::move(problems));

  ClassProfile p;
  p.kind = ProfileKind::exponential;
  p.imbalance = imbalance;
  p.counts.resize(static_cast<std::size_t>(num_classes));
  for (int j = 0; j < num_classes; ++j) {
    const double exponent = -static_cast<double>(j) / static_cast<double>(num_classes - 1);
    p.counts[static_cast<std::size_t>(j)] =
        static_cast<int>(std::max(1LL, round_count(static_cast<double>(n_max) * std::pow(imbalance, exponent))));
  }
  return p;
}

double lomax_sample(double alpha, double scale, Rng& rng) {
  // 1 - U maps [0,1) onto (0,1], keeping the power finite.
  const double u = 1.0 - std::generate_canonical<double, 53>(rng);
  return scale * (std::pow(u, -1.0 / alpha) - 1.0);
}

ClassProfile lomax_profile(int num_classes, double alpha, double scale, int cap, int floor, std::uint64_t seed,
                           LomaxMode mode) {
  std::vector<std::string> problems;
  if (num_classes < 1) problems.push_back("lomax profile needs C >= 1");
  if (!(alpha > 0.0)) problems.push_back("lomax alpha must be > 0");
  if (!(scale > 0.0)) problems.push_back("lomax scale must be > 0");
  if (floor < 1) problems.push_back("lomax floor must be >= 1");
  if (cap < floor) problems.push_back("lomax cap must be >= floor");
  if (!problems.empty()) throw ConfigError(std::move(problems));

  ClassProfile p;
  p.kind = ProfileKind::lomax;
  p.lomax_alpha = alpha;
  p.lomax_scale = scale;
  p.lomax_cap = cap;
  p.lomax_floor = floor;
  p.lomax_mode = mode;
  p.seed = seed;
  p.counts.resize(static_cast<std::size_t>(num_classes));
  Rng rng(seed);
  for (int j = 0; j < num_classes; ++j) {
    double raw = 0.0;
    if (mode == LomaxMode::density) {
      raw = static_cast<double>(cap) * std::pow(1.0 + static_cast<double>(j) / scale, -(alpha + 1.0));
    } else {
      raw = lomax_sample(alpha, scale, rng);
    }
    p.counts[static_cast<std::size_t>(j)] =
        static_cast<int>(std::clamp(round_count(raw), static_cast<long long>(floor), static_cast<long long>(cap)));
  }
  std::sort(p.counts.begin(), p.counts.end(), std::greater<>());
  return p;
}

ClassProfile explicit_profile(std::vector<int> counts) {
  SSLT_CHECK(!counts.empty(), ConfigError, "explicit profile needs at least one class");
  for (int c : counts) SSLT_CHECK(c >= 0, ConfigError, "explicit profile counts must be >= 0");
  ClassProfile p;
  p.kind = ProfileKind::explicit_counts;
  p.counts = std::move(counts);
  return p;
}

// ---- splits ---------------------------------------------------------------------

std::string_view to_string(Split s) {
  switch (s) {
    case Split::many: return "many";
    case Split::medium: return "medium";
    case Split::few: return "few";
  }
  return "?";
}

std::vector<int> SplitSpec::classes_in(Split s) const {
  std::vector<int> out;
  for (std::size_t j = 0; j < tags.size(); ++j)
    if (tags[j] == s) out.push_back(static_cast<int>(j));
  return out;
}

SplitSpec assign_splits(std::span<const int> counts, const SplitRule& rule) {
  const int c = static_cast<int>(counts.size());
  SplitSpec spec;
  spec.rule = rule;
  spec.tags.assign(counts.size(), Split::few);
  if (rule.mode == SplitRule::Mode::count_thresholds) {
    SSLT_CHECK(rule.lo >= 1 && rule.hi > rule.lo, ConfigError, "split thresholds need hi > lo >= 1");
    for (int j = 0; j < c; ++j) {
      const int n = counts[static_cast<std::size_t>(j)];
      spec.tags[static_cast<std::size_t>(j)] = n > rule.hi ? Split::many : (n > rule.lo ? Split::medium : Split::few);
    }
  } else {
    SSLT_CHECK(rule.many_k >= 0 && rule.medium_k >= 0 && rule.many_k + rule.medium_k <= c, ConfigError,
               "split bucket sizes must be >= 0 and sum to at most C");
    std::vector<int> order(counts.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
      return counts[static_cast<std::size_t>(a)] > counts[static_cast<std::size_t>(b)];
    });
    for (int r = 0; r < c; ++r) {
      const Split s = r < rule.many_k ? Split::many : (r < rule.many_k + rule.medium_k ? Split::medium : Split::few);
      spec.tags[static_cast<std::size_t>(order[static_cast<std::size_t>(r)])] = s;
    }
  }
  for (Split s : {Split::many, Split::medium, Split::few})
    if (spec.classes_in(s).empty()) spec.warnings.push_back(std::string(to_string(s)) + "-shot split is empty");
  return spec;
}

SplitSpec assign_splits(const ClassProfile& profile, const SplitRule& rule) {
  return assign_splits(std::span<const int>(profile.counts), rule);
}

// ---- synthetic tasks ------------------------------------------------------------

std::vector<int> unlabeled_counts(std::span<const int> labeled_counts, double factor) {
  SSLT_CHECK(factor >= 0.0 && std::isfinite(factor), ConfigError, "unlabeled factor must be >= 0");
  // Largest-remainder apportionment of M = round(factor * N): every |m_j - M n_j / N| < 1.
  // Integer factors give m_j = factor * n_j exactly.
  const std::size_t c = labeled_counts.size();
  std::vector<int> m(c, 0);
  long long n_total = 0;
  for (int n : labeled_counts) n_total += n;
  if (n_total == 0) return m;
  const long long m_total = round_count(factor * static_cast<double>(n_total));
  std::vector<double> remainder(c);
  long long assigned = 0;
  for (std::size_t j = 0; j < c; ++j) {
    const double quota = static_cast<double>(m_total) * labeled_counts[j] / static_cast<double>(n_total);
    m[j] = static_cast<int>(std::floor(quota));
    remainder[j] = quota - m[j];
    assigned += m[j];
  }
  std::vector<std::size_t> order(c);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t k = 0; assigned < m_total && k < c; ++k, ++assigned) ++m[order[k]];
  return m;
}

Matrix place_class_means(int num_classes, int input_dim, double class_sep, std::uint64_t seed) {
  std::vector<std::string> problems;
  if (num_classes < 2) problems.push_back("need at least 2 classes");
  if (input_dim < 1) problems.push_back("input_dim must be >= 1 to place class means");
  if (!(class_sep > 0.0)) problems.push_back("class_sep must be > 0");
  if (!problems.empty()) throw ConfigError(std::move(problems));

  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (int attempt = 0; attempt < 64; ++attempt) {
    Matrix means(num_classes, input_dim);
    for (Eigen::Index i = 0; i < means.size(); ++i) means.data()[i] = normal(rng);
    double min_dist = std::numeric_limits<double>::infinity();
    for (int a = 0; a < num_classes; ++a)
      for (int b = a + 1; b < num_classes; ++b) min_dist = std::min(min_dist, (means.row(a) - means.row(b)).norm());
    if (min_dist > 1e-9) return means * (class_sep / min_dist);
  }
  throw ConfigError("could not place separable class means in " + std::to_string(input_dim) + " dimensions");
}

namespace {

std::vector<int> permutation(int n, Rng& rng) {
  std::vector<int> idx(static_cast<std::size_t>(n));
  std::iota(idx.begin(), idx.end(), 0);
  std::shuffle(idx.begin(), idx.end(), rng);
  return idx;
}

// Draws `counts[j]` noisy points around each class mean, then shuffles rows.
std::pair<Matrix, std::vector<int>> draw_gaussian(const Matrix& means, std::span<const int> counts, double sigma,
                                                  std::uint64_t seed) {
  Rng rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int total = std::accumulate(counts.begin(), counts.end(), 0);
  Matrix blocked(total, means.cols());
  std::vector<int> labels;
  labels.reserve(static_cast<std::size_t>(total));
  int row = 0;
  for (std::size_t j = 0; j < counts.size(); ++j) {
    for (int k = 0; k < counts[j]; ++k, ++row) {
      for (Eigen::Index d = 0; d < means.cols(); ++d)
        blocked(row, d) = means(static_cast<Eigen::Index>(j), d) + sigma * normal(rng);
      labels.push_back(static_cast<int>(j));
    }
  }
  const auto order = permutation(total, rng);
  Matrix x(total, means.cols());
  std::vector<int> y(static_cast<std::size_t>(total));
  for (int i = 0; i < total; ++i) {
    x.row(i) = blocked.row(order[static_cast<std::size_t>(i)]);
    y[static_cast<std::size_t>(i)] = labels[static_cast<std::size_t>(order[static_cast<std::size_t>(i)])];
  }
  return {std::move(x), std::move(y)};
}

LabeledSet make_labeled(Matrix x, std::vector<int> y, int num_classes) {
  LabeledSet set;
  set.features = std::move(x);
  set.labels = std::move(y);
  set.class_counts.assign(static_cast<std::size_t>(num_classes), 0);
  for (int label : set.labels) ++set.class_counts[static_cast<std::size_t>(label)];
  return set;
}

}  // namespace

Task synth_gaussian_task(const ClassProfile& profile, const GaussianTaskSpec& spec, std::uint64_t seed) {
  std::vector<std::string> problems;
  if (profile.num_classes() < 2) problems.push_back("task needs at least 2 classes");
  if (!(spec.unlabeled_factor > 0.0)) problems.push_back("unlabeled_factor must be > 0");
  if (!(spec.noise_sigma >= 0.0)) problems.push_back("noise_sigma must be >= 0");
  if (spec.test_per_class < 1) problems.push_back("test_per_class must be >= 1");
  for (int n : profile.counts)
    if (n < 1) problems.push_back("every class needs at least one labeled sample");
  if (!problems.empty()) throw ConfigError(std::move(problems));

  const int c = profile.num_classes();
  const Matrix means = place_class_means(c, spec.input_dim, spec.class_sep, derive_seed(seed, 1));

  Task task;
  task.profile = profile;
  auto [xl, yl] = draw_gaussian(means, profile.counts, spec.noise_sigma, derive_seed(seed, 2));
  task.labeled = make_labeled(std::move(xl), std::move(yl), c);

  const auto m = unlabeled_counts(profile.counts, spec.unlabeled_factor);
  auto [xu, yu] = draw_gaussian(means, m, spec.noise_sigma, derive_seed(seed, 3));
  task.unlabeled.features = std::move(xu);
  task.unlabeled_truth = HiddenLabels{std::move(yu), c};

  const std::vector<int> per_test(static_cast<std::size_t>(c), spec.test_per_class);
  auto [xt, yt] = draw_gaussian(means, per_test, spec.noise_sigma, derive_seed(seed, 4));
  task.test = make_labeled(std::move(xt), std::move(yt), c);

  task.splits = assign_splits(profile, spec.split);
  return task;
}

// ---- CIFAR-10 -------------------------------------------------------------------

LabeledSet decode_cifar10_records(std::string_view bytes, const std::string& source) {
  const std::size_t n = bytes.size() / kCifarRecordBytes;
  if (bytes.size() % kCifarRecordBytes != 0) {
    throw DataError(source + ": truncated CIFAR-10 record at byte offset " + std::to_string(n * kCifarRecordBytes) +
                    " (file length " + std::to_string(bytes.size()) + " is not a multiple of 3073)");
  }
  LabeledSet set;
  set.features.resize(static_cast<Eigen::Index>(n), kCifarPixels);
  set.labels.resize(n);
  set.class_counts.assign(kCifarClasses, 0);
  for (std::size_t r = 0; r < n; ++r) {
    const std::size_t offset = r * kCifarRecordBytes;
    const int label = static_cast<unsigned char>(bytes[offset]);
    if (label >= kCifarClasses)
      throw DataError(source + ": invalid label " + std::to_string(label) + " at byte offset " + std::to_string(offset));
    set.labels[r] = label;
    ++set.class_counts[static_cast<std::size_t>(label)];
    for (int p = 0; p < kCifarPixels; ++p)
      set.features(static_cast<Eigen::Index>(r), p) =
          static_cast<double>(static_cast<unsigned char>(bytes[offset + 1 + static_cast<std::size_t>(p)])) / 255.0;
  }
  return set;
}

LabeledSet ingest_cifar10_binary(std::span<const std::filesystem::path> paths) {
  LabeledSet all;
  all.features.resize(0, kCifarPixels);
  all.class_counts.assign(kCifarClasses, 0);
  for (const auto& path : paths) {
    std::string bytes;
    try {
      bytes = read_file(path);
    } catch (const IoError& e) {
      throw DataError(e.what());
    }
    LabeledSet part = decode_cifar10_records(bytes, path.string());
    const auto old_rows = all.features.rows();
    all.features.conservativeResize(old_rows + part.features.rows(), kCifarPixels);
    all.features.bottomRows(part.features.rows()) = part.features;
    all.labels.insert(all.labels.end(), part.labels.begin(), part.labels.end());
    for (int j = 0; j < kCifarClasses; ++j)
      all.class_counts[static_cast<std::size_t>(j)] += part.class_counts[static_cast<std::size_t>(j)];
  }
  return all;
}

namespace {

std::vector<std::vector<int>> indices_by_class(const LabeledSet& set) {
  std::vector<std::vector<int>> by_class(static_cast<std::size_t>(set.num_classes()));
  for (int i = 0; i < set.size(); ++i) by_class[static_cast<std::size_t>(set.labels[static_cast<std::size_t>(i)])].push_back(i);
  return by_class;
}

// For each class, a seeded shuffle of its indices. Selections take prefixes.
std::vector<std::vector<int>> shuffled_by_class(const LabeledSet& set, const ClassProfile& profile,
                                                std::span<const int> needed, Rng& rng) {
  SSLT_CHECK(profile.num_classes() == set.num_classes(), ConfigError,
             "profile has " + std::to_string(profile.num_classes()) + " classes, data has " +
                 std::to_string(set.num_classes()));
  auto by_class = indices_by_class(set);
  for (std::size_t j = 0; j < by_class.size(); ++j) {
    if (static_cast<int>(by_class[j].size()) < needed[j]) {
      throw DataError("class " + std::to_string(j) + " has " + std::to_string(by_class[j].size()) +
                      " samples, profile needs " + std::to_string(needed[j]));
    }
    std::shuffle(by_class[j].begin(), by_class[j].end(), rng);
  }
  return by_class;
}

LabeledSet gather(const LabeledSet& set, std::vector<int> rows, Rng& rng) {
  std::shuffle(rows.begin(), rows.end(), rng);
  Matrix x(static_cast<Eigen::Index>(rows.size()), set.features.cols());
  std::vector<int> y(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    x.row(static_cast<Eigen::Index>(i)) = set.features.row(rows[i]);
    y[i] = set.labels[static_cast<std::size_t>(rows[i])];
  }
  return make_labeled(std::move(x), std::move(y), set.num_classes());
}

}  // namespace

LabeledSet subsample_to_profile(const LabeledSet& set, const ClassProfile& profile, std::uint64_t seed) {
  Rng rng(seed);
  const auto by_class = shuffled_by_class(set, profile, profile.counts, rng);
  std::vector<int> rows;
  for (std::size_t j = 0; j < by_class.size(); ++j)
    rows.insert(rows.end(), by_class[j].begin(), by_class[j].begin() + profile.counts[j]);
  return gather(set, std::move(rows), rng);
}

Task split_labeled_unlabeled(const LabeledSet& pool, const ClassProfile& profile, double factor, const LabeledSet& test,
                             const SplitRule& rule, std::uint64_t seed) {
  const auto m = unlabeled_counts(profile.counts, factor);
  std::vector<int> needed(m.size());
  for (std::size_t j = 0; j < m.size(); ++j) needed[j] = profile.counts[j] + m[j];
  Rng rng(seed);
  const auto by_class = shuffled_by_class(pool, profile, needed, rng);

  std::vector<int> labeled_rows, unlabeled_rows;
  for (std::size_t j = 0; j < by_class.size(); ++j) {
    labeled_rows.insert(labeled_rows.end(), by_class[j].begin(), by_class[j].begin() + profile.counts[j]);
    unlabeled_rows.insert(unlabeled_rows.end(), by_class[j].begin() + profile.counts[j],
                          by_class[j].begin() + needed[j]);
  }
  Task task;
  task.profile = profile;
  task.labeled = gather(pool, std::move(labeled_rows), rng);
  LabeledSet u = gather(pool, std::move(unlabeled_rows), rng);
  task.unlabeled.features = std::move(u.features);
  task.unlabeled_truth = HiddenLabels{std::move(u.labels), pool.num_classes()};
  task.test = test;
  task.splits = assign_splits(profile, rule);
  return task;
}

// ---- on-disk datasets -------------------------------------------------------------

namespace {

constexpr char kDataMagic[8] = {'S', 'S', 'L', 'T', 'D', 'A', 'T', 'A'};
constexpr std::uint32_t kDataVersion = 1;

void put(std::string& out, std::uint64_t v, int n) {
  for (int i = 0; i < n; ++i) out.push_back(static_cast<char>((v >> (8 * i)) & 0xff));
}

std::string encode_block(const Matrix& x, const std::vector<int>* labels, std::uint64_t config_hash) {
  std::string out(kDataMagic, sizeof kDataMagic);
  put(out, kDataVersion, 4);
  put(out, config_hash, 8);
  put(out, static_cast<std::uint64_t>(x.rows()), 4);
  put(out, static_cast<std::uint64_t>(x.cols()), 4);
  put(out, labels ? 1 : 0, 4);
  if (labels)
    for (int y : *labels) put(out, static_cast<std::uint32_t>(y), 4);
  for (Eigen::Index i = 0; i < x.size(); ++i) put(out, std::bit_cast<std::uint64_t>(x.data()[i]), 8);
  put(out, fnv1a64(out), 8);
  return out;
}

struct Block {
  Matrix x;
  std::vector<int> labels;
  bool has_labels = false;
  std::uint64_t config_hash = 0;
};

Block decode_block(std::string_view in, const std::string& name) {
  std::size_t pos = 0;
  auto get = [&](int n) {
    if (in.size() - pos < static_cast<std::size_t>(n))
      throw DataError(name + ": truncated at byte offset " + std::to_string(pos));
    std::uint64_t v = 0;
    for (int i = 0; i < n; ++i) v |= static_cast<std::uint64_t>(static_cast<unsigned char>(in[pos + static_cast<std::size_t>(i)])) << (8 * i);
    pos += static_cast<std::size_t>(n);
    return v;
  };
  if (in.substr(0, sizeof kDataMagic) != std::string_view(kDataMagic, sizeof kDataMagic))
    throw DataError(name + ": bad magic");
  pos = sizeof kDataMagic;
  if (get(4) != kDataVersion) throw DataError(name + ": unsupported version");
  Block b;
  b.config_hash = get(8);
  const auto rows = static_cast<Eigen::Index>(get(4));
  const auto cols = static_cast<Eigen::Index>(get(4));
  b.has_labels = get(4) != 0;
  if (b.has_labels) {
    b.labels.resize(static_cast<std::size_t>(rows));
    for (auto& y : b.labels) y = static_cast<int>(get(4));
  }
  b.x.resize(rows, cols);
  for (Eigen::Index i = 0; i < b.x.size(); ++i) b.x.data()[i] = std::bit_cast<double>(get(8));
  const std::size_t payload = pos;
  if (get(8) != fnv1a64(in.substr(0, payload))) throw DataError(name + ": checksum mismatch");
  return b;
}

json split_rule_json(const SplitRule& r) {
  if (r.mode == SplitRule::Mode::count_thresholds) return {{"mode", "threshold"}, {"hi", r.hi}, {"lo", r.lo}};
  return {{"mode", "rank"}, {"many", r.many_k}, {"medium", r.medium_k}};
}

SplitRule split_rule_from_json(const json& j) {
  if (j.at("mode") == "threshold") return SplitRule::thresholds(j.at("hi"), j.at("lo"));
  return SplitRule::ranks(j.at("many"), j.at("medium"));
}

std::string_view profile_kind_name(ProfileKind k) {
  switch (k) {
    case ProfileKind::exponential: return "exponential";
    case ProfileKind::lomax: return "lomax";
    case ProfileKind::explicit_counts: return "explicit";
  }
  return "explicit";
}

}  // namespace

void write_dataset(const std::filesystem::path& dir, const Task& task, std::uint64_t seed, std::uint64_t config_hash) {
  std::filesystem::create_directories(dir);
  const auto& p = task.profile;
  json profile = {{"kind", profile_kind_name(p.kind)}, {"counts", p.counts}};
  if (p.kind == ProfileKind::exponential) profile["imbalance"] = p.imbalance;
  if (p.kind == ProfileKind::lomax) {
    profile["alpha"] = p.lomax_alpha;
    profile["scale"] = p.lomax_scale;
    profile["cap"] = p.lomax_cap;
    profile["floor"] = p.lomax_floor;
    profile["mode"] = p.lomax_mode == LomaxMode::density ? "density" : "draw";
    profile["seed"] = p.seed;
  }
  std::vector<std::string> tags;
  for (Split s : task.splits.tags) tags.emplace_back(to_string(s));
  json manifest = {
      {"format", "sslt-dataset"},
      {"version", kDataVersion},
      {"config_hash", hex64(config_hash)},
      {"seed", seed},
      {"num_classes", task.labeled.num_classes()},
      {"feature_dim", task.labeled.dim()},
      {"profile", profile},
      {"labeled_counts", task.labeled.class_counts},
      {"unlabeled_counts", task.unlabeled_truth ? task.unlabeled_truth->class_counts() : std::vector<int>{}},
      {"unlabeled_size", task.unlabeled.size()},
      {"test_counts", task.test.class_counts},
      {"splits", {{"rule", split_rule_json(task.splits.rule)}, {"tags", tags}}},
      {"files", {{"labeled", "labeled.bin"}, {"unlabeled", "unlabeled.bin"}, {"test", "test.bin"}}},
  };
  write_file_atomic(dir / "labeled.bin", encode_block(task.labeled.features, &task.labeled.labels, config_hash));
  write_file_atomic(dir / "unlabeled.bin",
                    encode_block(task.unlabeled.features, task.unlabeled_truth ? &task.unlabeled_truth->labels : nullptr, config_hash));
  write_file_atomic(dir / "test.bin", encode_block(task.test.features, &task.test.labels, config_hash));
  write_file_atomic(dir / "manifest.json", manifest.dump(2) + "\n");
}

Task read_dataset(const std::filesystem::path& dir) {
  json manifest;
  try {
    manifest = json::parse(read_file(dir / "manifest.json"));
  } catch (const json::exception& e) {
    throw DataError("manifest.json: " + std::string(e.what()));
  } catch (const IoError& e) {
    throw DataError(e.what());
  }
  try {
    const int c = manifest.at("num_classes");
    auto load = [&](const std::string& key) {
      const auto name = manifest.at("files").at(key).get<std::string>();
      std::string bytes;
      try {
        bytes = read_file(dir / name);
      } catch (const IoError& e) {
        throw DataError(e.what());
      }
      Block b = decode_block(bytes, name);
      if (hex64(b.config_hash) != manifest.at("config_hash").get<std::string>())
        throw DataError(name + ": config hash differs from the manifest");
      return b;
    };
    Task task;
    auto l = load("labeled");
    task.labeled = make_labeled(std::move(l.x), std::move(l.labels), c);
    auto t = load("test");
    task.test = make_labeled(std::move(t.x), std::move(t.labels), c);
    auto u = load("unlabeled");
    task.unlabeled.features = std::move(u.x);
    if (u.has_labels) task.unlabeled_truth = HiddenLabels{std::move(u.labels), c};

    const auto& prof = manifest.at("profile");
    task.profile.counts = prof.at("counts").get<std::vector<int>>();
    const auto kind = prof.at("kind").get<std::string>();
    task.profile.kind = kind == "exponential" ? ProfileKind::exponential
                        : kind == "lomax"     ? ProfileKind::lomax
                                              : ProfileKind::explicit_counts;
    if (task.profile.kind == ProfileKind::exponential) task.profile.imbalance = prof.at("imbalance");
    if (task.profile.kind == ProfileKind::lomax) {
      task.profile.lomax_alpha = prof.at("alpha");
      task.profile.lomax_scale = prof.at("scale");
      task.profile.lomax_cap = prof.at("cap");
      task.profile.lomax_floor = prof.at("floor");
      task.profile.lomax_mode = prof.at("mode") == "draw" ? LomaxMode::draw : LomaxMode::density;
      task.profile.seed = prof.at("seed");
    }
    task.splits = assign_splits(task.profile, split_rule_from_json(manifest.at("splits").at("rule")));
    task.labeled.validate();
    task.test.validate();
    if (task.labeled.class_counts != manifest.at("labeled_counts").get<std::vector<int>>())
      throw DataError("labeled.bin does not match the manifest's labeled counts");
    return task;
  } catch (const json::exception& e) {
    throw DataError("manifest.json: " + std::string(e.what()));
  }
}

}  // namespace sslt
