#include "sslt/sampling.hpp"

#include <algorithm>
#include <numeric>

#include "sslt/errors.hpp"

namespace sslt {

std::size_t BatchPlan::total_draws() const {
  std::size_t n = 0;
  for (const auto& b : batches) n += b.size();
  return n;
}

ClassIndex build_class_index(std::span<const int> labels, int num_classes, Source source) {
  SSLT_CHECK(num_classes >= 1, ConfigError, "class index needs at least one class");
  ClassIndex index(static_cast<std::size_t>(num_classes));
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const int y = labels[i];
    SSLT_CHECK(y >= 0 && y < num_classes, DataError, "label " + std::to_string(y) + " outside [0, C)");
    index[static_cast<std::size_t>(y)].push_back({source, static_cast<int>(i)});
  }
  return index;
}

ClassIndex build_union_class_index(const LabeledSet& labeled, const PseudoLabeledSet& pseudo) {
  ClassIndex index = build_class_index(labeled.labels, labeled.num_classes(), Source::labeled);
  const ClassIndex extra = build_class_index(pseudo.labels, labeled.num_classes(), Source::pseudo);
  for (std::size_t j = 0; j < index.size(); ++j) index[j].insert(index[j].end(), extra[j].begin(), extra[j].end());
  return index;
}

namespace {

BatchPlan chunk(std::vector<SampleRef> order, int batch, std::uint64_t seed) {
  BatchPlan plan;
  plan.seed = seed;
  for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(batch)) {
    const std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(batch));
    plan.batches.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(start),
                              order.begin() + static_cast<std::ptrdiff_t>(end));
  }
  return plan;
}

}  // namespace

BatchPlan random_batches(int set_size, int batch, std::uint64_t seed, Source source) {
  SSLT_CHECK(batch >= 1, ConfigError, "batch size must be >= 1");
  SSLT_CHECK(set_size >= 0, ConfigError, "set size must be >= 0");
  std::vector<SampleRef> order(static_cast<std::size_t>(set_size));
  for (int i = 0; i < set_size; ++i) order[static_cast<std::size_t>(i)] = {source, i};
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  return chunk(std::move(order), batch, seed);
}

BatchPlan class_balanced_batches(const ClassIndex& index, int batch, int steps, std::uint64_t seed) {
  SSLT_CHECK(batch >= 1, ConfigError, "batch size must be >= 1");
  SSLT_CHECK(steps >= 0, ConfigError, "steps must be >= 0");
  SSLT_CHECK(!index.empty(), ConfigError, "class index is empty");
  for (std::size_t j = 0; j < index.size(); ++j)
    SSLT_CHECK(!index[j].empty(), DataError, "class " + std::to_string(j) + " has no samples to draw from");

  Rng rng(seed);
  std::uniform_int_distribution<std::size_t> pick_class(0, index.size() - 1);
  BatchPlan plan;
  plan.seed = seed;
  plan.batches.resize(static_cast<std::size_t>(steps));
  for (auto& b : plan.batches) {
    b.reserve(static_cast<std::size_t>(batch));
    for (int k = 0; k < batch; ++k) {
      const auto& members = index[pick_class(rng)];
      std::uniform_int_distribution<std::size_t> pick_member(0, members.size() - 1);
      b.push_back(members[pick_member(rng)]);
    }
  }
  return plan;
}

BatchPlan mixed_union_batches(int labeled_size, int pseudo_size, int batch, std::uint64_t seed) {
  SSLT_CHECK(batch >= 1, ConfigError, "batch size must be >= 1");
  SSLT_CHECK(labeled_size >= 0 && pseudo_size >= 0, ConfigError, "set sizes must be >= 0");
  std::vector<SampleRef> order;
  order.reserve(static_cast<std::size_t>(labeled_size + pseudo_size));
  for (int i = 0; i < labeled_size; ++i) order.push_back({Source::labeled, i});
  for (int i = 0; i < pseudo_size; ++i) order.push_back({Source::pseudo, i});
  Rng rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  return chunk(std::move(order), batch, seed);
}

BatchPlan mixed_union_batches(const LabeledSet& labeled, const PseudoLabeledSet& pseudo, int batch,
                              std::uint64_t seed) {
  return mixed_union_batches(labeled.size(), pseudo.size(), batch, seed);
}

int balanced_steps_per_epoch(int n, int batch) {
  SSLT_CHECK(batch >= 1, ConfigError, "batch size must be >= 1");
  return std::max(1, (n + batch - 1) / batch);
}

}  // namespace sslt
