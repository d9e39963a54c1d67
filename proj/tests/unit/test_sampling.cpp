#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <map>

#include "sslt/errors.hpp"
#include "sslt/sampling.hpp"

using namespace sslt;

namespace {

std::vector<int> profile_labels(const std::vector<int>& counts) {
  std::vector<int> labels;
  for (std::size_t j = 0; j < counts.size(); ++j) labels.insert(labels.end(), static_cast<std::size_t>(counts[j]), static_cast<int>(j));
  return labels;
}

}  // namespace

TEST_CASE("random batches cover every id exactly once per epoch") {
  for (int n : {1, 7, 64, 1000}) {
    for (int batch : {1, 3, 64, 2000}) {
      const BatchPlan plan = random_batches(n, batch, 99);
      std::vector<int> seen;
      for (std::size_t b = 0; b < plan.batches.size(); ++b) {
        if (b + 1 < plan.batches.size()) CHECK(static_cast<int>(plan.batches[b].size()) == batch);
        for (const auto& r : plan.batches[b]) seen.push_back(r.id);
      }
      std::sort(seen.begin(), seen.end());
      std::vector<int> expect(static_cast<std::size_t>(n));
      std::iota(expect.begin(), expect.end(), 0);
      CHECK(seen == expect);
    }
  }
  CHECK(random_batches(50, 8, 3) == random_batches(50, 8, 3));
  CHECK_FALSE(random_batches(50, 8, 3) == random_batches(50, 8, 4));
  CHECK_THROWS_AS(random_batches(10, 0, 1), ConfigError);
}

TEST_CASE("random sampling follows the long-tailed class shares") {
  const std::vector<int> counts = exponential_profile(10, 500, 100.0).counts;
  const auto labels = profile_labels(counts);
  const int n = static_cast<int>(labels.size());
  long long total = 0, class0 = 0;
  for (std::uint64_t epoch = 0; total < 100000; ++epoch) {
    for (const auto& b : random_batches(n, 64, derive_seed(5, epoch)).batches)
      for (const auto& r : b) {
        if (total == 100000) break;
        ++total;
        class0 += labels[static_cast<std::size_t>(r.id)] == 0;
      }
  }
  CHECK(std::abs(static_cast<double>(class0) / total - 500.0 / n) < 0.01);
}

TEST_CASE("class-balanced draws are uniform over classes") {
  const std::vector<int> counts = exponential_profile(10, 500, 100.0).counts;
  const ClassIndex index = build_class_index(profile_labels(counts), 10, Source::labeled);
  for (std::uint64_t seed : {1ull, 2ull, 3ull}) {
    const BatchPlan plan = class_balanced_batches(index, 100, 1000, seed);
    CHECK(plan.total_draws() == 100000);
    const auto labels = profile_labels(counts);
    std::vector<int> freq(10, 0);
    for (const auto& b : plan.batches)
      for (const auto& r : b) ++freq[static_cast<std::size_t>(labels[static_cast<std::size_t>(r.id)])];
    const double sigma = std::sqrt(0.1 * 0.9 / 1e5);
    for (int j = 0; j < 10; ++j) CHECK(std::abs(freq[static_cast<std::size_t>(j)] / 1e5 - 0.1) < 4 * sigma);
  }
}

TEST_CASE("a single-sample class is drawn about 1/C of the time") {
  const ClassIndex index = build_class_index(std::vector<int>{0, 0, 0, 0, 1, 2, 2}, 3, Source::labeled);
  const BatchPlan plan = class_balanced_batches(index, 50, 600, 8);
  long long hits = 0;
  for (const auto& b : plan.batches)
    for (const auto& r : b) hits += r.id == 4;
  const double share = static_cast<double>(hits) / 30000.0;
  CHECK(std::abs(share - 1.0 / 3.0) < 4 * std::sqrt((1.0 / 3) * (2.0 / 3) / 30000.0));
}

TEST_CASE("uniform classes make balanced sampling uniform over samples") {
  const ClassIndex index = build_class_index(profile_labels({20, 20, 20, 20, 20}), 5, Source::labeled);
  const BatchPlan plan = class_balanced_batches(index, 100, 1000, 12);
  std::vector<int> freq(100, 0);
  for (const auto& b : plan.batches)
    for (const auto& r : b) ++freq[static_cast<std::size_t>(r.id)];
  const double sigma = std::sqrt(0.01 * 0.99 / 1e5);
  for (int c : freq) CHECK(std::abs(c / 1e5 - 0.01) < 5 * sigma);
}

TEST_CASE("empty class is a data error naming it") {
  const ClassIndex index = build_class_index(std::vector<int>{0, 0, 2}, 3, Source::labeled);
  try {
    class_balanced_batches(index, 4, 2, 1);
    FAIL("expected DataError");
  } catch (const DataError& e) {
    CHECK(std::string(e.what()).find("class 1") != std::string::npos);
  }
}

TEST_CASE("union batches tag sources and cover D and U-hat once") {
  const BatchPlan plan = mixed_union_batches(100, 500, 32, 4);
  std::map<std::pair<int, int>, int> seen;
  for (const auto& b : plan.batches)
    for (const auto& r : b) ++seen[{static_cast<int>(r.source), r.id}];
  CHECK(seen.size() == 600);
  for (const auto& [key, count] : seen) {
    CHECK(count == 1);
    CHECK(key.second < (key.first == 0 ? 100 : 500));
  }
  CHECK(mixed_union_batches(77, 0, 16, 9) == random_batches(77, 16, 9));
}

TEST_CASE("labeled share of union batches is N / (N + M)") {
  long long labeled = 0, total = 0;
  for (std::uint64_t e = 0; e < 200; ++e) {
    const BatchPlan plan = mixed_union_batches(100, 500, 60, derive_seed(1, e));
    for (const auto& b : plan.batches)
      for (const auto& r : b) {
        labeled += r.source == Source::labeled;
        ++total;
      }
  }
  CHECK(total == 120000);
  CHECK(std::abs(static_cast<double>(labeled) / total - 100.0 / 600.0) < 0.01);
}

TEST_CASE("union class index keys pseudo samples by pseudo label") {
  LabeledSet d;
  d.features.resize(3, 1);
  d.labels = {0, 1, 1};
  d.class_counts = {1, 2};
  PseudoLabeledSet u;
  u.sample_ids = {0, 1};
  u.labels = {1, 0};
  u.num_classes = 2;
  const ClassIndex idx = build_union_class_index(d, u);
  REQUIRE(idx.size() == 2);
  CHECK(idx[0] == std::vector<SampleRef>{{Source::labeled, 0}, {Source::pseudo, 1}});
  CHECK(idx[1] == std::vector<SampleRef>{{Source::labeled, 1}, {Source::labeled, 2}, {Source::pseudo, 0}});
}

TEST_CASE("balanced epoch length") {
  CHECK(balanced_steps_per_epoch(1242, 64) == 20);
  CHECK(balanced_steps_per_epoch(64, 64) == 1);
  CHECK(balanced_steps_per_epoch(0, 64) == 1);
}
