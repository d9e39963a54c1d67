#include <doctest.h>

#include <cmath>
#include <limits>

#include "../support/oracle.hpp"
#include "sslt/errors.hpp"
#include "sslt/losses.hpp"

using namespace sslt;

namespace {

struct Fixture {
  LabeledSet labeled;
  UnlabeledSet unlabeled;
  PseudoLabeledSet pseudo;
  ModelState model;

  Fixture() {
    Rng rng(4);
    std::normal_distribution<double> normal(0.0, 1.0);
    labeled.features.resize(6, 3);
    unlabeled.features.resize(4, 3);
    for (Eigen::Index i = 0; i < labeled.features.size(); ++i) labeled.features.data()[i] = normal(rng);
    for (Eigen::Index i = 0; i < unlabeled.features.size(); ++i) unlabeled.features.data()[i] = normal(rng);
    labeled.labels = {0, 1, 2, 0, 1, 0};
    labeled.class_counts = {3, 2, 1};
    pseudo.sample_ids = {0, 1, 2, 3};
    pseudo.labels = {2, 2, 0, 1};
    pseudo.num_classes = 3;
    model = init_model({3, {5}, 3}, 17);
  }
  DataView view() const { return {&labeled, &unlabeled, &pseudo}; }
};

}  // namespace

TEST_CASE("cross-entropy closed forms") {
  const std::vector<double> uniform(10, 0.1);
  for (int label = 0; label < 10; ++label) CHECK(std::abs(cross_entropy(uniform, label) - std::log(10.0)) < 1e-9);
  const std::vector<double> two{0.75, 0.25};
  CHECK(std::abs(cross_entropy(two, 1) - 1.386294361119891) < 1e-12);
  const std::vector<double> one_hot{0.0, 1.0, 0.0};
  CHECK(cross_entropy(one_hot, 1) == 0.0);
  CHECK(std::isfinite(cross_entropy(one_hot, 0)));
  const std::vector<double> nan{std::numeric_limits<double>::quiet_NaN(), 1.0};
  CHECK_THROWS_AS(cross_entropy(nan, 0), NumericError);
  const std::vector<double> logits{std::log(3.0), 0.0};
  CHECK(std::abs(cross_entropy_from_logits(logits, 1) - std::log(4.0)) < 1e-15);
}

TEST_CASE("consistency KL closed forms") {
  const std::vector<double> half{0.5, 0.5}, skew{0.9, 0.1};
  CHECK(std::abs(consistency_kl(half, skew) - 0.5108256237659907) < 1e-12);
  CHECK(std::abs(consistency_kl(half, skew) - 0.510826) < 1e-6);
  CHECK(consistency_kl(skew, skew) == 0.0);
  const std::vector<double> point{1.0, 0.0};
  CHECK(consistency_kl(point, point) == 0.0);
  int clamps = 0;
  const std::vector<double> zero_cur{0.0, 1.0};
  CHECK(std::isfinite(consistency_kl(half, zero_cur, &clamps)));
  CHECK(clamps == 1);
}

TEST_CASE("KL is non-negative and vanishes only at equality") {
  Rng rng(31);
  const Matrix p = oracle::random_prob_rows(200, 6, rng);
  const Matrix q = oracle::random_prob_rows(200, 6, rng);
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    std::vector<double> a(p.row(r).data(), p.row(r).data() + 6), b(q.row(r).data(), q.row(r).data() + 6);
    CHECK(consistency_kl(a, b) > 0.0);
    CHECK(std::abs(consistency_kl(a, a)) < 1e-15);
  }
}

TEST_CASE("semi loss combines the parts exactly") {
  Fixture fx;
  PredictionMemory memory(6, 4, 3);
  const std::vector<SampleRef> refs{{Source::labeled, 0}, {Source::pseudo, 2}, {Source::labeled, 4}, {Source::pseudo, 3}};

  memory.begin_epoch(0);
  const BackwardResult cold = semi_loss(refs, fx.view(), fx.model, memory, 0.8);
  CHECK(cold.loss.consistency_part == 0.0);
  CHECK(cold.loss.total == cold.loss.ce_part);

  ModelState moved = fx.model;
  moved.head_random.weight *= 1.7;
  memory.begin_epoch(1);
  const BackwardResult warm = semi_loss(refs, fx.view(), moved, memory, 0.8);
  CHECK(warm.loss.consistency_part > 0.0);
  CHECK(std::abs(warm.loss.total - (warm.loss.ce_part + 0.8 * warm.loss.consistency_part)) <= 1e-12);

  // Independent recomputation of both parts.
  double ce = 0.0, kl = 0.0;
  for (std::size_t i = 0; i < refs.size(); ++i) {
    std::vector<double> prev(cold.probs.row(static_cast<Eigen::Index>(i)).data(),
                             cold.probs.row(static_cast<Eigen::Index>(i)).data() + 3);
    std::vector<double> cur(warm.probs.row(static_cast<Eigen::Index>(i)).data(),
                            warm.probs.row(static_cast<Eigen::Index>(i)).data() + 3);
    const int label = refs[i].source == Source::labeled ? fx.labeled.labels[static_cast<std::size_t>(refs[i].id)]
                                                        : fx.pseudo.labels[static_cast<std::size_t>(refs[i].id)];
    ce += cross_entropy(cur, label);
    kl += consistency_kl(prev, cur);
  }
  CHECK(warm.loss.ce_part == doctest::Approx(ce / 4).epsilon(1e-12));
  CHECK(warm.loss.consistency_part == doctest::Approx(kl / 4).epsilon(1e-12));

  memory.begin_epoch(2);
  const BackwardResult zero = semi_loss(refs, fx.view(), moved, memory, 0.0);
  CHECK(zero.loss.total == zero.loss.ce_part);
}

TEST_CASE("stationary model has no consistency loss") {
  Fixture fx;
  PredictionMemory memory(6, 4, 3);
  const std::vector<SampleRef> refs{{Source::labeled, 1}, {Source::pseudo, 0}};
  memory.begin_epoch(0);
  semi_loss(refs, fx.view(), fx.model, memory, 1.0);
  memory.begin_epoch(1);
  const BackwardResult r = semi_loss(refs, fx.view(), fx.model, memory, 1.0);
  CHECK(std::abs(r.loss.consistency_part) < 1e-15);
}

TEST_CASE("prediction memory hands epoch e's output to epoch e+1 only") {
  PredictionMemory memory(2, 2, 2);
  const SampleRef a{Source::labeled, 1}, b{Source::pseudo, 1};
  const std::vector<double> pa{0.3, 0.7}, pb{0.6, 0.4};
  memory.begin_epoch(0);
  memory.record(a, pa);
  CHECK_FALSE(memory.previous(a).has_value());
  memory.begin_epoch(1);
  REQUIRE(memory.previous(a).has_value());
  CHECK((*memory.previous(a))[1] == 0.7);
  CHECK_FALSE(memory.previous(b).has_value());
  memory.record(b, pb);
  memory.begin_epoch(2);
  CHECK_FALSE(memory.previous(a).has_value());  // written two epochs ago
  CHECK(memory.previous(b).has_value());
  CHECK(memory.readable_count() == 1);
  memory.clear();
  CHECK(memory.readable_count() == 0);

  const std::vector<double> not_prob{0.5, 0.6};
  CHECK_THROWS_AS(memory.record(a, not_prob), ContractError);
}

TEST_CASE("supervised loss refuses pseudo-labeled samples") {
  Fixture fx;
  const Matrix features = embed(fx.model.embedding, fx.labeled.features);
  const DataView view{&fx.labeled, &fx.unlabeled, &fx.pseudo, &features};
  const std::vector<SampleRef> clean{{Source::labeled, 0}, {Source::labeled, 2}};
  const BackwardResult r = sup_loss(clean, view, fx.model);
  CHECK_FALSE(r.grads.embedding.has_value());
  CHECK(r.grads.which == Head::balanced);
  const std::vector<SampleRef> dirty{{Source::labeled, 0}, {Source::pseudo, 1}};
  CHECK_THROWS_AS(sup_loss(dirty, view, fx.model), ContractError);
}

TEST_CASE("supervised loss of a uniform classifier is ln C") {
  Fixture fx;
  fx.model.head_balanced.weight.setZero();
  fx.model.head_balanced.bias.setZero();
  const Matrix features = embed(fx.model.embedding, fx.labeled.features);
  const DataView view{&fx.labeled, nullptr, nullptr, &features};
  const std::vector<SampleRef> refs{{Source::labeled, 0}, {Source::labeled, 1}, {Source::labeled, 2}};
  CHECK(std::abs(sup_loss(refs, view, fx.model).loss.total - std::log(3.0)) < 1e-12);
}

TEST_CASE("semi loss gradients match central differences through the KL term") {
  Fixture fx;
  PredictionMemory memory(6, 4, 3);
  const std::vector<SampleRef> refs{{Source::labeled, 0}, {Source::pseudo, 2}, {Source::labeled, 3}, {Source::pseudo, 1}};
  memory.begin_epoch(0);
  semi_loss(refs, fx.view(), fx.model, memory, 1.0);
  memory.begin_epoch(1);
  ModelState moved = fx.model;
  moved.embedding.layers[0].weight *= 1.3;
  TrainBatch batch = assemble_batch(refs, fx.view());
  batch.previous.resize(4, 3);
  batch.has_previous.assign(4, true);
  for (std::size_t i = 0; i < refs.size(); ++i) {
    const auto prev = *memory.previous(refs[i]);
    for (int c = 0; c < 3; ++c) batch.previous(static_cast<Eigen::Index>(i), c) = prev[static_cast<std::size_t>(c)];
  }
  CHECK(oracle::max_fd_error(moved, batch, LossSpec::semi(1.0)) < 1e-4);
}
