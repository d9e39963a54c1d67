#include <doctest.h>

#include <cmath>
#include <numbers>

#include "../support/oracle.hpp"
#include "sslt/checkpoint.hpp"
#include "sslt/errors.hpp"
#include "sslt/netcore.hpp"

using namespace sslt;

namespace {

TrainBatch random_batch(int n, int dim, int classes, Rng& rng, bool with_previous) {
  std::normal_distribution<double> normal(0.0, 1.0);
  std::uniform_int_distribution<int> label(0, classes - 1);
  TrainBatch b;
  b.inputs.resize(n, dim);
  for (Eigen::Index i = 0; i < b.inputs.size(); ++i) b.inputs.data()[i] = normal(rng);
  for (int i = 0; i < n; ++i) b.labels.push_back(label(rng));
  if (with_previous) {
    b.previous = oracle::random_prob_rows(n, classes, rng);
    for (int i = 0; i < n; ++i) b.has_previous.push_back(i % 3 != 2);
  }
  return b;
}

ModelState identity_model(int c) {
  ModelState m;
  m.embedding.layers.push_back({Matrix::Identity(c, c), Vector::Zero(c)});
  m.head_balanced = {Matrix::Identity(c, c), Vector::Zero(c)};
  m.head_random = m.head_balanced;
  return m;
}

}  // namespace

TEST_CASE("zero classifier gives a uniform distribution") {
  ModelState m = init_model({5, {8}, 4}, 3);
  m.head_balanced.weight.setZero();
  m.head_balanced.bias.setZero();
  const std::vector<double> x{0.3, -1.0, 2.0, 0.5, 0.0};
  const Prediction p = forward(x, m, Head::balanced);
  for (int c = 0; c < 4; ++c) CHECK(p.probs(c) == doctest::Approx(0.25).epsilon(1e-15));
  CHECK(p.embedding.size() == 8);
}

TEST_CASE("two-class logits (ln 3, 0) give (0.75, 0.25)") {
  const ModelState m = identity_model(2);
  const std::vector<double> x{std::log(3.0), 0.0};
  const Prediction p = forward(x, m, Head::random);
  CHECK(std::abs(p.probs(0) - 0.75) < 1e-15);
  CHECK(std::abs(p.probs(1) - 0.25) < 1e-15);
}

TEST_CASE("softmax rows are probability vectors even for extreme logits") {
  Rng rng(7);
  std::uniform_real_distribution<double> u(-800.0, 800.0);
  Matrix logits(50, 7);
  for (Eigen::Index i = 0; i < logits.size(); ++i) logits.data()[i] = u(rng);
  const Matrix p = softmax_rows(logits);
  for (Eigen::Index r = 0; r < p.rows(); ++r) {
    CHECK(std::abs(p.row(r).sum() - 1.0) < 1e-9);
    CHECK(p.row(r).minCoeff() >= 0.0);
    CHECK(p.row(r).maxCoeff() <= 1.0);
  }
}

TEST_CASE("argmax breaks ties toward the lowest index") {
  const std::vector<double> v{0.2, 0.5, 0.5, 0.1};
  CHECK(argmax(v) == 1);
  const std::vector<double> flat(5, 0.0);
  CHECK(argmax(flat) == 0);
}

TEST_CASE("input of the wrong width is a configuration error") {
  const ModelState m = init_model({4, {6}, 3}, 1);
  const std::vector<double> x{1.0, 2.0};
  CHECK_THROWS_AS(forward(x, m, Head::balanced), ConfigError);
}

TEST_CASE("analytic gradients match long-double central differences") {
  for (std::uint64_t seed = 0; seed < 5; ++seed) {
    CAPTURE(seed);
    Rng rng(seed + 100);
    const ModelState m = init_model({6, {12, 10}, 4}, seed);
    const TrainBatch b = random_batch(4, 6, 4, rng, true);
    CHECK(oracle::max_fd_error(m, b, LossSpec::cross_entropy(Head::random)) < 1e-4);
    CHECK(oracle::max_fd_error(m, b, LossSpec::consistency(Head::random)) < 1e-4);
    CHECK(oracle::max_fd_error(m, b, LossSpec::semi(0.7)) < 1e-4);
  }
}

TEST_CASE("linear model cross-entropy gradient is tight") {
  Rng rng(5);
  ModelState m = init_model({3, {5}, 4}, 9);
  TrainBatch b = random_batch(6, 5, 4, rng, false);
  b.inputs = b.inputs.cwiseAbs();
  b.inputs_are_features = true;
  CHECK(oracle::max_fd_error(m, b, LossSpec::supervised()) < 1e-6);
  CHECK(grad_check(m, b, LossSpec::supervised(), 1e-6) < 1e-6);
}

TEST_CASE("grad_check rejects a degenerate step") {
  Rng rng(1);
  const ModelState m = init_model({3, {4}, 2}, 2);
  const TrainBatch b = random_batch(2, 3, 2, rng, false);
  CHECK_THROWS_AS(grad_check(m, b, LossSpec::cross_entropy(Head::random), 0.0), ConfigError);
  CHECK(grad_check(m, b, LossSpec::cross_entropy(Head::random), 1e-5) < 1e-4);
}

TEST_CASE("gradient vanishes at a confident correct prediction") {
  ModelState m = identity_model(3);
  m.head_random.weight *= 200.0;
  TrainBatch b;
  b.inputs = Matrix{{1.0, 0.0, 0.0}};
  b.labels = {0};
  const BackwardResult r = backward(b, m, LossSpec::cross_entropy(Head::random));
  CHECK(r.grads.squared_norm() < 1e-60);
}

TEST_CASE("frozen embedding receives no gradient") {
  Rng rng(3);
  const ModelState m = init_model({4, {6}, 3}, 4);
  TrainBatch b = random_batch(5, 6, 3, rng, false);
  b.inputs_are_features = true;
  const BackwardResult r = backward(b, m, LossSpec::supervised());
  CHECK_FALSE(r.grads.embedding.has_value());
  CHECK(r.grads.which == Head::balanced);
}

TEST_CASE("non-finite loss raises a numeric error") {
  ModelState m = init_model({2, {3}, 2}, 1);
  m.head_random.weight(0, 0) = std::numeric_limits<double>::quiet_NaN();
  TrainBatch b;
  b.inputs = Matrix{{1.0, 1.0}};
  b.labels = {0};
  CHECK_THROWS_AS(backward(b, m, LossSpec::cross_entropy(Head::random)), NumericError);
}

TEST_CASE("sgd_update follows the momentum recurrence") {
  SUBCASE("zero learning rate leaves the parameter alone") {
    std::vector<double> p{1.5}, g{2.0}, v{0.0};
    sgd_update(p, g, v, 0.0, 0.9, 0.0005);
    CHECK(p[0] == 1.5);
  }
  SUBCASE("plain step subtracts the gradient") {
    std::vector<double> p{1.0}, g{0.25}, v{0.0};
    sgd_update(p, g, v, 1.0, 0.0, 0.0);
    CHECK(p[0] == 0.75);
  }
  SUBCASE("two momentum steps on a constant gradient") {
    std::vector<double> p{0.0}, g{1.0}, v{0.0};
    sgd_update(p, g, v, 0.1, 0.9, 0.0);
    sgd_update(p, g, v, 0.1, 0.9, 0.0);
    CHECK(p[0] == doctest::Approx(-0.29).epsilon(1e-15));
  }
  SUBCASE("weight decay enters the velocity") {
    std::vector<double> p{2.0}, g{0.0}, v{0.0};
    sgd_update(p, g, v, 1.0, 0.0, 0.5);
    CHECK(p[0] == 1.0);
  }
}

TEST_CASE("cosine schedule endpoints and midpoint") {
  CHECK(cosine_lr(0, 10, 0.1) == 0.1);
  CHECK(std::abs(cosine_lr(10, 10, 0.1)) < 1e-18);
  CHECK(cosine_lr(5, 10, 0.1) == doctest::Approx(0.05).epsilon(1e-15));
  CHECK_THROWS_AS(cosine_lr(0, 0, 0.1), ConfigError);
  double prev = cosine_lr(0, 37, 1.0);
  for (int e = 1; e <= 37; ++e) {
    const double now = cosine_lr(e, 37, 1.0);
    CHECK(now <= prev);
    prev = now;
  }
}

TEST_CASE("sgd_step with a frozen embedding leaves theta bitwise unchanged") {
  Rng rng(11);
  ModelState m = init_model({4, {8, 8}, 3}, 12);
  const EmbeddingParams theta = m.embedding;
  OptimState opt = make_optimizer(0.1, 0.9, 0.0005, 3);
  for (int step = 0; step < 20; ++step) {
    TrainBatch b = random_batch(6, 8, 3, rng, false);
    b.inputs = b.inputs.cwiseAbs();
    b.inputs_are_features = true;
    sgd_step(m, backward(b, m, LossSpec::supervised()).grads, opt);
  }
  for (std::size_t l = 0; l < theta.layers.size(); ++l) {
    CHECK(m.embedding.layers[l].weight == theta.layers[l].weight);
    CHECK(m.embedding.layers[l].bias == theta.layers[l].bias);
  }
}

TEST_CASE("checkpoint round trip is bit exact and detects corruption") {
  const ModelState m = init_model({5, {7, 6}, 4}, 21);
  const std::string bytes = encode_checkpoint(m, 0xabcdefull);
  const Checkpoint back = decode_checkpoint(bytes);
  CHECK(back.config_hash == 0xabcdefull);
  CHECK(back.model.embedding.layers.size() == 2);
  CHECK(back.model.embedding.layers[1].weight == m.embedding.layers[1].weight);
  CHECK(back.model.head_balanced.bias == m.head_balanced.bias);
  CHECK(back.model.head_random.weight == m.head_random.weight);
  CHECK(encode_checkpoint(back.model, back.config_hash) == bytes);

  std::string flipped = bytes;
  flipped[40] ^= 0x01;
  CHECK_THROWS_AS(decode_checkpoint(flipped), DataError);
  CHECK_THROWS_AS(decode_checkpoint(bytes.substr(0, bytes.size() - 3)), DataError);
}
