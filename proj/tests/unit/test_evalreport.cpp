#include <doctest.h>

#include <cmath>
#include <filesystem>

#include "sslt/errors.hpp"
#include "sslt/evalreport.hpp"

using namespace sslt;

namespace {

// Brute-force confusion matrix, then split accuracy as trace over row sums.
struct Confusion {
  std::vector<std::vector<long>> m;
  explicit Confusion(int c) : m(static_cast<std::size_t>(c), std::vector<long>(static_cast<std::size_t>(c), 0)) {}
  void add(int truth, int pred) { ++m[static_cast<std::size_t>(truth)][static_cast<std::size_t>(pred)]; }
  double accuracy(const std::vector<int>& classes) const {
    long hit = 0, all = 0;
    for (int c : classes) {
      hit += m[static_cast<std::size_t>(c)][static_cast<std::size_t>(c)];
      for (long v : m[static_cast<std::size_t>(c)]) all += v;
    }
    return all ? static_cast<double>(hit) / static_cast<double>(all) : std::nan("");
  }
};

SplitSpec desk_splits() { return assign_splits(exponential_profile(10, 500, 100.0), SplitRule::ranks(3, 3)); }

LabeledSet balanced_test(int per_class, int c) {
  LabeledSet t;
  t.features = Matrix::Zero(per_class * c, 2);
  for (int j = 0; j < c; ++j)
    for (int k = 0; k < per_class; ++k) t.labels.push_back(j);
  t.class_counts.assign(static_cast<std::size_t>(c), per_class);
  return t;
}

MetricsReport sample_report(const std::string& label, int loop, double base) {
  MetricsReport r;
  r.label = label;
  r.loop = loop;
  r.seed = 42;
  r.config_hash = 0x0123456789abcdefull;
  r.overall = base;
  r.split_accuracy = {base + 0.1, base, 1.0 / 3.0};
  r.split_counts = {300, 300, 400};
  r.per_class = {0.5, 0.25, 1.0};
  r.per_class_counts = {100, 100, 100};
  return r;
}

}  // namespace

TEST_CASE("perfect and constant predictors") {
  const SplitSpec s = desk_splits();
  std::vector<int> truth;
  for (int j = 0; j < 10; ++j)
    for (int k = 0; k < 50; ++k) truth.push_back(j);
  const MetricsReport perfect = score_predictions(truth, truth, 10, s);
  CHECK(perfect.overall == 1.0);
  for (double a : perfect.split_accuracy) CHECK(a == 1.0);
  for (double a : perfect.per_class) CHECK(a == 1.0);

  const std::vector<int> zeros(truth.size(), 0);
  const MetricsReport constant = score_predictions(zeros, truth, 10, s);
  CHECK(constant.overall == doctest::Approx(0.1).epsilon(1e-15));
  CHECK(constant.split(Split::many) == doctest::Approx(1.0 / 3.0).epsilon(1e-15));
  CHECK(constant.split(Split::few) == 0.0);
}

TEST_CASE("split accuracies agree with a brute-force confusion matrix") {
  Rng rng(12);
  std::uniform_int_distribution<int> cls(0, 9);
  std::bernoulli_distribution keep(0.6);
  const SplitSpec s = desk_splits();
  for (int trial = 0; trial < 20; ++trial) {
    std::vector<int> truth, pred;
    Confusion conf(10);
    for (int i = 0; i < 2000; ++i) {
      const int t = cls(rng);
      const int p = keep(rng) ? t : cls(rng);
      truth.push_back(t);
      pred.push_back(p);
      conf.add(t, p);
    }
    const MetricsReport r = score_predictions(pred, truth, 10, s);
    std::vector<int> all(10);
    std::iota(all.begin(), all.end(), 0);
    CHECK(r.overall == doctest::Approx(conf.accuracy(all)).epsilon(1e-15));
    for (Split sp : {Split::many, Split::medium, Split::few})
      CHECK(r.split(sp) == doctest::Approx(conf.accuracy(s.classes_in(sp))).epsilon(1e-15));
    double weighted = 0.0;
    for (int j = 0; j < 10; ++j) weighted += r.per_class[static_cast<std::size_t>(j)] * r.per_class_counts[static_cast<std::size_t>(j)];
    CHECK(weighted / 2000.0 == doctest::Approx(r.overall).epsilon(1e-12));
    CHECK(r.overall >= 0.0);
    CHECK(r.overall <= 1.0);
  }
}

TEST_CASE("evaluate is pure and checks the test set") {
  const ModelState m = init_model({2, {4}, 3}, 5);
  const LabeledSet test = balanced_test(10, 3);
  const SplitSpec s = assign_splits(std::vector<int>{30, 20, 10}, SplitRule::ranks(1, 1));
  const MetricsReport a = evaluate(m, Head::balanced, test, s);
  const MetricsReport b = evaluate(m, Head::balanced, test, s);
  CHECK(render_report(std::vector{a}, ReportFormat::structured) == render_report(std::vector{b}, ReportFormat::structured));
  CHECK(a.warnings.empty());

  LabeledSet missing = test;
  missing.class_counts = {10, 10, 0};
  for (auto& y : missing.labels)
    if (y == 2) y = 1;
  missing.class_counts = {10, 20, 0};
  CHECK_THROWS_AS(evaluate(m, Head::balanced, missing, s), ConfigError);

  LabeledSet uneven = test;
  uneven.labels[0] = 1;
  uneven.class_counts = {9, 11, 10};
  CHECK_FALSE(evaluate(m, Head::balanced, uneven, s).warnings.empty());
}

TEST_CASE("pseudo-label accuracy on a long-tailed set") {
  const std::vector<int> counts{100, 50, 5};
  const SplitSpec s = assign_splits(counts, SplitRule::ranks(1, 1));
  HiddenLabels truth;
  truth.num_classes = 3;
  for (int j = 0; j < 3; ++j) truth.labels.insert(truth.labels.end(), static_cast<std::size_t>(counts[static_cast<std::size_t>(j)]), j);
  PseudoLabeledSet pseudo;
  pseudo.num_classes = 3;
  pseudo.labels = truth.labels;
  for (int i = 0; i < static_cast<int>(pseudo.labels.size()); ++i) pseudo.sample_ids.push_back(i);

  const MetricsReport exact = pseudo_accuracy(pseudo, &truth, s);
  CHECK(exact.overall == 1.0);
  for (double a : exact.split_accuracy) CHECK(a == 1.0);

  for (std::size_t i = 150; i < 155; ++i) pseudo.labels[i] = 0;  // few-shot all wrong
  const MetricsReport skewed = pseudo_accuracy(pseudo, &truth, s);
  CHECK(skewed.split(Split::few) == 0.0);
  CHECK(skewed.split(Split::many) == 1.0);
  CHECK(skewed.overall > 100.0 / 155.0);
  CHECK(skewed.overall == doctest::Approx(150.0 / 155.0).epsilon(1e-15));

  CHECK_THROWS_AS(pseudo_accuracy(pseudo, nullptr, s), UnsupportedError);
}

TEST_CASE("rows and structured reports round trip") {
  std::vector<MetricsReport> reports{sample_report("init", -1, 0.6), sample_report("loop0", 0, 0.7123456789012345)};
  reports[1].split_accuracy[2] = std::nan("");

  const std::string rows = render_report(reports, ReportFormat::rows);
  const auto back = parse_report(rows, ReportFormat::rows);
  REQUIRE(back.size() == 2);
  for (std::size_t i = 0; i < 2; ++i) {
    CHECK(back[i].label == reports[i].label);
    CHECK(back[i].loop == reports[i].loop);
    CHECK(back[i].seed == 42);
    CHECK(back[i].config_hash == reports[i].config_hash);
    CHECK(back[i].overall == reports[i].overall);
  }
  CHECK(std::isnan(back[1].split_accuracy[2]));
  CHECK(render_report(back, ReportFormat::rows) == rows);

  nlohmann::ordered_json cfg = {{"seed", 42}};
  const std::string structured = render_report(reports, ReportFormat::structured, &cfg);
  const auto sback = parse_report(structured, ReportFormat::structured);
  REQUIRE(sback.size() == 2);
  CHECK(sback[0].per_class == reports[0].per_class);
  CHECK(sback[0].split_counts == reports[0].split_counts);
  CHECK(render_report(sback, ReportFormat::structured, &cfg) == structured);
}

TEST_CASE("empty report list gives a header-only file") {
  const std::string rows = render_report(std::vector<MetricsReport>{}, ReportFormat::rows);
  CHECK(rows == "# sslt-report v1\nlabel\tloop\tseed\tconfig_hash\toverall\tmany\tmedium\tfew\n");
  CHECK(parse_report(rows, ReportFormat::rows).empty());
  CHECK_THROWS_AS(parse_report("garbage", ReportFormat::rows), DataError);
  CHECK_THROWS_AS(parse_report("{}", ReportFormat::structured), DataError);
}

TEST_CASE("emit_report writes atomically and surfaces I/O failures") {
  const auto dir = std::filesystem::temp_directory_path() / "sslt_report_test";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  const std::vector<MetricsReport> reports{sample_report("x", 0, 0.5)};
  emit_report(reports, dir / "r.tsv", ReportFormat::rows);
  CHECK(read_file(dir / "r.tsv") == render_report(reports, ReportFormat::rows));
  CHECK_THROWS_AS(emit_report(reports, dir / "no" / "such" / "dir" / "r.tsv", ReportFormat::rows), IoError);
  std::filesystem::remove_all(dir);
}

TEST_CASE("comparison grid layout") {
  std::vector<MetricsReport> reports{sample_report("Pseudo-Label", 5, 0.689), sample_report("alternate", 5, 0.713)};
  reports[0].split_accuracy[2] = std::nan("");
  const std::string expect =
      "Method        Overall     Many   Medium      Few\n"
      "Pseudo-Label     68.9     78.9     68.9        -\n"
      "alternate        71.3     81.3     71.3     33.3\n";
  CHECK(format_grid(reports) == expect);
}
