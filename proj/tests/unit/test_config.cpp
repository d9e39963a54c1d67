#include <doctest.h>

#include <cstdlib>
#include <filesystem>

#include "sslt/config.hpp"
#include "sslt/errors.hpp"

using namespace sslt;

TEST_CASE("empty config yields the documented defaults") {
  const RunConfig c = parse_config_text("{}");
  CHECK(c.train.lr == 0.1);
  CHECK(c.train.momentum == 0.9);
  CHECK(c.train.weight_decay == 0.0005);
  CHECK(c.train.lambda == 1.0);
  CHECK(c.train.loops == 5);
  CHECK(c.train.init_embed_epochs == 200);
  CHECK(c.train.init_classifier_epochs == 10);
  CHECK(c.train.stage2_epochs == 40);
  CHECK(c.train.stage3_epochs == 10);
  CHECK(c.data.kind == DatasetKind::gaussian);
  CHECK(c.data.num_classes == 10);
  CHECK(c.data.imbalance == 100.0);
  CHECK(c.data.gaussian.unlabeled_factor == 5.0);
  CHECK(parse_config_text("").train.lr == 0.1);
}

TEST_CASE("effective config is a fixed point") {
  const RunConfig c = parse_config_text(R"({"seed": 9, "train.lr": 0.05, "train.hidden_widths": [32],
      "data.profile": "lomax", "data.num_classes": 50, "data.seed": 3, "data.split_mode": "threshold"})");
  const std::string echo = canonical_config(c);
  const RunConfig again = parse_config_text(echo);
  CHECK(canonical_config(again) == echo);
  CHECK(config_hash(again) == config_hash(c));
  CHECK(again.data_seed() == 3);
  CHECK(again.train.hidden_widths == std::vector<int>{32});

  auto with_hash = config_to_json(c);
  with_hash["config_hash"] = hex64(config_hash(c));
  CHECK(canonical_config(parse_config_text(with_hash.dump())) == echo);
}

TEST_CASE("different settings hash differently") {
  CHECK(config_hash(parse_config_text("{}")) != config_hash(parse_config_text(R"({"seed": 1})")));
  CHECK(config_hash(parse_config_text("{}")) == config_hash(parse_config_text(R"({"train.lr": 0.1})")));
}

TEST_CASE("every problem is reported, not only the first") {
  try {
    parse_config_text(R"({"train.stage2_epochs": -1, "train.lr": "fast", "data.kind": "mnist",
        "train.init_embed_epochs": 2.5, "bogus": 1, "seed": -4, "train.momentum": 1.2})");
    FAIL("expected ConfigError");
  } catch (const ConfigError& e) {
    const auto& p = e.problems();
    CHECK(p.size() == 7);
    auto mentions = [&](const std::string& key) {
      return std::any_of(p.begin(), p.end(), [&](const std::string& s) { return s.find(key) != std::string::npos; });
    };
    CHECK(mentions("stage2_epochs"));
    CHECK(mentions("train.lr"));
    CHECK(mentions("data.kind"));
    CHECK(mentions("init_embed_epochs"));
    CHECK(mentions("bogus"));
    CHECK(mentions("seed"));
    CHECK(mentions("momentum"));
  }
}

TEST_CASE("negative epochs are rejected") {
  CHECK_THROWS_AS(parse_config_text(R"({"train.stage3_epochs": -2})"), ConfigError);
  CHECK_THROWS_AS(parse_config_text(R"({"train.init_classifier_epochs": 0})"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("[1, 2]"), ConfigError);
  CHECK_THROWS_AS(parse_config_text("{not json"), ConfigError);
}

TEST_CASE("dataset kinds need their inputs") {
  CHECK_THROWS_AS(parse_config_text(R"({"data.kind": "cifar10"})"), ConfigError);
  CHECK_THROWS_AS(parse_config_text(R"({"data.kind": "files"})"), ConfigError);
  CHECK_THROWS_AS(parse_config_text(R"({"data.split_many": 8, "data.split_medium": 8})"), ConfigError);
}

TEST_CASE("config file loading") {
  const auto path = std::filesystem::temp_directory_path() / "sslt_config_test.json";
  write_file_atomic(path, R"({"train.loops": 2})");
  CHECK(validate_config(path).train.loops == 2);
  std::filesystem::remove(path);
  CHECK_THROWS_AS(validate_config(path), ConfigError);
}

TEST_CASE("gaussian task follows the config") {
  const RunConfig c = parse_config_text(R"({"data.num_classes": 4, "data.n_max": 40, "data.imbalance": 10,
      "data.input_dim": 5, "data.test_per_class": 7, "data.split_many": 1, "data.split_medium": 1})");
  const Task t = build_task(c);
  CHECK(t.labeled.class_counts == exponential_profile(4, 40, 10.0).counts);
  CHECK(t.labeled.dim() == 5);
  CHECK(t.test.size() == 28);
  CHECK(build_task(c).labeled.features == t.labeled.features);
}

TEST_CASE("relative outputs resolve under the output root") {
  ::setenv("SSLT_OUTPUT_ROOT", "/tmp/sslt-root", 1);
  CHECK(resolve_output("run1") == std::filesystem::path("/tmp/sslt-root/run1"));
  CHECK(resolve_output("/abs/run") == std::filesystem::path("/abs/run"));
  ::unsetenv("SSLT_OUTPUT_ROOT");
  CHECK(resolve_output("run1") == std::filesystem::path("run1"));
}
