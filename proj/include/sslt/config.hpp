#pragma once

// Run configuration: a flat JSON object whose keys are listed in
// config_keys(). Omitted keys take their defaults; the effective config is
// echoed with every key present and re-validates to itself.

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sslt/datagen.hpp"
#include "sslt/trainer.hpp"

namespace sslt {

enum class DatasetKind { gaussian, cifar10, files };

struct DatasetConfig {
  DatasetKind kind = DatasetKind::gaussian;
  ProfileKind profile = ProfileKind::exponential;
  int num_classes = 10;
  int n_max = 500;
  double imbalance = 100.0;
  double lomax_alpha = 6.0;
  double lomax_scale = 1000.0;
  int lomax_cap = 250;
  int lomax_floor = 2;
  LomaxMode lomax_mode = LomaxMode::density;
  GaussianTaskSpec gaussian;  // unlabeled_factor, test_per_class and split are shared by every kind
  std::string cifar_dir;      // data_batch_{1..5}.bin and test_batch.bin
  std::string data_dir;       // a directory written by gen-data
  std::optional<std::uint64_t> seed;  // defaults to the run seed
};

struct RunConfig {
  TrainConfig train;
  DatasetConfig data;

  std::uint64_t data_seed() const { return data.seed.value_or(train.seed); }
};

struct ConfigKey {
  std::string name;
  std::string type;
  std::string description;
};
const std::vector<ConfigKey>& config_keys();

/// Every type and range problem is collected before throwing ConfigError.
RunConfig parse_config(const nlohmann::json& doc);
RunConfig parse_config_text(std::string_view text);
RunConfig validate_config(const std::filesystem::path& path);

/// Effective config with every key, in config_keys() order.
nlohmann::ordered_json config_to_json(const RunConfig& cfg);
std::string canonical_config(const RunConfig& cfg);
std::uint64_t config_hash(const RunConfig& cfg);

ClassProfile build_profile(const DatasetConfig& data, std::uint64_t seed);
Task build_task(const RunConfig& cfg);

/// Relative output paths are resolved under $SSLT_OUTPUT_ROOT when it is set.
std::filesystem::path resolve_output(const std::filesystem::path& out);

}  // namespace sslt
