#include "sslt/config.hpp"

#include <cmath>
#include <cstdlib>
#include <functional>
#include <set>

#include "sslt/errors.hpp"

namespace sslt {

using json = nlohmann::json;
using ordered_json = nlohmann::ordered_json;

const std::vector<ConfigKey>& config_keys() {
  static const std::vector<ConfigKey> keys = {
      {"seed", "uint", "run seed; every random stream is derived from it"},
      {"train.init_embed_epochs", "int", "epochs of joint f + g' training with random sampling"},
      {"train.init_classifier_epochs", "int", "epochs of class-balanced training of a fresh g"},
      {"train.loops", "int", "number of alternate learning loops"},
      {"train.stage2_epochs", "int", "semi-supervised embedding epochs per loop"},
      {"train.stage3_epochs", "int", "class-balanced classifier epochs per loop"},
      {"train.batch_size", "int", "minibatch size"},
      {"train.lr", "real", "base learning rate, cosine annealed within every stage"},
      {"train.momentum", "real", "SGD momentum"},
      {"train.weight_decay", "real", "L2 weight decay"},
      {"train.lambda", "real", "weight of the consistency term"},
      {"train.hidden_widths", "int[]", "widths of the embedding layers"},
      {"train.reset_memory", "bool", "forget previous-epoch predictions at the start of every Stage 2"},
      {"data.kind", "string", "gaussian | cifar10 | files"},
      {"data.profile", "string", "exponential | lomax"},
      {"data.num_classes", "int", "number of classes"},
      {"data.n_max", "int", "labeled count of the largest class (exponential profile)"},
      {"data.imbalance", "real", "n_max / n_min (exponential profile)"},
      {"data.lomax_alpha", "real", "Lomax shape"},
      {"data.lomax_scale", "real", "Lomax scale"},
      {"data.lomax_cap", "int", "largest per-class count (Lomax profile)"},
      {"data.lomax_floor", "int", "smallest per-class count (Lomax profile)"},
      {"data.lomax_mode", "string", "density | draw"},
      {"data.input_dim", "int", "feature dimension of the Gaussian task"},
      {"data.unlabeled_factor", "real", "M = round(factor * N), apportioned so m_j/M tracks n_j/N"},
      {"data.class_sep", "real", "distance between the two closest Gaussian class means"},
      {"data.noise_sigma", "real", "per-coordinate standard deviation around each mean"},
      {"data.test_per_class", "int", "balanced test samples per class"},
      {"data.split_mode", "string", "rank | threshold"},
      {"data.split_many", "int", "rank mode: number of many-shot classes"},
      {"data.split_medium", "int", "rank mode: number of medium-shot classes"},
      {"data.split_hi", "int", "threshold mode: many-shot means n > hi"},
      {"data.split_lo", "int", "threshold mode: few-shot means n <= lo"},
      {"data.cifar_dir", "string", "directory holding the CIFAR-10 binary batches"},
      {"data.data_dir", "string", "dataset directory written by gen-data"},
      {"data.seed", "uint|null", "dataset seed; null uses the run seed"},
  };
  return keys;
}

namespace {

class Reader {
 public:
  explicit Reader(const json& doc) : doc_(doc) {}

  std::vector<std::string> problems;

  void integer(const char* key, int& out) {
    with(key, [&](const json& v) {
      if (!v.is_number_integer()) return type_error(key, "an integer", v);
      const auto x = v.get<long long>();
      if (x < INT32_MIN || x > INT32_MAX) return fail(std::string(key) + " is out of range");
      out = static_cast<int>(x);
    });
  }
  void unsigned_integer(const char* key, std::uint64_t& out) {
    with(key, [&](const json& v) {
      if (v.is_number_unsigned()) out = v.get<std::uint64_t>();
      else if (v.is_number_integer()) fail(std::string(key) + " must be >= 0");
      else type_error(key, "a non-negative integer", v);
    });
  }
  void real(const char* key, double& out) {
    with(key, [&](const json& v) {
      if (!v.is_number()) return type_error(key, "a number", v);
      out = v.get<double>();
    });
  }
  void boolean(const char* key, bool& out) {
    with(key, [&](const json& v) {
      if (!v.is_boolean()) return type_error(key, "true or false", v);
      out = v.get<bool>();
    });
  }
  void string(const char* key, std::string& out) {
    with(key, [&](const json& v) {
      if (!v.is_string()) return type_error(key, "a string", v);
      out = v.get<std::string>();
    });
  }
  void int_list(const char* key, std::vector<int>& out) {
    with(key, [&](const json& v) {
      if (!v.is_array()) return type_error(key, "an array of integers", v);
      std::vector<int> xs;
      for (const auto& e : v) {
        if (!e.is_number_integer()) return type_error(key, "an array of integers", v);
        xs.push_back(e.get<int>());
      }
      out = std::move(xs);
    });
  }
  template <class Enum>
  void choice(const char* key, Enum& out, std::initializer_list<std::pair<const char*, Enum>> options) {
    with(key, [&](const json& v) {
      std::string names;
      for (const auto& [name, value] : options) {
        if (v.is_string() && v.get<std::string>() == name) {
          out = value;
          return;
        }
        names += names.empty() ? name : std::string(" | ") + name;
      }
      type_error(key, names.c_str(), v);
    });
  }
  void optional_seed(const char* key, std::optional<std::uint64_t>& out) {
    with(key, [&](const json& v) {
      if (v.is_null()) out.reset();
      else if (v.is_number_unsigned()) out = v.get<std::uint64_t>();
      else type_error(key, "a non-negative integer or null", v);
    });
  }

  void fail(std::string msg) { problems.push_back(std::move(msg)); }

 private:
  void with(const char* key, const std::function<void(const json&)>& f) {
    auto it = doc_.find(key);
    if (it != doc_.end()) f(*it);
  }
  void type_error(const char* key, const char* expected, const json& got) {
    fail(std::string(key) + " must be " + expected + " (got " + got.dump() + ")");
  }

  const json& doc_;
};

void check_ranges(const RunConfig& c, std::vector<std::string>& p) {
  for (auto& msg : c.train.problems()) p.push_back("train." + msg);
  const auto& d = c.data;
  const auto& g = d.gaussian;
  auto need = [&](bool ok, const std::string& msg) {
    if (!ok) p.push_back(msg);
  };
  need(d.num_classes >= 2, "data.num_classes must be >= 2");
  need(g.unlabeled_factor >= 0.0 && std::isfinite(g.unlabeled_factor), "data.unlabeled_factor must be >= 0");
  need(g.test_per_class >= 1, "data.test_per_class must be >= 1");
  if (d.profile == ProfileKind::exponential) {
    need(d.n_max >= 1, "data.n_max must be >= 1");
    need(d.imbalance >= 1.0 && std::isfinite(d.imbalance), "data.imbalance must be >= 1");
  } else {
    need(d.lomax_alpha > 0.0, "data.lomax_alpha must be > 0");
    need(d.lomax_scale > 0.0, "data.lomax_scale must be > 0");
    need(d.lomax_floor >= 1, "data.lomax_floor must be >= 1");
    need(d.lomax_cap >= d.lomax_floor, "data.lomax_cap must be >= data.lomax_floor");
  }
  if (d.kind == DatasetKind::gaussian) {
    need(g.input_dim >= 1, "data.input_dim must be >= 1");
    need(g.class_sep > 0.0 && std::isfinite(g.class_sep), "data.class_sep must be > 0");
    need(g.noise_sigma >= 0.0 && std::isfinite(g.noise_sigma), "data.noise_sigma must be >= 0");
  }
  if (d.kind == DatasetKind::cifar10) {
    need(d.num_classes == kCifarClasses, "data.num_classes must be 10 for cifar10");
    need(!d.cifar_dir.empty(), "data.cifar_dir is required for cifar10");
  }
  if (d.kind == DatasetKind::files) need(!d.data_dir.empty(), "data.data_dir is required for files");
  if (g.split.mode == SplitRule::Mode::rank_buckets) {
    need(g.split.many_k >= 0 && g.split.medium_k >= 0, "data.split_many and data.split_medium must be >= 0");
    need(g.split.many_k + g.split.medium_k <= d.num_classes,
         "data.split_many + data.split_medium must not exceed data.num_classes");
  } else {
    need(g.split.lo >= 0 && g.split.hi > g.split.lo, "data.split_hi must exceed data.split_lo >= 0");
  }
}

}  // namespace

RunConfig parse_config(const json& doc) {
  if (!doc.is_object()) throw ConfigError("config must be a JSON object");
  RunConfig c;
  auto& t = c.train;
  auto& d = c.data;
  auto& g = d.gaussian;
  Reader r(doc);

  std::set<std::string> known;
  for (const auto& k : config_keys()) known.insert(k.name);
  known.insert("config_hash");  // written by the echo, informational only
  for (auto it = doc.begin(); it != doc.end(); ++it)
    if (!known.count(it.key())) r.fail("unknown key '" + it.key() + "'");

  r.unsigned_integer("seed", t.seed);
  r.integer("train.init_embed_epochs", t.init_embed_epochs);
  r.integer("train.init_classifier_epochs", t.init_classifier_epochs);
  r.integer("train.loops", t.loops);
  r.integer("train.stage2_epochs", t.stage2_epochs);
  r.integer("train.stage3_epochs", t.stage3_epochs);
  r.integer("train.batch_size", t.batch_size);
  r.real("train.lr", t.lr);
  r.real("train.momentum", t.momentum);
  r.real("train.weight_decay", t.weight_decay);
  r.real("train.lambda", t.lambda);
  r.int_list("train.hidden_widths", t.hidden_widths);
  r.boolean("train.reset_memory", t.reset_memory);

  r.choice("data.kind", d.kind,
           {{"gaussian", DatasetKind::gaussian}, {"cifar10", DatasetKind::cifar10}, {"files", DatasetKind::files}});
  r.choice("data.profile", d.profile, {{"exponential", ProfileKind::exponential}, {"lomax", ProfileKind::lomax}});
  r.integer("data.num_classes", d.num_classes);
  r.integer("data.n_max", d.n_max);
  r.real("data.imbalance", d.imbalance);
  r.real("data.lomax_alpha", d.lomax_alpha);
  r.real("data.lomax_scale", d.lomax_scale);
  r.integer("data.lomax_cap", d.lomax_cap);
  r.integer("data.lomax_floor", d.lomax_floor);
  r.choice("data.lomax_mode", d.lomax_mode, {{"density", LomaxMode::density}, {"draw", LomaxMode::draw}});
  r.integer("data.input_dim", g.input_dim);
  r.real("data.unlabeled_factor", g.unlabeled_factor);
  r.real("data.class_sep", g.class_sep);
  r.real("data.noise_sigma", g.noise_sigma);
  r.integer("data.test_per_class", g.test_per_class);
  r.choice("data.split_mode", g.split.mode,
           {{"rank", SplitRule::Mode::rank_buckets}, {"threshold", SplitRule::Mode::count_thresholds}});
  r.integer("data.split_many", g.split.many_k);
  r.integer("data.split_medium", g.split.medium_k);
  r.integer("data.split_hi", g.split.hi);
  r.integer("data.split_lo", g.split.lo);
  r.string("data.cifar_dir", d.cifar_dir);
  r.string("data.data_dir", d.data_dir);
  r.optional_seed("data.seed", d.seed);

  check_ranges(c, r.problems);
  if (!r.problems.empty()) throw ConfigError(std::move(r.problems));
  return c;
}

RunConfig parse_config_text(std::string_view text) {
  json doc;
  try {
    doc = json::parse(text.empty() ? std::string_view("{}") : text);
  } catch (const json::parse_error& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  return parse_config(doc);
}

RunConfig validate_config(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_file(path);
  } catch (const IoError& e) {
    throw ConfigError(e.what());
  }
  return parse_config_text(text);
}

ordered_json config_to_json(const RunConfig& c) {
  const auto& t = c.train;
  const auto& d = c.data;
  const auto& g = d.gaussian;
  auto kind = [&] {
    switch (d.kind) {
      case DatasetKind::gaussian: return "gaussian";
      case DatasetKind::cifar10: return "cifar10";
      case DatasetKind::files: return "files";
    }
    return "gaussian";
  };
  ordered_json j;
  j["seed"] = t.seed;
  j["train.init_embed_epochs"] = t.init_embed_epochs;
  j["train.init_classifier_epochs"] = t.init_classifier_epochs;
  j["train.loops"] = t.loops;
  j["train.stage2_epochs"] = t.stage2_epochs;
  j["train.stage3_epochs"] = t.stage3_epochs;
  j["train.batch_size"] = t.batch_size;
  j["train.lr"] = t.lr;
  j["train.momentum"] = t.momentum;
  j["train.weight_decay"] = t.weight_decay;
  j["train.lambda"] = t.lambda;
  j["train.hidden_widths"] = t.hidden_widths;
  j["train.reset_memory"] = t.reset_memory;
  j["data.kind"] = kind();
  j["data.profile"] = d.profile == ProfileKind::lomax ? "lomax" : "exponential";
  j["data.num_classes"] = d.num_classes;
  j["data.n_max"] = d.n_max;
  j["data.imbalance"] = d.imbalance;
  j["data.lomax_alpha"] = d.lomax_alpha;
  j["data.lomax_scale"] = d.lomax_scale;
  j["data.lomax_cap"] = d.lomax_cap;
  j["data.lomax_floor"] = d.lomax_floor;
  j["data.lomax_mode"] = d.lomax_mode == LomaxMode::draw ? "draw" : "density";
  j["data.input_dim"] = g.input_dim;
  j["data.unlabeled_factor"] = g.unlabeled_factor;
  j["data.class_sep"] = g.class_sep;
  j["data.noise_sigma"] = g.noise_sigma;
  j["data.test_per_class"] = g.test_per_class;
  j["data.split_mode"] = g.split.mode == SplitRule::Mode::rank_buckets ? "rank" : "threshold";
  j["data.split_many"] = g.split.many_k;
  j["data.split_medium"] = g.split.medium_k;
  j["data.split_hi"] = g.split.hi;
  j["data.split_lo"] = g.split.lo;
  j["data.cifar_dir"] = d.cifar_dir;
  j["data.data_dir"] = d.data_dir;
  j["data.seed"] = d.seed ? ordered_json(*d.seed) : ordered_json(nullptr);
  return j;
}

std::string canonical_config(const RunConfig& cfg) { return config_to_json(cfg).dump(2) + "\n"; }

std::uint64_t config_hash(const RunConfig& cfg) { return fnv1a64(canonical_config(cfg)); }

ClassProfile build_profile(const DatasetConfig& d, std::uint64_t seed) {
  if (d.profile == ProfileKind::lomax)
    return lomax_profile(d.num_classes, d.lomax_alpha, d.lomax_scale, d.lomax_cap, d.lomax_floor,
                         derive_seed(seed, 21), d.lomax_mode);
  return exponential_profile(d.num_classes, d.n_max, d.imbalance);
}

Task build_task(const RunConfig& cfg) {
  const auto& d = cfg.data;
  const std::uint64_t seed = cfg.data_seed();
  switch (d.kind) {
    case DatasetKind::files:
      return read_dataset(d.data_dir);
    case DatasetKind::cifar10: {
      const std::filesystem::path dir(d.cifar_dir);
      std::vector<std::filesystem::path> train_files;
      for (int i = 1; i <= 5; ++i) train_files.push_back(dir / ("data_batch_" + std::to_string(i) + ".bin"));
      const std::vector<std::filesystem::path> test_files{dir / "test_batch.bin"};
      const LabeledSet pool = ingest_cifar10_binary(train_files);
      const LabeledSet test_pool = ingest_cifar10_binary(test_files);
      const LabeledSet test = subsample_to_profile(
          test_pool, explicit_profile(std::vector<int>(kCifarClasses, d.gaussian.test_per_class)), derive_seed(seed, 22));
      return split_labeled_unlabeled(pool, build_profile(d, seed), d.gaussian.unlabeled_factor, test, d.gaussian.split,
                                     derive_seed(seed, 23));
    }
    case DatasetKind::gaussian:
      break;
  }
  return synth_gaussian_task(build_profile(d, seed), d.gaussian, derive_seed(seed, 24));
}

std::filesystem::path resolve_output(const std::filesystem::path& out) {
  if (out.is_absolute()) return out;
  if (const char* root = std::getenv("SSLT_OUTPUT_ROOT"); root && *root) return std::filesystem::path(root) / out;
  return out;
}

}  // namespace sslt
