#pragma once

// Accuracy metrics (overall, per split, per class), pseudo-label accuracy and
// report files.
//
// Rows format (tab separated, one header comment, one column header):
//
//   # sslt-report v1
//   label  loop  seed  config_hash  overall  many  medium  few
//
// Reals use the shortest representation that round-trips; an empty split is
// written as "nan". The structured format is a JSON document
// {"format","version","config","reports":[...]} whose report objects carry
// the same fields plus split sample counts and per-class accuracies.

#include <array>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "sslt/datagen.hpp"
#include "sslt/netcore.hpp"

namespace sslt {

struct MetricsReport {
  std::string label;
  int loop = -1;
  std::uint64_t seed = 0;
  std::uint64_t config_hash = 0;

  double overall = 0.0;
  std::array<double, kNumSplits> split_accuracy{};  // NaN for an empty split
  std::array<int, kNumSplits> split_counts{};       // samples per split
  std::vector<double> per_class;                    // NaN for a class with no samples
  std::vector<int> per_class_counts;
  std::vector<std::string> warnings;  // not serialized

  double split(Split s) const { return split_accuracy[static_cast<std::size_t>(s)]; }
};

/// Scores predictions against ground truth. Split accuracy is the fraction of
/// correct samples among all samples whose class belongs to the split.
MetricsReport score_predictions(std::span<const int> predicted, std::span<const int> truth, int num_classes,
                                const SplitSpec& splits);

/// Argmax predictions of head(f(x)) on `test`. Throws ConfigError when a class
/// has no test samples; an unbalanced test set only adds a warning.
MetricsReport evaluate(const ModelState& model, Head head, const LabeledSet& test, const SplitSpec& splits);

/// Accuracy of pseudo labels against the hidden labels of U. Throws
/// UnsupportedError when no hidden labels exist.
MetricsReport pseudo_accuracy(const PseudoLabeledSet& pseudo, const HiddenLabels* truth, const SplitSpec& splits);

enum class ReportFormat { rows, structured };

std::string render_report(std::span<const MetricsReport> reports, ReportFormat format,
                          const nlohmann::ordered_json* config = nullptr);
std::vector<MetricsReport> parse_report(std::string_view text, ReportFormat format);
void emit_report(std::span<const MetricsReport> reports, const std::filesystem::path& path, ReportFormat format,
                 const nlohmann::ordered_json* config = nullptr);

/// Human-readable grid (accuracy in %, one decimal), one row per report.
std::string format_grid(std::span<const MetricsReport> reports);

}  // namespace sslt
