#include "sslt/evalreport.hpp"

#include <charconv>
#include <cmath>
#include <cstdio>
#include <limits>
#include <sstream>

#include "sslt/errors.hpp"

namespace sslt {

using ojson = nlohmann::ordered_json;

namespace {

constexpr double kNaN = std::numeric_limits<double>::quiet_NaN();
constexpr const char* kRowsHeader = "# sslt-report v1";
constexpr const char* kRowsColumns = "label\tloop\tseed\tconfig_hash\toverall\tmany\tmedium\tfew";

}  // namespace

MetricsReport score_predictions(std::span<const int> predicted, std::span<const int> truth, int num_classes,
                                const SplitSpec& splits) {
  SSLT_CHECK(predicted.size() == truth.size(), ContractError, "prediction and truth lengths differ");
  SSLT_CHECK(splits.num_classes() == num_classes, ConfigError, "split spec does not cover every class");
  std::vector<int> correct(static_cast<std::size_t>(num_classes), 0);
  MetricsReport r;
  r.per_class_counts.assign(static_cast<std::size_t>(num_classes), 0);
  int total_correct = 0;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    const int y = truth[i];
    SSLT_CHECK(y >= 0 && y < num_classes, DataError, "true label out of range");
    ++r.per_class_counts[static_cast<std::size_t>(y)];
    if (predicted[i] == y) {
      ++correct[static_cast<std::size_t>(y)];
      ++total_correct;
    }
  }
  r.overall = truth.empty() ? kNaN : static_cast<double>(total_correct) / static_cast<double>(truth.size());
  r.per_class.resize(static_cast<std::size_t>(num_classes));
  std::array<int, kNumSplits> split_correct{};
  for (int j = 0; j < num_classes; ++j) {
    const auto jj = static_cast<std::size_t>(j);
    r.per_class[jj] = r.per_class_counts[jj] ? static_cast<double>(correct[jj]) / r.per_class_counts[jj] : kNaN;
    const auto s = static_cast<std::size_t>(splits.tags[jj]);
    split_correct[s] += correct[jj];
    r.split_counts[s] += r.per_class_counts[jj];
  }
  for (std::size_t s = 0; s < kNumSplits; ++s)
    r.split_accuracy[s] = r.split_counts[s] ? static_cast<double>(split_correct[s]) / r.split_counts[s] : kNaN;
  return r;
}

MetricsReport evaluate(const ModelState& model, Head head, const LabeledSet& test, const SplitSpec& splits) {
  for (int j = 0; j < test.num_classes(); ++j)
    SSLT_CHECK(test.class_counts[static_cast<std::size_t>(j)] > 0, ConfigError,
               "class " + std::to_string(j) + " is absent from the test set");
  const auto predicted = predict_labels(model, head, test.features);
  MetricsReport r = score_predictions(predicted, test.labels, test.num_classes(), splits);
  for (int n : test.class_counts)
    if (n != test.class_counts.front()) {
      r.warnings.push_back("test set is not class-balanced");
      break;
    }
  return r;
}

MetricsReport pseudo_accuracy(const PseudoLabeledSet& pseudo, const HiddenLabels* truth, const SplitSpec& splits) {
  if (truth == nullptr) throw UnsupportedError("pseudo-label accuracy needs the hidden labels of the unlabeled set");
  std::vector<int> true_labels;
  true_labels.reserve(pseudo.sample_ids.size());
  for (int id : pseudo.sample_ids) true_labels.push_back(truth->labels.at(static_cast<std::size_t>(id)));
  return score_predictions(pseudo.labels, true_labels, truth->num_classes, splits);
}

// ---- serialization ----------------------------------------------------------------

namespace {

ojson real_json(double v) { return std::isnan(v) ? ojson(nullptr) : ojson(v); }
double real_from(const ojson& j) { return j.is_null() ? kNaN : j.get<double>(); }

ojson report_json(const MetricsReport& r) {
  ojson per_class = ojson::array();
  for (double v : r.per_class) per_class.push_back(real_json(v));
  return ojson{
      {"label", r.label},
      {"loop", r.loop},
      {"seed", r.seed},
      {"config_hash", hex64(r.config_hash)},
      {"overall", real_json(r.overall)},
      {"splits",
       {{"many", real_json(r.split_accuracy[0])},
        {"medium", real_json(r.split_accuracy[1])},
        {"few", real_json(r.split_accuracy[2])}}},
      {"split_counts", {{"many", r.split_counts[0]}, {"medium", r.split_counts[1]}, {"few", r.split_counts[2]}}},
      {"per_class", per_class},
      {"per_class_counts", r.per_class_counts},
  };
}

std::uint64_t parse_hex(const std::string& s) {
  std::uint64_t v = 0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v, 16);
  if (ec != std::errc() || p != s.data() + s.size()) throw DataError("bad config hash '" + s + "'");
  return v;
}

double parse_real(const std::string& s) {
  if (s == "nan") return kNaN;
  double v = 0.0;
  auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || p != s.data() + s.size()) throw DataError("bad number '" + s + "' in report");
  return v;
}

MetricsReport report_from_json(const ojson& j) {
  MetricsReport r;
  r.label = j.at("label");
  r.loop = j.at("loop");
  r.seed = j.at("seed");
  r.config_hash = parse_hex(j.at("config_hash"));
  r.overall = real_from(j.at("overall"));
  const auto& s = j.at("splits");
  r.split_accuracy = {real_from(s.at("many")), real_from(s.at("medium")), real_from(s.at("few"))};
  const auto& c = j.at("split_counts");
  r.split_counts = {c.at("many").get<int>(), c.at("medium").get<int>(), c.at("few").get<int>()};
  for (const auto& v : j.at("per_class")) r.per_class.push_back(real_from(v));
  r.per_class_counts = j.at("per_class_counts").get<std::vector<int>>();
  return r;
}

}  // namespace

std::string render_report(std::span<const MetricsReport> reports, ReportFormat format, const ojson* config) {
  if (format == ReportFormat::structured) {
    ojson doc = {{"format", "sslt-report"}, {"version", 1}, {"config", config ? *config : ojson(nullptr)}};
    doc["reports"] = ojson::array();
    for (const auto& r : reports) doc["reports"].push_back(report_json(r));
    return doc.dump(2) + "\n";
  }
  std::string out = std::string(kRowsHeader) + "\n" + kRowsColumns + "\n";
  for (const auto& r : reports) {
    SSLT_CHECK(r.label.find_first_of("\t\n") == std::string::npos, ContractError, "report label contains a tab");
    out += r.label + '\t' + std::to_string(r.loop) + '\t' + std::to_string(r.seed) + '\t' + hex64(r.config_hash) +
           '\t' + format_double(r.overall) + '\t' + format_double(r.split_accuracy[0]) + '\t' +
           format_double(r.split_accuracy[1]) + '\t' + format_double(r.split_accuracy[2]) + '\n';
  }
  return out;
}

std::vector<MetricsReport> parse_report(std::string_view text, ReportFormat format) {
  std::vector<MetricsReport> out;
  if (format == ReportFormat::structured) {
    try {
      const auto doc = ojson::parse(text);
      if (doc.at("format") != "sslt-report") throw DataError("not an sslt report");
      for (const auto& j : doc.at("reports")) out.push_back(report_from_json(j));
    } catch (const ojson::exception& e) {
      throw DataError(std::string("malformed structured report: ") + e.what());
    }
    return out;
  }
  std::istringstream in{std::string(text)};
  std::string line;
  if (!std::getline(in, line) || line != kRowsHeader) throw DataError("missing report header line");
  if (!std::getline(in, line) || line != kRowsColumns) throw DataError("missing report column line");
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::vector<std::string> f;
    std::istringstream fields(line);
    for (std::string cell; std::getline(fields, cell, '\t');) f.push_back(cell);
    if (f.size() != 8) throw DataError("report row has " + std::to_string(f.size()) + " fields, expected 8");
    MetricsReport r;
    r.label = f[0];
    r.loop = std::stoi(f[1]);
    r.seed = std::stoull(f[2]);
    r.config_hash = parse_hex(f[3]);
    r.overall = parse_real(f[4]);
    r.split_accuracy = {parse_real(f[5]), parse_real(f[6]), parse_real(f[7])};
    out.push_back(std::move(r));
  }
  return out;
}

void emit_report(std::span<const MetricsReport> reports, const std::filesystem::path& path, ReportFormat format,
                 const ojson* config) {
  write_file_atomic(path, render_report(reports, format, config));
}

std::string format_grid(std::span<const MetricsReport> reports) {
  std::size_t width = 6;
  for (const auto& r : reports) width = std::max(width, r.label.size());
  auto pct = [](double v) {
    if (std::isnan(v)) return std::string("     -");
    char buf[32];
    std::snprintf(buf, sizeof buf, "%6.1f", 100.0 * v);
    return std::string(buf);
  };
  auto pad = [&](const std::string& s) { return s + std::string(width - s.size(), ' '); };
  std::string out = pad("Method") + "  Overall     Many   Medium      Few\n";
  for (const auto& r : reports) {
    out += pad(r.label) + "   " + pct(r.overall) + "   " + pct(r.split_accuracy[0]) + "   " +
           pct(r.split_accuracy[1]) + "   " + pct(r.split_accuracy[2]) + "\n";
  }
  return out;
}

}  // namespace sslt
