#pragma once

#include <filesystem>
#include <optional>
#include <string>
#include <vector>
#include <json.hpp>

namespace dirfocus::app {

/// Published 14-class accuracies of the reference models (LOSO / LOTO, 1 s and
/// 10 s windows). Report metadata only; never used as a test target.
struct PublishedAccuracy {
  const char* model;
  const char* paradigm;
  double window_seconds;
  double accuracy;
  const char* stars;
};

const std::vector<PublishedAccuracy>& published_accuracies();
std::optional<PublishedAccuracy> find_published(const std::string& model, const std::string& paradigm,
                                                double window_seconds, int n_class);

/// Expands result paths: a directory is searched recursively for
/// results.json, a pattern with * or ? matches file names in its directory,
/// anything else is taken as a file. Sorted, duplicates removed.
std::vector<std::filesystem::path> expand_result_paths(const std::vector<std::string>& patterns);

struct ReportFiles {
  std::filesystem::path summary_csv, table_csv;
  std::vector<std::filesystem::path> plots;
};

/// Writes summary.csv (one row per results file, with the published
/// reference accuracy when one matches), table.csv and, when `plots` is set,
/// accuracy_vs_window.svg and accuracy_vs_classes.svg.
ReportFiles write_report(const std::vector<std::filesystem::path>& result_files, const std::filesystem::path& out_dir,
                         bool plots = true);

struct Series {
  std::string label;
  std::vector<std::pair<double, double>> points;
};

/// Minimal line chart with markers, axes, ticks and a legend.
std::string svg_line_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                           const std::vector<Series>& series, std::optional<double> reference_line = std::nullopt);

}  // namespace dirfocus::app
