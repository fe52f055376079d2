#include "dirfocus/app/report.hpp"

#include <fnmatch.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "dirfocus/app/experiment.hpp"
#include "dirfocus/error.hpp"

namespace dirfocus::app {

namespace fs = std::filesystem;
using nlohmann::json;

const std::vector<PublishedAccuracy>& published_accuracies() {
  static const std::vector<PublishedAccuracy> table = {
      {"EEG-CNN", "LOSO", 1, 0.0868, "***"},         {"EEG-CNN", "LOSO", 10, 0.0907, "*"},
      {"EEG-CNN", "LOTO", 1, 0.1025, "***"},         {"EEG-CNN", "LOTO", 10, 0.1305, "***"},
      {"Sp-EEG-CNN", "LOSO", 1, 0.4752, ""},         {"Sp-EEG-CNN", "LOSO", 10, 0.2292, ""},
      {"Sp-EEG-CNN", "LOTO", 1, 0.5833, "***"},      {"Sp-EEG-CNN", "LOTO", 10, 0.2176, ""},
      {"EEG-LSM-CNN", "LOSO", 1, 0.0898, "***"},     {"EEG-LSM-CNN", "LOSO", 10, 0.0983, "**"},
      {"EEG-LSM-CNN", "LOTO", 1, 0.0614, ""},        {"EEG-LSM-CNN", "LOTO", 10, 0.0732, ""},
      {"Sp-EEG-LSM-CNN", "LOSO", 1, 0.5350, "***"},  {"Sp-EEG-LSM-CNN", "LOSO", 10, 0.5312, ""},
      {"Sp-EEG-LSM-CNN", "LOTO", 1, 0.5569, "***"},  {"Sp-EEG-LSM-CNN", "LOTO", 10, 0.5005, ""},
      {"EEG-Deformer", "LOSO", 1, 0.0832, "***"},    {"EEG-Deformer", "LOSO", 10, 0.0944, "**"},
      {"EEG-Deformer", "LOTO", 1, 0.0802, "**"},     {"EEG-Deformer", "LOTO", 10, 0.0922, ""},
      {"Sp-EEG-Deformer", "LOSO", 1, 0.5535, "***"}, {"Sp-EEG-Deformer", "LOSO", 10, 0.5299, ""},
      {"Sp-EEG-Deformer", "LOTO", 1, 0.5719, "***"}, {"Sp-EEG-Deformer", "LOTO", 10, 0.5161, ""},
  };
  return table;
}

std::optional<PublishedAccuracy> find_published(const std::string& model, const std::string& paradigm,
                                                double window_seconds, int n_class) {
  if (n_class != 14) return std::nullopt;
  for (const auto& p : published_accuracies())
    if (model == p.model && paradigm == p.paradigm && window_seconds == p.window_seconds) return p;
  return std::nullopt;
}

std::vector<fs::path> expand_result_paths(const std::vector<std::string>& patterns) {
  std::set<fs::path> found;
  for (const auto& pattern : patterns) {
    const fs::path p(pattern);
    if (fs::is_directory(p)) {
      for (const auto& e : fs::recursive_directory_iterator(p))
        if (e.is_regular_file() && e.path().filename() == "results.json") found.insert(e.path());
    } else if (pattern.find_first_of("*?[") != std::string::npos) {
      const fs::path dir = p.has_parent_path() ? p.parent_path() : fs::path(".");
      const std::string name = p.filename().string();
      if (!fs::is_directory(dir)) continue;
      for (const auto& e : fs::directory_iterator(dir)) {
        if (fnmatch(name.c_str(), e.path().filename().c_str(), 0) != 0) continue;
        if (e.is_regular_file()) {
          found.insert(e.path());
        } else if (e.is_directory() && fs::exists(e.path() / "results.json")) {
          found.insert(e.path() / "results.json");
        }
      }
    } else if (fs::exists(p)) {
      found.insert(p);
    } else {
      throw DataError("no results at " + pattern);
    }
  }
  return {found.begin(), found.end()};
}

namespace {

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

std::string escape(const std::string& s) {
  std::string out;
  for (char c : s) {
    if (c == '<') out += "&lt;";
    else if (c == '>') out += "&gt;";
    else if (c == '&') out += "&amp;";
    else out += c;
  }
  return out;
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    json j;
    in >> j;
    if (j.value("format", "") != "dirfocus-results") throw DataError(path.string() + " is not a results file");
    return j;
  } catch (const json::exception& e) {
    throw DataError("malformed results file " + path.string() + ": " + e.what());
  }
}

}  // namespace

std::string svg_line_chart(const std::string& title, const std::string& x_label, const std::string& y_label,
                           const std::vector<Series>& series, std::optional<double> reference_line) {
  const double W = 640, H = 420, left = 70, right = 170, top = 40, bottom = 60;
  double x0 = 1e300, x1 = -1e300, y1 = 0;
  for (const auto& s : series)
    for (const auto& [x, y] : s.points) {
      x0 = std::min(x0, x);
      x1 = std::max(x1, x);
      y1 = std::max(y1, y);
    }
  if (reference_line) y1 = std::max(y1, *reference_line);
  if (x0 > x1) x0 = 0, x1 = 1;
  if (x0 == x1) x0 -= 1, x1 += 1;
  y1 = std::max(0.1, std::ceil(y1 * 10 + 0.5) / 10);
  const double pw = W - left - right, ph = H - top - bottom;
  auto sx = [&](double x) { return left + (x - x0) / (x1 - x0) * pw; };
  auto sy = [&](double y) { return top + ph - y / y1 * ph; };
  static const char* colors[] = {"#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf"};

  std::ostringstream os;
  os << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H
     << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  os << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  os << "<text x=\"" << left + pw / 2 << "\" y=\"22\" text-anchor=\"middle\" font-size=\"14\">" << escape(title)
     << "</text>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << top + ph << "\" x2=\"" << left + pw << "\" y2=\"" << top + ph
     << "\" stroke=\"black\"/>\n";
  os << "<line x1=\"" << left << "\" y1=\"" << top << "\" x2=\"" << left << "\" y2=\"" << top + ph
     << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 5; ++i) {
    const double y = y1 * i / 5;
    os << "<text x=\"" << left - 6 << "\" y=\"" << sy(y) + 4 << "\" text-anchor=\"end\">" << fmt("%.0f%%", 100 * y)
       << "</text>\n";
    os << "<line x1=\"" << left << "\" y1=\"" << sy(y) << "\" x2=\"" << left + pw << "\" y2=\"" << sy(y)
       << "\" stroke=\"#ddd\"/>\n";
  }
  std::set<double> xs;
  for (const auto& s : series)
    for (const auto& pt : s.points) xs.insert(pt.first);
  for (double x : xs)
    os << "<text x=\"" << sx(x) << "\" y=\"" << top + ph + 18 << "\" text-anchor=\"middle\">" << fmt("%g", x)
       << "</text>\n";
  os << "<text x=\"" << left + pw / 2 << "\" y=\"" << H - 15 << "\" text-anchor=\"middle\">" << escape(x_label)
     << "</text>\n";
  os << "<text transform=\"translate(18," << top + ph / 2 << ") rotate(-90)\" text-anchor=\"middle\">"
     << escape(y_label) << "</text>\n";
  if (reference_line) {
    os << "<line x1=\"" << left << "\" y1=\"" << sy(*reference_line) << "\" x2=\"" << left + pw << "\" y2=\""
       << sy(*reference_line) << "\" stroke=\"gray\" stroke-dasharray=\"4 3\"/>\n";
  }
  for (std::size_t i = 0; i < series.size(); ++i) {
    const char* c = colors[i % 7];
    auto pts = series[i].points;
    std::sort(pts.begin(), pts.end());
    os << "<polyline fill=\"none\" stroke=\"" << c << "\" stroke-width=\"2\" points=\"";
    for (const auto& [x, y] : pts) os << sx(x) << "," << sy(y) << " ";
    os << "\"/>\n";
    for (const auto& [x, y] : pts) os << "<circle cx=\"" << sx(x) << "\" cy=\"" << sy(y) << "\" r=\"3.5\" fill=\"" << c << "\"/>\n";
    const double ly = top + 10 + 18 * static_cast<double>(i);
    os << "<rect x=\"" << left + pw + 12 << "\" y=\"" << ly - 8 << "\" width=\"12\" height=\"4\" fill=\"" << c
       << "\"/>\n";
    os << "<text x=\"" << left + pw + 30 << "\" y=\"" << ly << "\">" << escape(series[i].label) << "</text>\n";
  }
  os << "</svg>\n";
  return os.str();
}

ReportFiles write_report(const std::vector<fs::path>& result_files, const fs::path& out_dir, bool plots) {
  if (result_files.empty()) throw DataError("no results files to report");
  fs::create_directories(out_dir);
  std::vector<json> results;
  for (const auto& p : result_files) results.push_back(read_json(p));

  ReportFiles files;
  files.summary_csv = out_dir / "summary.csv";
  files.table_csv = out_dir / "table.csv";
  {
    std::ofstream out(files.summary_csv, std::ios::trunc);
    out << "name,model,paradigm,labels,window_seconds,n_class,folds,balanced_acc_mean,balanced_acc_std,"
           "pooled_balanced_acc,chance_level,p95,stars,published_accuracy,published_stars,source\n";
    for (std::size_t i = 0; i < results.size(); ++i) {
      const auto& r = results[i];
      const auto pub = find_published(r.at("model"), r.at("paradigm"), r.at("window_seconds"), r.at("n_class"));
      out << r.at("name").get<std::string>() << "," << r.at("model").get<std::string>() << ","
          << r.at("paradigm").get<std::string>() << "," << r.at("labels").get<std::string>() << ","
          << r.at("window_seconds").get<double>() << "," << r.at("n_class").get<int>() << "," << r.at("folds").size()
          << "," << fmt("%.6f", r.at("balanced_acc_mean").get<double>()) << ","
          << fmt("%.6f", r.at("balanced_acc_std").get<double>()) << ","
          << fmt("%.6f", r.at("pooled_balanced_acc").get<double>()) << ","
          << fmt("%.6f", r.at("chance_level").get<double>()) << ","
          << (r.at("p95").is_null() ? std::string() : fmt("%.6g", r.at("p95").get<double>())) << ","
          << r.at("stars").get<std::string>() << "," << (pub ? fmt("%.4f", pub->accuracy) : std::string()) << ","
          << (pub ? pub->stars : "") << "," << result_files[i].string() << "\n";
    }
  }
  {
    std::ofstream out(files.table_csv, std::ios::trunc);
    out << results_csv(results);
  }
  if (!plots) return files;

  std::map<std::string, Series> by_window, by_classes;
  for (const auto& r : results) {
    const std::string model = r.at("model");
    const std::string key = model + " " + r.at("paradigm").get<std::string>();
    const double acc = r.at("balanced_acc_mean");
    if (r.at("n_class").get<int>() == 14) {
      by_window[key].label = key;
      by_window[key].points.emplace_back(r.at("window_seconds").get<double>(), acc);
    }
    const std::string ckey = key + " " + fmt("%g s", r.at("window_seconds").get<double>());
    by_classes[ckey].label = ckey;
    by_classes[ckey].points.emplace_back(r.at("n_class").get<int>(), acc);
  }
  auto values = [](const std::map<std::string, Series>& m) {
    std::vector<Series> v;
    for (const auto& [k, s] : m) v.push_back(s);
    return v;
  };
  if (!by_window.empty()) {
    files.plots.push_back(out_dir / "accuracy_vs_window.svg");
    std::ofstream(files.plots.back()) << svg_line_chart("14-class accuracy vs decision window", "window (s)",
                                                        "balanced accuracy", values(by_window), 1.0 / 14);
  }
  files.plots.push_back(out_dir / "accuracy_vs_classes.svg");
  std::ofstream(files.plots.back()) << svg_line_chart("Accuracy vs number of classes", "classes", "balanced accuracy",
                                                      values(by_classes));
  return files;
}

}  // namespace dirfocus::app
