#include "ualab/report.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

namespace ualab {

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

std::string fmt(double v, const char* spec = "%.4f") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

std::vector<CurvePoint> read_curve(const fs::path& path) {
  std::ifstream in(path);
  std::vector<CurvePoint> points;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    if (!j.contains("step")) continue;  // header line
    points.push_back({j.at("step").get<int>(), j.at("l_temp").get<double>(),
                      j.at("l_ord").get<double>(),
                      j.at("l_total").get<double>()});
  }
  return points;
}

struct MetricsRow {
  std::string representation;
  std::string regime;
  double labeled_fraction = 1.0;
  double cls = 0.0, ant = 0.0;
  std::map<std::string, double> loc;
};

std::vector<MetricsRow> read_metrics(const fs::path& path) {
  std::ifstream in(path);
  std::vector<MetricsRow> rows;
  std::string line;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    const json j = json::parse(line);
    MetricsRow row;
    row.representation = j.at("representation").get<std::string>();
    row.regime = j.at("regime").get<std::string>();
    row.labeled_fraction = j.at("labeled_fraction").get<double>();
    row.cls = j.at("cls_accuracy").get<double>();
    row.ant = j.at("ant_accuracy").get<double>();
    for (const auto& [key, value] : j.at("loc_accuracy_at").items()) {
      row.loc[key] = value.get<double>();
    }
    rows.push_back(std::move(row));
  }
  return rows;
}

struct CsvRow {
  std::string scope, mode, regime;
  std::uint64_t seed = 0;
  double cls = 0.0, loc1 = 0.0, loc025 = 0.0, ant = 0.0;
};

std::vector<CsvRow> read_ablation_csv(const fs::path& path) {
  std::ifstream in(path);
  std::vector<CsvRow> rows;
  std::string line;
  bool header = true;
  while (std::getline(in, line)) {
    if (header) {
      header = false;
      continue;
    }
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 8) continue;
    CsvRow row;
    row.scope = fields[0];
    row.mode = fields[1];
    row.seed = std::stoull(fields[2]);
    const auto num = [](const std::string& s) {
      return s == "nan" ? std::nan("") : std::stod(s);
    };
    row.cls = num(fields[3]);
    row.loc1 = num(fields[4]);
    row.loc025 = num(fields[5]);
    row.ant = num(fields[6]);
    row.regime = fields[7];
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace

std::string render_training_curve_svg(const std::vector<CurvePoint>& points) {
  const int width = 720, height = 400;
  const int x0 = 60, y0 = 20, x1 = width - 20, y1 = height - 50;
  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
         std::to_string(width) + "\" height=\"" + std::to_string(height) +
         "\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += "<line x1=\"" + std::to_string(x0) + "\" y1=\"" + std::to_string(y1) +
         "\" x2=\"" + std::to_string(x1) + "\" y2=\"" + std::to_string(y1) +
         "\" stroke=\"black\"/>\n";
  svg += "<line x1=\"" + std::to_string(x0) + "\" y1=\"" + std::to_string(y0) +
         "\" x2=\"" + std::to_string(x0) + "\" y2=\"" + std::to_string(y1) +
         "\" stroke=\"black\"/>\n";

  if (!points.empty()) {
    double lo = HUGE_VAL, hi = -HUGE_VAL;
    for (const auto& p : points) {
      for (double v : {p.l_temp, p.l_ord, p.l_total}) {
        lo = std::min(lo, v);
        hi = std::max(hi, v);
      }
    }
    if (hi <= lo) hi = lo + 1.0;
    const double span_x = std::max<std::size_t>(points.size() - 1, 1);
    const auto px = [&](std::size_t i) {
      return x0 + (x1 - x0) * static_cast<double>(i) / span_x;
    };
    const auto py = [&](double v) {
      return y1 - (y1 - y0) * (v - lo) / (hi - lo);
    };
    const auto polyline = [&](const char* color, auto select) {
      std::string pts;
      for (std::size_t i = 0; i < points.size(); ++i) {
        pts += fmt(px(i), "%.2f");
        pts += ",";
        pts += fmt(py(select(points[i])), "%.2f");
        pts += " ";
      }
      svg += "<polyline fill=\"none\" stroke=\"" + std::string(color) +
             "\" stroke-width=\"1.5\" points=\"" + pts + "\"/>\n";
    };
    polyline("#1f77b4", [](const CurvePoint& p) { return p.l_total; });
    polyline("#2ca02c", [](const CurvePoint& p) { return p.l_temp; });
    polyline("#d62728", [](const CurvePoint& p) { return p.l_ord; });
    svg += "<text x=\"" + std::to_string(x0) + "\" y=\"" +
           std::to_string(height - 14) +
           "\" font-size=\"12\">steps: " + std::to_string(points.size()) +
           "  range: [" + fmt(lo) + ", " + fmt(hi) + "]</text>\n";
    svg += "<text x=\"" + std::to_string(x1 - 260) + "\" y=\"" +
           std::to_string(y0 + 14) +
           "\" font-size=\"12\">total (blue), temporal (green), order "
           "(red)</text>\n";
  }
  svg += "</svg>\n";
  return svg;
}

std::string render_ablation_bars_svg(const std::vector<AblationBar>& bars) {
  const int bar_w = 64, gap = 28;
  const int width = 80 + static_cast<int>(bars.size()) * (bar_w + gap);
  const int height = 360;
  const int y_base = height - 70, y_top = 30;
  std::string svg;
  svg += "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" +
         std::to_string(width) + "\" height=\"" + std::to_string(height) +
         "\">\n";
  svg += "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  svg += "<line x1=\"40\" y1=\"" + std::to_string(y_base) + "\" x2=\"" +
         std::to_string(width - 20) + "\" y2=\"" + std::to_string(y_base) +
         "\" stroke=\"black\"/>\n";
  for (std::size_t i = 0; i < bars.size(); ++i) {
    const double h = std::clamp(bars[i].mean_cls, 0.0, 1.0) * (y_base - y_top);
    const int x = 50 + static_cast<int>(i) * (bar_w + gap);
    svg += "<rect x=\"" + std::to_string(x) + "\" y=\"" +
           fmt(y_base - h, "%.2f") + "\" width=\"" + std::to_string(bar_w) +
           "\" height=\"" + fmt(h, "%.2f") + "\" fill=\"#1f77b4\"/>\n";
    svg += "<text x=\"" + std::to_string(x) + "\" y=\"" +
           fmt(y_base - h - 6.0, "%.2f") + "\" font-size=\"11\">" +
           fmt(bars[i].mean_cls) + "</text>\n";
    svg += "<text x=\"" + std::to_string(x) + "\" y=\"" +
           std::to_string(y_base + 16) + "\" font-size=\"10\">" +
           bars[i].label + "</text>\n";
  }
  svg += "<text x=\"40\" y=\"16\" font-size=\"12\">mean classification "
         "accuracy per ablation cell</text>\n";
  svg += "</svg>\n";
  return svg;
}

void write_report(const std::string& run_dir, const std::string& out_dir) {
  const fs::path run(run_dir);
  const fs::path out(out_dir);
  if (!fs::is_directory(out)) {
    throw IoError("report output directory does not exist: " + out.string());
  }

  const fs::path curve_path = run / "pretrain_log.jsonl";
  const fs::path metrics_path = run / "metrics.jsonl";
  const fs::path ablation_path = run / "ablation.csv";
  const bool have_curve = fs::exists(curve_path);
  const bool have_metrics = fs::exists(metrics_path);
  const bool have_ablation = fs::exists(ablation_path);
  if (!have_curve && !have_metrics && !have_ablation) {
    throw NoMetricsFound("no pretrain_log.jsonl, metrics.jsonl or "
                         "ablation.csv under " + run.string());
  }

  std::string tables;
  if (have_curve) {
    const auto points = read_curve(curve_path);
    std::ofstream svg(out / "training_curve.svg");
    svg << render_training_curve_svg(points);
    if (!points.empty()) {
      const std::size_t tail = std::max<std::size_t>(points.size() / 10, 1);
      double first = 0.0, last = 0.0;
      for (std::size_t i = 0; i < tail; ++i) first += points[i].l_total;
      for (std::size_t i = points.size() - tail; i < points.size(); ++i) {
        last += points[i].l_total;
      }
      tables += "training\n";
      tables += "  steps: " + std::to_string(points.size()) + "\n";
      tables += "  mean l_total first 10%: " +
                fmt(first / static_cast<double>(tail)) + "\n";
      tables += "  mean l_total last 10%:  " +
                fmt(last / static_cast<double>(tail)) + "\n\n";
    }
  }

  if (have_metrics) {
    const auto rows = read_metrics(metrics_path);
    std::vector<std::string> reps;
    for (const auto& r : rows) {
      if (std::find(reps.begin(), reps.end(), r.representation) == reps.end()) {
        reps.push_back(r.representation);
      }
    }
    const auto find_cls = [&](const std::string& rep, const std::string& regime,
                              double fraction) {
      for (const auto& r : rows) {
        if (r.representation == rep && r.regime == regime &&
            std::abs(r.labeled_fraction - fraction) < 1e-12) {
          return std::string(fmt(r.cls));
        }
      }
      return std::string("-");
    };
    tables += "classification accuracy\n";
    tables += "  representation    linear-10%  linear-100%  finetune-100%\n";
    for (const auto& rep : reps) {
      char line[160];
      std::snprintf(line, sizeof(line), "  %-16s  %10s  %11s  %13s\n",
                    rep.c_str(), find_cls(rep, "frozen", 0.1).c_str(),
                    find_cls(rep, "frozen", 1.0).c_str(),
                    find_cls(rep, "finetuned", 1.0).c_str());
      tables += line;
    }
    tables += "\nlocalization accuracy (frozen probe, all labels)\n";
    for (const auto& r : rows) {
      if (r.regime != "frozen" || std::abs(r.labeled_fraction - 1.0) > 1e-12) {
        continue;
      }
      tables += "  " + r.representation + ":";
      for (const auto& [key, value] : r.loc) {
        tables += " within " + key + "s " + fmt(value) + ";";
      }
      tables += "\n";
    }
    tables += "\nanticipation accuracy\n";
    for (const auto& r : rows) {
      if (std::abs(r.labeled_fraction - 1.0) > 1e-12) continue;
      tables += "  " + r.representation + " (" + r.regime + "): " +
                fmt(r.ant) + "\n";
    }
    tables += "\n";
  }

  if (have_ablation) {
    const auto rows = read_ablation_csv(ablation_path);
    std::map<std::string, std::pair<double, int>> cells;  // label -> (sum, n)
    for (const auto& r : rows) {
      if (std::isnan(r.cls)) continue;
      auto& cell = cells[r.scope + "/" + r.mode];
      cell.first += r.cls;
      cell.second += 1;
    }
    std::vector<AblationBar> bars;
    tables += "ablation (mean classification accuracy)\n";
    for (const auto& [label, acc] : cells) {
      const double mean = acc.second ? acc.first / acc.second : 0.0;
      bars.push_back({label, mean});
      tables += "  " + label + ": " + fmt(mean) + " over " +
                std::to_string(acc.second) + " seeds\n";
    }
    std::ofstream svg(out / "ablation_bars.svg");
    svg << render_ablation_bars_svg(bars);
  }

  std::ofstream table_file(out / "report_tables.txt");
  table_file << tables;
  if (!table_file) throw IoError("cannot write report tables");
}

}  // namespace ualab
