#pragma once

#include <string>
#include <vector>

#include "ualab/evaluation.hpp"

namespace ualab {

// Emits static tables and charts from the logs a run directory contains:
//   pretrain_log.jsonl -> training_curve.svg
//   metrics.jsonl      -> report_tables.txt
//   ablation.csv       -> ablation_bars.svg (+ table section)
// Throws NoMetricsFound when none of them exist. Output is byte-stable for
// identical inputs.
void write_report(const std::string& run_dir, const std::string& out_dir);

// Rendering helpers, exposed for tests.
struct CurvePoint {
  int step = 0;
  double l_temp = 0.0, l_ord = 0.0, l_total = 0.0;
};

std::string render_training_curve_svg(const std::vector<CurvePoint>& points);

struct AblationBar {
  std::string label;
  double mean_cls = 0.0;
};

std::string render_ablation_bars_svg(const std::vector<AblationBar>& bars);

}  // namespace ualab
