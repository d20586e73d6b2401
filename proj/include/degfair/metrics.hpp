#pragma once

#include <span>
#include <string>
#include <vector>

#include "degfair/graph.hpp"

namespace degfair::metrics {

// Throws ArgumentError for an empty index set.
double accuracy(std::span<const std::size_t> preds, std::span<const std::size_t> labels,
                std::span<const std::size_t> idx);

// (1/|Y|) sum_y |P(pred = y | G0) - P(pred = y | G1)|.
double delta_dsp(std::span<const std::size_t> preds, std::span<const std::size_t> g0,
                 std::span<const std::size_t> g1, std::size_t num_classes);

// Classes without a true member in either group are left out of the mean; 0 when
// no class remains.
double delta_deo(std::span<const std::size_t> preds, std::span<const std::size_t> labels,
                 std::span<const std::size_t> g0, std::span<const std::size_t> g1,
                 std::size_t num_classes);

struct ClassBreakdown {
  double dsp_g0 = 0.0;  // P(pred = y | G0)
  double dsp_g1 = 0.0;
  // P(pred = y | label = y, G_i); negative when the class has no member in G_i.
  double deo_g0 = -1.0;
  double deo_g1 = -1.0;
};

struct FairnessReport {
  double accuracy = 0.0;
  double delta_dsp = 0.0;
  double delta_deo = 0.0;
  std::vector<ClassBreakdown> per_class;
  std::size_t g0_size = 0;
  std::size_t g1_size = 0;
  std::size_t eval_size = 0;
  int r_eval = 1;
  double fraction = 0.2;
};

// Accuracy over eval_idx, and the two gaps between the bottom and top
// `fraction` of eval_idx ranked by `degrees` (generalized degree of order r_eval).
FairnessReport build_report(std::span<const std::size_t> preds,
                            std::span<const std::size_t> labels,
                            std::span<const std::size_t> eval_idx,
                            std::span<const double> degrees, int r_eval, double fraction,
                            std::size_t num_classes);

struct MetricSummary {
  double mean = 0.0;
  double std = 0.0;  // sample standard deviation; 0 for a single run
};

struct RunAggregate {
  MetricSummary accuracy;
  MetricSummary delta_dsp;
  MetricSummary delta_deo;
  std::size_t runs = 0;
};

MetricSummary summarize(std::span<const double> values);
// Throws ArgumentError for an empty list.
RunAggregate aggregate_runs(std::span<const FairnessReport> reports);

// Line-oriented key=value records followed by an aligned per-class table.
std::string format_report(const FairnessReport& report);
// key=value records plus a "metric  mean ± std" table in percent.
std::string format_aggregate(const RunAggregate& agg);

}  // namespace degfair::metrics
