#include "degfair/metrics.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>

#include "degfair/errors.hpp"

namespace degfair::metrics {

namespace {

void check_groups(std::span<const std::size_t> g0, std::span<const std::size_t> g1,
                  std::size_t num_classes) {
  if (g0.empty() || g1.empty()) throw ArgumentError("fairness metrics need two non-empty groups");
  if (num_classes == 0) throw ArgumentError("num_classes must be >= 1");
}

std::vector<double> class_frequencies(std::span<const std::size_t> preds,
                                      std::span<const std::size_t> group,
                                      std::size_t num_classes) {
  std::vector<double> freq(num_classes, 0.0);
  for (std::size_t v : group) {
    if (preds[v] >= num_classes) throw ArgumentError("prediction outside the class range");
    freq[preds[v]] += 1.0;
  }
  for (double& f : freq) f /= static_cast<double>(group.size());
  return freq;
}

// recall[y] = P(pred = y | label = y, group), or -1 when the class is absent.
std::vector<double> class_recalls(std::span<const std::size_t> preds,
                                  std::span<const std::size_t> labels,
                                  std::span<const std::size_t> group, std::size_t num_classes) {
  std::vector<double> hit(num_classes, 0.0);
  std::vector<double> total(num_classes, 0.0);
  for (std::size_t v : group) {
    if (labels[v] >= num_classes) throw ArgumentError("label outside the class range");
    total[labels[v]] += 1.0;
    if (preds[v] == labels[v]) hit[labels[v]] += 1.0;
  }
  std::vector<double> recall(num_classes, -1.0);
  for (std::size_t y = 0; y < num_classes; ++y) {
    if (total[y] > 0.0) recall[y] = hit[y] / total[y];
  }
  return recall;
}

std::string fmt(const char* pattern, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, pattern, v);
  return buf;
}

}  // namespace

double accuracy(std::span<const std::size_t> preds, std::span<const std::size_t> labels,
                std::span<const std::size_t> idx) {
  if (idx.empty()) throw ArgumentError("accuracy over an empty index set");
  std::size_t hit = 0;
  for (std::size_t v : idx) hit += preds[v] == labels[v] ? 1 : 0;
  return static_cast<double>(hit) / static_cast<double>(idx.size());
}

double delta_dsp(std::span<const std::size_t> preds, std::span<const std::size_t> g0,
                 std::span<const std::size_t> g1, std::size_t num_classes) {
  check_groups(g0, g1, num_classes);
  const auto p0 = class_frequencies(preds, g0, num_classes);
  const auto p1 = class_frequencies(preds, g1, num_classes);
  double acc = 0.0;
  for (std::size_t y = 0; y < num_classes; ++y) acc += std::abs(p0[y] - p1[y]);
  return acc / static_cast<double>(num_classes);
}

double delta_deo(std::span<const std::size_t> preds, std::span<const std::size_t> labels,
                 std::span<const std::size_t> g0, std::span<const std::size_t> g1,
                 std::size_t num_classes) {
  check_groups(g0, g1, num_classes);
  const auto r0 = class_recalls(preds, labels, g0, num_classes);
  const auto r1 = class_recalls(preds, labels, g1, num_classes);
  double acc = 0.0;
  std::size_t evaluated = 0;
  for (std::size_t y = 0; y < num_classes; ++y) {
    if (r0[y] < 0.0 || r1[y] < 0.0) continue;
    acc += std::abs(r0[y] - r1[y]);
    ++evaluated;
  }
  // Every class skipped: no measurable disparity.
  return evaluated == 0 ? 0.0 : acc / static_cast<double>(evaluated);
}

FairnessReport build_report(std::span<const std::size_t> preds,
                            std::span<const std::size_t> labels,
                            std::span<const std::size_t> eval_idx,
                            std::span<const double> degrees, int r_eval, double fraction,
                            std::size_t num_classes) {
  const auto groups = graph::partition_top_bottom(degrees, fraction, eval_idx);
  const auto& g0 = groups.groups[0];
  const auto& g1 = groups.groups[1];

  FairnessReport rep;
  rep.accuracy = accuracy(preds, labels, eval_idx);
  rep.delta_dsp = delta_dsp(preds, g0, g1, num_classes);
  rep.delta_deo = delta_deo(preds, labels, g0, g1, num_classes);
  rep.g0_size = g0.size();
  rep.g1_size = g1.size();
  rep.eval_size = eval_idx.size();
  rep.r_eval = r_eval;
  rep.fraction = fraction;

  const auto f0 = class_frequencies(preds, g0, num_classes);
  const auto f1 = class_frequencies(preds, g1, num_classes);
  const auto c0 = class_recalls(preds, labels, g0, num_classes);
  const auto c1 = class_recalls(preds, labels, g1, num_classes);
  for (std::size_t y = 0; y < num_classes; ++y) rep.per_class.push_back({f0[y], f1[y], c0[y], c1[y]});
  return rep;
}

MetricSummary summarize(std::span<const double> values) {
  if (values.empty()) throw ArgumentError("cannot summarize zero values");
  const double n = static_cast<double>(values.size());
  const double mean = std::accumulate(values.begin(), values.end(), 0.0) / n;
  double ss = 0.0;
  for (double v : values) ss += (v - mean) * (v - mean);
  return {mean, values.size() > 1 ? std::sqrt(ss / (n - 1.0)) : 0.0};
}

RunAggregate aggregate_runs(std::span<const FairnessReport> reports) {
  if (reports.empty()) throw ArgumentError("aggregate_runs needs at least one report");
  std::vector<double> acc, dsp, deo;
  for (const auto& r : reports) {
    acc.push_back(r.accuracy);
    dsp.push_back(r.delta_dsp);
    deo.push_back(r.delta_deo);
  }
  return {summarize(acc), summarize(dsp), summarize(deo), reports.size()};
}

std::string format_report(const FairnessReport& r) {
  std::string s;
  s += "accuracy=" + fmt("%.6f", r.accuracy) + "\n";
  s += "delta_dsp=" + fmt("%.6f", r.delta_dsp) + "\n";
  s += "delta_deo=" + fmt("%.6f", r.delta_deo) + "\n";
  s += "r_eval=" + std::to_string(r.r_eval) + "\n";
  s += "fraction=" + fmt("%.4f", r.fraction) + "\n";
  s += "eval_size=" + std::to_string(r.eval_size) + "\n";
  s += "g0_size=" + std::to_string(r.g0_size) + "\n";
  s += "g1_size=" + std::to_string(r.g1_size) + "\n";
  char line[160];
  std::snprintf(line, sizeof line, "%-6s %12s %12s %12s %12s\n", "class", "P(y|G0)", "P(y|G1)",
                "TPR(y|G0)", "TPR(y|G1)");
  s += line;
  auto cell = [](double v) { return v < 0.0 ? std::string("n/a") : fmt("%.6f", v); };
  for (std::size_t y = 0; y < r.per_class.size(); ++y) {
    const auto& c = r.per_class[y];
    std::snprintf(line, sizeof line, "%-6zu %12.6f %12.6f %12s %12s\n", y, c.dsp_g0, c.dsp_g1,
                  cell(c.deo_g0).c_str(), cell(c.deo_g1).c_str());
    s += line;
  }
  return s;
}

std::string format_aggregate(const RunAggregate& a) {
  std::string s;
  s += "runs=" + std::to_string(a.runs) + "\n";
  auto kv = [&](const char* name, const MetricSummary& m) {
    s += std::string(name) + "_mean=" + fmt("%.6f", m.mean) + "\n";
    s += std::string(name) + "_std=" + fmt("%.6f", m.std) + "\n";
  };
  kv("accuracy", a.accuracy);
  kv("delta_dsp", a.delta_dsp);
  kv("delta_deo", a.delta_deo);
  char line[128];
  std::snprintf(line, sizeof line, "%-10s %18s\n", "metric", "percent (mean ± std)");
  s += line;
  auto row = [&](const char* name, const MetricSummary& m) {
    std::snprintf(line, sizeof line, "%-10s %10.2f ± %5.2f\n", name, 100.0 * m.mean, 100.0 * m.std);
    s += line;
  };
  row("accuracy", a.accuracy);
  row("delta_dsp", a.delta_dsp);
  row("delta_deo", a.delta_deo);
  return s;
}

}  // namespace degfair::metrics
