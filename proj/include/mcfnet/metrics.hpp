#pragma once

#include <array>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "mcfnet/errors.hpp"

// Confusion-matrix evaluation for the three quality grades: accuracy,
// per-class and macro precision/recall/F, and per-stratum accuracy tables.

namespace mcf {

struct ConfusionMatrix {
  std::array<std::array<std::size_t, 3>, 3> counts{};  // [true][pred]

  std::size_t total() const {
    std::size_t n = 0;
    for (const auto& row : counts) {
      for (std::size_t c : row) n += c;
    }
    return n;
  }
  std::size_t row_sum(int t) const { return counts[t][0] + counts[t][1] + counts[t][2]; }
  std::size_t col_sum(int p) const { return counts[0][p] + counts[1][p] + counts[2][p]; }
};

inline ConfusionMatrix confusion_matrix(const std::vector<int>& truth, const std::vector<int>& pred) {
  if (truth.size() != pred.size()) {
    throw Error(ErrorCode::kLengthMismatch,
                std::to_string(truth.size()) + " labels vs " + std::to_string(pred.size()) +
                    " predictions");
  }
  if (truth.empty()) throw Error(ErrorCode::kLengthMismatch, "no samples");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < truth.size(); ++i) {
    if (truth[i] < 0 || truth[i] > 2 || pred[i] < 0 || pred[i] > 2) {
      throw Error(ErrorCode::kInvalidGrade,
                  "pair (" + std::to_string(truth[i]) + ", " + std::to_string(pred[i]) +
                      ") outside the three grades");
    }
    ++cm.counts[truth[i]][pred[i]];
  }
  return cm;
}

struct MetricReport {
  double accuracy = 0.0;
  std::array<double, 3> precision{};
  std::array<double, 3> recall{};
  std::array<double, 3> f1{};
  double macro_precision = 0.0;
  double macro_recall = 0.0;
  double macro_f = 0.0;
};

// accuracy = trace/total; per-class P = TP/(TP+FP), R = TP/(TP+FN),
// F = 2PR/(P+R); every 0/0 is defined as 0; macro values are unweighted
// means over the three classes.
inline MetricReport metric_report(const ConfusionMatrix& cm) {
  const std::size_t total = cm.total();
  if (total == 0) throw Error(ErrorCode::kEmptyMatrix, "confusion matrix has no entries");
  MetricReport r;
  std::size_t trace = 0;
  for (int c = 0; c < 3; ++c) {
    const double tp = static_cast<double>(cm.counts[c][c]);
    trace += cm.counts[c][c];
    const double col = static_cast<double>(cm.col_sum(c));
    const double row = static_cast<double>(cm.row_sum(c));
    r.precision[c] = col > 0.0 ? tp / col : 0.0;
    r.recall[c] = row > 0.0 ? tp / row : 0.0;
    const double pr = r.precision[c] + r.recall[c];
    r.f1[c] = pr > 0.0 ? 2.0 * r.precision[c] * r.recall[c] / pr : 0.0;
    r.macro_precision += r.precision[c] / 3.0;
    r.macro_recall += r.recall[c] / 3.0;
    r.macro_f += r.f1[c] / 3.0;
  }
  r.accuracy = static_cast<double>(trace) / static_cast<double>(total);
  return r;
}

// Per-stratum accuracy; strata that never occur are simply absent from the
// result (not reported as zero).
struct StratifiedAccuracy {
  std::map<int, double> per_stratum;
  std::map<int, std::size_t> stratum_size;
  double overall = 0.0;
  std::size_t total = 0;
};

inline StratifiedAccuracy stratified_accuracy(const std::vector<int>& strata,
                                              const std::vector<bool>& correct) {
  if (strata.size() != correct.size()) {
    throw Error(ErrorCode::kLengthMismatch,
                std::to_string(strata.size()) + " strata vs " + std::to_string(correct.size()) +
                    " outcomes");
  }
  StratifiedAccuracy out;
  std::map<int, std::size_t> hits;
  for (std::size_t i = 0; i < strata.size(); ++i) {
    ++out.stratum_size[strata[i]];
    hits[strata[i]] += correct[i] ? 1 : 0;
    out.total += 1;
    out.overall += correct[i] ? 1.0 : 0.0;
  }
  out.overall = out.total > 0 ? out.overall / static_cast<double>(out.total) : 0.0;
  for (const auto& [key, n] : out.stratum_size) {
    out.per_stratum[key] = static_cast<double>(hits[key]) / static_cast<double>(n);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Report rendering
// ---------------------------------------------------------------------------

inline std::string format_metric_report(const MetricReport& r) {
  char line[160];
  std::string out;
  std::snprintf(line, sizeof(line), "accuracy  %.4f\n", r.accuracy);
  out += line;
  std::snprintf(line, sizeof(line), "%-8s%12s%12s%12s\n", "class", "precision", "recall", "f");
  out += line;
  const char* names[3] = {"Good", "Usable", "Reject"};
  for (int c = 0; c < 3; ++c) {
    std::snprintf(line, sizeof(line), "%-8s%12.4f%12.4f%12.4f\n", names[c], r.precision[c],
                  r.recall[c], r.f1[c]);
    out += line;
  }
  std::snprintf(line, sizeof(line), "%-8s%12.4f%12.4f%12.4f\n", "macro", r.macro_precision,
                r.macro_recall, r.macro_f);
  out += line;
  return out;
}

inline std::string metric_report_csv(const MetricReport& r) {
  char line[96];
  std::string out = "metric,value\n";
  auto add = [&](const char* name, double v) {
    std::snprintf(line, sizeof(line), "%s,%.6f\n", name, v);
    out += line;
  };
  add("accuracy", r.accuracy);
  const char* names[3] = {"good", "usable", "reject"};
  for (int c = 0; c < 3; ++c) {
    add((std::string("precision_") + names[c]).c_str(), r.precision[c]);
    add((std::string("recall_") + names[c]).c_str(), r.recall[c]);
    add((std::string("f_") + names[c]).c_str(), r.f1[c]);
  }
  add("macro_precision", r.macro_precision);
  add("macro_recall", r.macro_recall);
  add("macro_f", r.macro_f);
  return out;
}

inline std::string format_stratified_accuracy(const StratifiedAccuracy& s,
                                              const char* stratum_name = "stratum") {
  char line[96];
  std::string out;
  std::snprintf(line, sizeof(line), "%-10s%10s%10s\n", stratum_name, "n", "accuracy");
  out += line;
  for (const auto& [key, acc] : s.per_stratum) {
    std::snprintf(line, sizeof(line), "%-10d%10zu%10.4f\n", key, s.stratum_size.at(key), acc);
    out += line;
  }
  std::snprintf(line, sizeof(line), "%-10s%10zu%10.4f\n", "overall", s.total, s.overall);
  out += line;
  return out;
}

}  // namespace mcf
