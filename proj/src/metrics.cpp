#include <algorithm>
#include <cmath>
#include <numeric>
#include <sstream>

#include "tfc/errors.hpp"
#include "tfc/evaluation.hpp"

namespace tfc::eval {

namespace {

void check_labels(std::span<const int> labels, std::size_t classes) {
  for (int y : labels) {
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      throw ContractError("label " + std::to_string(y) + " outside [0, " +
                          std::to_string(classes) + ")");
    }
  }
}

}  // namespace

std::vector<int> argmax_rows(const NumArray& scores) {
  if (scores.rank() != 2) throw ShapeError("scores must be [N, C]");
  const std::size_t n = scores.dim(0), c = scores.dim(1);
  std::vector<int> out(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double* row = scores.ptr() + i * c;
    out[i] = static_cast<int>(std::max_element(row, row + c) - row);
  }
  return out;
}

ClassificationMetrics label_metrics(std::span<const int> predictions, std::span<const int> labels,
                                    std::size_t num_classes) {
  if (predictions.size() != labels.size()) throw ShapeError("prediction/label count mismatch");
  if (labels.empty()) throw ContractError("metrics need at least one sample");
  check_labels(labels, num_classes);
  check_labels(predictions, num_classes);
  std::vector<double> tp(num_classes, 0), fp(num_classes, 0), fn(num_classes, 0);
  double correct = 0;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    const auto y = static_cast<std::size_t>(labels[i]);
    const auto p = static_cast<std::size_t>(predictions[i]);
    if (y == p) {
      ++correct;
      ++tp[y];
    } else {
      ++fp[p];
      ++fn[y];
    }
  }
  ClassificationMetrics m;
  m.accuracy = correct / static_cast<double>(labels.size());
  for (std::size_t c = 0; c < num_classes; ++c) {
    const double prec = tp[c] + fp[c] > 0 ? tp[c] / (tp[c] + fp[c]) : 0.0;
    const double rec = tp[c] + fn[c] > 0 ? tp[c] / (tp[c] + fn[c]) : 0.0;
    const double f1 = prec + rec > 0 ? 2.0 * prec * rec / (prec + rec) : 0.0;
    m.precision_macro += prec;
    m.recall_macro += rec;
    m.f1_macro += f1;
  }
  const auto k = static_cast<double>(num_classes);
  m.precision_macro /= k;
  m.recall_macro /= k;
  m.f1_macro /= k;
  return m;
}

double binary_auroc(std::span<const double> scores, std::span<const int> positives) {
  if (scores.size() != positives.size()) throw ShapeError("auroc: length mismatch");
  const std::size_t n = scores.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  double rank_sum = 0.0, n_pos = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) ++j;
    const double midrank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t t = i; t < j; ++t) {
      if (positives[order[t]] != 0) {
        rank_sum += midrank;
        ++n_pos;
      }
    }
    i = j;
  }
  const double n_neg = static_cast<double>(n) - n_pos;
  if (n_pos == 0 || n_neg == 0) {
    throw DegenerateInputError("AUROC undefined: labels contain a single class");
  }
  return (rank_sum - n_pos * (n_pos + 1.0) / 2.0) / (n_pos * n_neg);
}

double average_precision(std::span<const double> scores, std::span<const int> positives) {
  if (scores.size() != positives.size()) throw ShapeError("average_precision: length mismatch");
  const std::size_t n = scores.size();
  const double total_pos = static_cast<double>(
      std::count_if(positives.begin(), positives.end(), [](int v) { return v != 0; }));
  if (total_pos == 0) throw DegenerateInputError("average precision undefined without positives");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double ap = 0.0, tp = 0.0, seen = 0.0, prev_recall = 0.0;
  for (std::size_t i = 0; i < n;) {
    std::size_t j = i;
    while (j < n && scores[order[j]] == scores[order[i]]) {
      if (positives[order[j]] != 0) ++tp;
      ++seen;
      ++j;
    }
    const double recall = tp / total_pos;
    ap += (recall - prev_recall) * (tp / seen);
    prev_recall = recall;
    i = j;
  }
  return ap;
}

ClassificationMetrics classification_metrics(const NumArray& scores, std::span<const int> labels) {
  if (scores.rank() != 2) throw ShapeError("scores must be [N, C]");
  const std::size_t n = scores.dim(0), classes = scores.dim(1);
  if (n == 0) throw ContractError("metrics need at least one sample");
  if (labels.size() != n) throw ShapeError("score/label count mismatch");
  if (!scores.all_finite()) throw NumericError("scores contain non-finite values");
  check_labels(labels, classes);
  ClassificationMetrics m = label_metrics(argmax_rows(scores), labels, classes);

  double auroc_sum = 0.0, auprc_sum = 0.0;
  std::size_t auroc_n = 0, auprc_n = 0;
  std::vector<double> column(n);
  std::vector<int> positive(n);
  for (std::size_t c = 0; c < classes; ++c) {
    std::size_t pos = 0;
    for (std::size_t i = 0; i < n; ++i) {
      column[i] = scores[i * classes + c];
      positive[i] = static_cast<std::size_t>(labels[i]) == c ? 1 : 0;
      pos += static_cast<std::size_t>(positive[i]);
    }
    if (pos > 0) {
      auprc_sum += average_precision(column, positive);
      ++auprc_n;
    }
    if (pos > 0 && pos < n) {
      auroc_sum += binary_auroc(column, positive);
      ++auroc_n;
    }
  }
  if (auroc_n > 0) m.auroc_ovr = auroc_sum / static_cast<double>(auroc_n);
  if (auprc_n > 0) m.auprc_macro = auprc_sum / static_cast<double>(auprc_n);
  return m;
}

// ----------------------------------------------------------- serialisation

nlohmann::ordered_json to_json(const MetricsReport& report) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  auto opt = [](const std::optional<double>& v) {
    return v ? nlohmann::ordered_json(*v) : nlohmann::ordered_json(nullptr);
  };
  if (report.classification) {
    const auto& c = *report.classification;
    j["classification"] = {{"accuracy", c.accuracy},
                           {"precision_macro", c.precision_macro},
                           {"recall_macro", c.recall_macro},
                           {"f1_macro", c.f1_macro},
                           {"auroc_ovr", opt(c.auroc_ovr)},
                           {"auprc_macro", opt(c.auprc_macro)}};
  }
  if (report.clustering) {
    const auto& c = *report.clustering;
    j["clustering"] = {{"silhouette", c.silhouette}, {"ari", c.ari}, {"nmi", c.nmi}};
  }
  if (report.anomaly) {
    const auto& a = *report.anomaly;
    j["anomaly"] = {{"precision", a.precision}, {"recall", a.recall}, {"f1", a.f1},
                    {"auroc", a.auroc},         {"threshold", a.threshold},
                    {"detector", a.detector}};
  }
  if (!report.notes.empty()) {
    nlohmann::ordered_json notes = nlohmann::ordered_json::object();
    for (const auto& [k, v] : report.notes) notes[k] = v;
    j["notes"] = notes;
  }
  return j;
}

std::string to_csv(const MetricsReport& report) {
  const nlohmann::ordered_json j = to_json(report);
  std::vector<std::string> keys, values;
  for (const auto& [section, body] : j.items()) {
    if (section == "notes") continue;
    for (const auto& [key, value] : body.items()) {
      keys.push_back(section + "." + key);
      if (value.is_null()) {
        values.emplace_back("");
      } else if (value.is_string()) {
        values.push_back(value.get<std::string>());
      } else {
        std::ostringstream ss;
        ss.precision(17);
        ss << value.get<double>();
        values.push_back(ss.str());
      }
    }
  }
  std::string out;
  for (std::size_t i = 0; i < keys.size(); ++i) out += (i ? "," : "") + keys[i];
  out += "\n";
  for (std::size_t i = 0; i < values.size(); ++i) out += (i ? "," : "") + values[i];
  return out + "\n";
}

}  // namespace tfc::eval
