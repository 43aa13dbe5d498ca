#pragma once

#include <cstddef>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "tfc/tensor.hpp"

namespace tfc::eval {

struct ClassificationMetrics {
  double accuracy = 0.0;
  double precision_macro = 0.0;
  double recall_macro = 0.0;
  double f1_macro = 0.0;
  // Unset when no class has both positives and negatives.
  std::optional<double> auroc_ovr;
  std::optional<double> auprc_macro;
};

struct ClusteringMetrics {
  double silhouette = 0.0;
  double ari = 0.0;
  double nmi = 0.0;
};

struct AnomalyMetrics {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double auroc = 0.0;
  double threshold = 0.0;
  std::string detector;
};

struct MetricsReport {
  std::optional<ClassificationMetrics> classification;
  std::optional<ClusteringMetrics> clustering;
  std::optional<AnomalyMetrics> anomaly;
  // Free-form provenance (detector defaults, split sizes, ...).
  std::map<std::string, std::string> notes;
};

nlohmann::ordered_json to_json(const MetricsReport& report);
// Two lines: dotted keys, then values.
std::string to_csv(const MetricsReport& report);

// ---------------------------------------------------------- classification

std::vector<int> argmax_rows(const NumArray& scores);

// scores [N, C]. Predictions are row argmaxes (first index on ties).
// Macro averages run over all C classes; empty denominators count as 0.
// AUROC is one-vs-rest with midranks for ties, averaged over classes that have
// both positives and negatives; AUPRC is non-interpolated average precision
// averaged over classes with at least one positive.
ClassificationMetrics classification_metrics(const NumArray& scores, std::span<const int> labels);

// Same metrics from hard predictions only (no ranking metrics).
ClassificationMetrics label_metrics(std::span<const int> predictions, std::span<const int> labels,
                                    std::size_t num_classes);

// positives[i] != 0 marks the positive class. Throws DegenerateInputError if
// either class is absent.
double binary_auroc(std::span<const double> scores, std::span<const int> positives);
double average_precision(std::span<const double> scores, std::span<const int> positives);

// -------------------------------------------------------------- clustering

struct KMeansOptions {
  std::size_t max_iterations = 50;
  std::size_t restarts = 10;
  std::size_t threads = 1;
};

struct KMeansResult {
  std::vector<int> assignments;
  NumArray centers;  // [k, D]
  double inertia = 0.0;
  // Inertia after each assignment step of every restart.
  std::vector<std::vector<double>> inertia_traces;
};

// points [N, D]. Seeded k-means++ initialisation, Lloyd iterations, best of
// `restarts` by inertia. Throws ContractError unless 2 <= k <= N.
KMeansResult kmeans(const NumArray& points, std::size_t k, std::uint64_t seed,
                    const KMeansOptions& options = {});

double silhouette_score(const NumArray& points, std::span<const int> assignments);
double adjusted_rand_index(std::span<const int> a, std::span<const int> b);
// Arithmetic-mean normalisation.
double normalized_mutual_info(std::span<const int> a, std::span<const int> b);

ClusteringMetrics clustering_metrics(std::span<const int> assignments, std::span<const int> labels,
                                     const NumArray& embeddings);

// ---------------------------------------------------------------- anomaly

enum class Detector { ocsvm, mahalanobis };
std::string to_string(Detector d);
Detector parse_detector(const std::string& s);

struct AnomalyConfig {
  Detector detector = Detector::ocsvm;
  double nu = 0.1;
  std::size_t features = 512;  // random Fourier features for the one-class SVM
  std::size_t iterations = 400;
  double step = 1.0;
  std::uint64_t seed = 0;
};

// Higher score = more anomalous. train_normals [N, D] with N >= 10; test [M, D].
std::vector<double> anomaly_scores(const NumArray& train_normals, const NumArray& test,
                                   const AnomalyConfig& cfg);

// Threshold on `scores` (flag when score >= threshold) maximising outlier F1.
double best_f1_threshold(std::span<const double> scores, std::span<const int> outliers);

// outliers[i] != 0 marks an outlier. Throws DegenerateInputError when the
// labels contain a single class.
AnomalyMetrics anomaly_metrics(std::span<const double> scores, std::span<const int> outliers,
                               double threshold);

}  // namespace tfc::eval
