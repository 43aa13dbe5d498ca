#include <algorithm>
#include <cmath>
#include <numbers>
#include <numeric>

#include <Eigen/Dense>

#include "tfc/errors.hpp"
#include "tfc/evaluation.hpp"
#include "tfc/rng.hpp"

namespace tfc::eval {

std::string to_string(Detector d) { return d == Detector::ocsvm ? "ocsvm" : "mahalanobis"; }

Detector parse_detector(const std::string& s) {
  if (s == "ocsvm") return Detector::ocsvm;
  if (s == "mahalanobis") return Detector::mahalanobis;
  throw ConfigError("unknown detector '" + s + "' (expected ocsvm or mahalanobis)");
}

namespace {

using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

Mat to_matrix(const NumArray& a) {
  return Eigen::Map<const Mat>(a.ptr(), static_cast<Eigen::Index>(a.dim(0)),
                               static_cast<Eigen::Index>(a.dim(1)));
}

std::vector<double> mahalanobis(const Mat& train, const Mat& test) {
  const Eigen::RowVectorXd mu = train.colwise().mean();
  const Mat centred = train.rowwise() - mu;
  Mat cov = (centred.transpose() * centred) / static_cast<double>(train.rows());
  const double ridge = std::max(1e-3 * cov.trace() / static_cast<double>(cov.rows()), 1e-12);
  cov.diagonal().array() += ridge;
  const Eigen::LLT<Mat> llt(cov);
  if (llt.info() != Eigen::Success) throw NumericError("covariance factorisation failed");
  const Mat diff = (test.rowwise() - mu).transpose();
  const Mat white = llt.matrixL().solve(diff);
  std::vector<double> out(static_cast<std::size_t>(test.rows()));
  for (Eigen::Index i = 0; i < test.rows(); ++i) {
    out[static_cast<std::size_t>(i)] = white.col(i).norm();
  }
  return out;
}

// Lower nu-quantile of v (the value below which a nu fraction falls).
double quantile(std::vector<double> v, double nu) {
  const auto idx = static_cast<std::size_t>(
      std::floor(nu * static_cast<double>(v.size() - 1)));
  std::nth_element(v.begin(), v.begin() + static_cast<std::ptrdiff_t>(idx), v.end());
  return v[idx];
}

// One-class SVM: random Fourier features approximating an RBF kernel
// (median-heuristic bandwidth), then subgradient descent on
//   0.5|w|^2 + 1/(nu N) sum max(0, rho - w.phi_i) - rho
// with rho refreshed to the nu-quantile of the margins each step.
std::vector<double> ocsvm(const Mat& train, const Mat& test, const AnomalyConfig& cfg) {
  const auto n = static_cast<std::size_t>(train.rows());
  const auto d = static_cast<std::size_t>(train.cols());
  SeededRng rng(cfg.seed);

  std::vector<double> sq;
  const std::size_t m = std::min<std::size_t>(n, 200);
  for (std::size_t i = 0; i < m; ++i) {
    for (std::size_t j = i + 1; j < m; ++j) {
      sq.push_back((train.row(static_cast<Eigen::Index>(i)) -
                    train.row(static_cast<Eigen::Index>(j))).squaredNorm());
    }
  }
  std::nth_element(sq.begin(), sq.begin() + static_cast<std::ptrdiff_t>(sq.size() / 2), sq.end());
  const double median = sq[sq.size() / 2];
  const double gamma = median > 0 ? 1.0 / median : 1.0;

  const std::size_t f = cfg.features;
  Mat w_feat(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(f));
  for (Eigen::Index i = 0; i < w_feat.rows(); ++i) {
    for (Eigen::Index j = 0; j < w_feat.cols(); ++j) {
      w_feat(i, j) = rng.normal(0.0, std::sqrt(2.0 * gamma));
    }
  }
  Eigen::RowVectorXd phase(static_cast<Eigen::Index>(f));
  for (Eigen::Index j = 0; j < phase.size(); ++j) phase(j) = rng.uniform(0.0, 2.0 * std::numbers::pi);
  const double amp = std::sqrt(2.0 / static_cast<double>(f));
  auto features = [&](const Mat& x) {
    Mat proj = x * w_feat;
    proj.rowwise() += phase;
    return Mat(amp * proj.array().cos());
  };
  const Mat phi = features(train);

  Eigen::VectorXd w = phi.colwise().mean().transpose();
  const double coef = 1.0 / (cfg.nu * static_cast<double>(n));
  double rho = 0.0;
  std::vector<double> margins(n);
  for (std::size_t t = 0; t < cfg.iterations; ++t) {
    const Eigen::VectorXd s = phi * w;
    margins.assign(s.data(), s.data() + n);
    rho = quantile(margins, cfg.nu);
    Eigen::VectorXd g = w;
    for (std::size_t i = 0; i < n; ++i) {
      if (margins[i] < rho) g -= coef * phi.row(static_cast<Eigen::Index>(i)).transpose();
    }
    w -= (cfg.step / std::sqrt(static_cast<double>(t) + 1.0)) * g;
  }
  const Eigen::VectorXd s = phi * w;
  margins.assign(s.data(), s.data() + n);
  rho = quantile(margins, cfg.nu);

  const Eigen::VectorXd test_margin = features(test) * w;
  std::vector<double> out(static_cast<std::size_t>(test.rows()));
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = rho - test_margin(static_cast<Eigen::Index>(i));
  return out;
}

}  // namespace

std::vector<double> anomaly_scores(const NumArray& train_normals, const NumArray& test,
                                   const AnomalyConfig& cfg) {
  if (train_normals.rank() != 2 || test.rank() != 2) throw ShapeError("anomaly inputs must be [N, D]");
  if (train_normals.dim(1) != test.dim(1)) {
    throw ShapeError("anomaly: train has D=" + std::to_string(train_normals.dim(1)) +
                     " but test has D=" + std::to_string(test.dim(1)));
  }
  if (train_normals.dim(0) < 10) throw ContractError("anomaly detection needs >= 10 normal samples");
  if (!(cfg.nu > 0.0 && cfg.nu < 1.0)) throw ConfigError("anomaly nu must lie in (0, 1)");
  if (!train_normals.all_finite() || !test.all_finite()) {
    throw NumericError("anomaly inputs contain non-finite values");
  }
  Mat train = to_matrix(train_normals);
  Mat probe = to_matrix(test);
  if (cfg.detector == Detector::mahalanobis) return mahalanobis(train, probe);
  if (cfg.features == 0 || cfg.iterations == 0) {
    throw ConfigError("ocsvm needs features > 0 and iterations > 0");
  }
  const Eigen::RowVectorXd mu = train.colwise().mean();
  Eigen::RowVectorXd sd = ((train.rowwise() - mu).array().square().colwise().mean()).sqrt();
  for (Eigen::Index j = 0; j < sd.size(); ++j) {
    if (sd(j) < 1e-12) sd(j) = 1.0;
  }
  train = ((train.rowwise() - mu).array().rowwise() / sd.array()).matrix();
  probe = ((probe.rowwise() - mu).array().rowwise() / sd.array()).matrix();
  return ocsvm(train, probe, cfg);
}

double best_f1_threshold(std::span<const double> scores, std::span<const int> outliers) {
  if (scores.size() != outliers.size()) throw ShapeError("threshold: length mismatch");
  const double total_pos = static_cast<double>(
      std::count_if(outliers.begin(), outliers.end(), [](int v) { return v != 0; }));
  if (total_pos == 0) throw DegenerateInputError("threshold selection needs at least one outlier");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  double best_f1 = -1.0, best = scores[order.front()];
  double tp = 0.0, flagged = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) {
      if (outliers[order[j]] != 0) ++tp;
      ++flagged;
      ++j;
    }
    const double f1 = 2.0 * tp / (flagged + total_pos);
    if (f1 > best_f1) {
      best_f1 = f1;
      best = scores[order[i]];
    }
    i = j;
  }
  return best;
}

AnomalyMetrics anomaly_metrics(std::span<const double> scores, std::span<const int> outliers,
                               double threshold) {
  if (scores.size() != outliers.size()) throw ShapeError("anomaly metrics: length mismatch");
  AnomalyMetrics m;
  m.auroc = binary_auroc(scores, outliers);
  double tp = 0, fp = 0, fn = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool flag = scores[i] >= threshold;
    const bool pos = outliers[i] != 0;
    if (flag && pos) ++tp;
    if (flag && !pos) ++fp;
    if (!flag && pos) ++fn;
  }
  m.precision = tp + fp > 0 ? tp / (tp + fp) : 0.0;
  m.recall = tp + fn > 0 ? tp / (tp + fn) : 0.0;
  m.f1 = m.precision + m.recall > 0 ? 2 * m.precision * m.recall / (m.precision + m.recall) : 0.0;
  m.threshold = threshold;
  return m;
}

}  // namespace tfc::eval
