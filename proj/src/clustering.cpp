#include <algorithm>
#include <cmath>
#include <limits>
#include <map>

#include "tfc/errors.hpp"
#include "tfc/evaluation.hpp"
#include "tfc/parallel.hpp"
#include "tfc/rng.hpp"

namespace tfc::eval {

namespace {

double sq_dist(const double* a, const double* b, std::size_t d) {
  double s = 0.0;
  for (std::size_t j = 0; j < d; ++j) {
    const double t = a[j] - b[j];
    s += t * t;
  }
  return s;
}

struct Restart {
  std::vector<int> assignments;
  std::vector<double> centers;
  double inertia = 0.0;
  std::vector<double> trace;
};

std::vector<double> kmeanspp_init(const NumArray& pts, std::size_t k, SeededRng& rng) {
  const std::size_t n = pts.dim(0), d = pts.dim(1);
  std::vector<double> centers;
  centers.reserve(k * d);
  auto push = [&](std::size_t i) {
    centers.insert(centers.end(), pts.ptr() + i * d, pts.ptr() + (i + 1) * d);
  };
  push(static_cast<std::size_t>(rng.below(n)));
  std::vector<double> closest(n);
  for (std::size_t i = 0; i < n; ++i) closest[i] = sq_dist(pts.ptr() + i * d, centers.data(), d);
  for (std::size_t c = 1; c < k; ++c) {
    double total = 0.0;
    for (double v : closest) total += v;
    std::size_t pick = n - 1;
    if (total <= 0.0) {
      pick = static_cast<std::size_t>(rng.below(n));
    } else {
      const double target = rng.uniform() * total;
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        acc += closest[i];
        if (acc > target && closest[i] > 0.0) {
          pick = i;
          break;
        }
      }
    }
    push(pick);
    const double* fresh = centers.data() + c * d;
    for (std::size_t i = 0; i < n; ++i) {
      closest[i] = std::min(closest[i], sq_dist(pts.ptr() + i * d, fresh, d));
    }
  }
  return centers;
}

Restart lloyd(const NumArray& pts, std::size_t k, std::uint64_t seed, std::size_t restart,
              std::size_t max_iterations) {
  const std::size_t n = pts.dim(0), d = pts.dim(1);
  SeededRng rng = SeededRng::derive(seed, restart);
  Restart r;
  r.centers = kmeanspp_init(pts, k, rng);
  r.assignments.assign(n, -1);
  std::vector<double> sums(k * d);
  std::vector<std::size_t> counts(k);
  for (std::size_t it = 0; it < max_iterations; ++it) {
    bool changed = false;
    double inertia = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      const double* p = pts.ptr() + i * d;
      int best = 0;
      double best_d = std::numeric_limits<double>::infinity();
      for (std::size_t c = 0; c < k; ++c) {
        const double dist = sq_dist(p, r.centers.data() + c * d, d);
        if (dist < best_d) {
          best_d = dist;
          best = static_cast<int>(c);
        }
      }
      inertia += best_d;
      if (r.assignments[i] != best) {
        r.assignments[i] = best;
        changed = true;
      }
    }
    r.trace.push_back(inertia);
    r.inertia = inertia;
    if (!changed) break;
    std::fill(sums.begin(), sums.end(), 0.0);
    std::fill(counts.begin(), counts.end(), 0);
    for (std::size_t i = 0; i < n; ++i) {
      const auto c = static_cast<std::size_t>(r.assignments[i]);
      ++counts[c];
      for (std::size_t j = 0; j < d; ++j) sums[c * d + j] += pts[i * d + j];
    }
    for (std::size_t c = 0; c < k; ++c) {
      if (counts[c] == 0) continue;  // empty cluster keeps its centre
      for (std::size_t j = 0; j < d; ++j) {
        r.centers[c * d + j] = sums[c * d + j] / static_cast<double>(counts[c]);
      }
    }
  }
  return r;
}

// Maps arbitrary integer labels to 0..m-1 in order of first appearance.
std::vector<std::size_t> compact(std::span<const int> labels, std::size_t& count) {
  std::map<int, std::size_t> ids;
  std::vector<std::size_t> out(labels.size());
  for (std::size_t i = 0; i < labels.size(); ++i) {
    auto [it, inserted] = ids.try_emplace(labels[i], ids.size());
    out[i] = it->second;
  }
  count = ids.size();
  return out;
}

struct Contingency {
  std::size_t ra = 0, rb = 0;
  std::vector<double> table, row, col;
  double n = 0.0;
};

Contingency contingency(std::span<const int> a, std::span<const int> b) {
  if (a.size() != b.size()) throw ShapeError("label vectors differ in length");
  if (a.empty()) throw ContractError("partition comparison needs at least one item");
  Contingency c;
  const auto ia = compact(a, c.ra);
  const auto ib = compact(b, c.rb);
  c.table.assign(c.ra * c.rb, 0.0);
  c.row.assign(c.ra, 0.0);
  c.col.assign(c.rb, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    c.table[ia[i] * c.rb + ib[i]] += 1.0;
    c.row[ia[i]] += 1.0;
    c.col[ib[i]] += 1.0;
  }
  c.n = static_cast<double>(a.size());
  return c;
}

double comb2(double x) { return x * (x - 1.0) / 2.0; }

double entropy(const std::vector<double>& counts, double n) {
  double h = 0.0;
  for (double v : counts) {
    if (v > 0) h -= (v / n) * std::log(v / n);
  }
  return h;
}

}  // namespace

KMeansResult kmeans(const NumArray& points, std::size_t k, std::uint64_t seed,
                    const KMeansOptions& options) {
  if (points.rank() != 2) throw ShapeError("kmeans expects [N, D] points");
  const std::size_t n = points.dim(0);
  if (k < 2) throw ContractError("kmeans needs k >= 2");
  if (k > n) {
    throw ContractError("kmeans: k=" + std::to_string(k) + " exceeds N=" + std::to_string(n));
  }
  if (options.restarts == 0 || options.max_iterations == 0) {
    throw ContractError("kmeans needs at least one restart and one iteration");
  }
  if (!points.all_finite()) throw NumericError("kmeans input contains non-finite values");
  std::vector<Restart> runs(options.restarts);
  parallel_for(options.restarts, options.threads, [&](std::size_t r) {
    runs[r] = lloyd(points, k, seed, r, options.max_iterations);
  });
  std::size_t best = 0;
  for (std::size_t r = 1; r < runs.size(); ++r) {
    if (runs[r].inertia < runs[best].inertia) best = r;
  }
  KMeansResult out;
  out.assignments = runs[best].assignments;
  out.centers = NumArray({k, points.dim(1)}, runs[best].centers);
  out.inertia = runs[best].inertia;
  for (auto& r : runs) out.inertia_traces.push_back(std::move(r.trace));
  return out;
}

double silhouette_score(const NumArray& points, std::span<const int> assignments) {
  if (points.rank() != 2) throw ShapeError("silhouette expects [N, D] points");
  const std::size_t n = points.dim(0), d = points.dim(1);
  if (assignments.size() != n) throw ShapeError("silhouette: assignment count mismatch");
  std::size_t m = 0;
  const auto ids = compact(assignments, m);
  if (m < 2 || m >= n) {
    throw DegenerateInputError("silhouette needs between 2 and N-1 clusters, got " +
                               std::to_string(m));
  }
  std::vector<double> sizes(m, 0.0);
  for (auto c : ids) sizes[c] += 1.0;
  double total = 0.0;
  std::vector<double> dist_sum(m);
  for (std::size_t i = 0; i < n; ++i) {
    std::fill(dist_sum.begin(), dist_sum.end(), 0.0);
    for (std::size_t j = 0; j < n; ++j) {
      if (j == i) continue;
      dist_sum[ids[j]] += std::sqrt(sq_dist(points.ptr() + i * d, points.ptr() + j * d, d));
    }
    const std::size_t own = ids[i];
    if (sizes[own] <= 1.0) continue;  // singleton contributes 0
    const double a = dist_sum[own] / (sizes[own] - 1.0);
    double b = std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < m; ++c) {
      if (c != own) b = std::min(b, dist_sum[c] / sizes[c]);
    }
    const double denom = std::max(a, b);
    if (denom > 0.0) total += (b - a) / denom;
  }
  return total / static_cast<double>(n);
}

double adjusted_rand_index(std::span<const int> a, std::span<const int> b) {
  const Contingency c = contingency(a, b);
  double index = 0.0, sum_a = 0.0, sum_b = 0.0;
  for (double v : c.table) index += comb2(v);
  for (double v : c.row) sum_a += comb2(v);
  for (double v : c.col) sum_b += comb2(v);
  const double total = comb2(c.n);
  const double expected = total > 0 ? sum_a * sum_b / total : 0.0;
  const double max_index = 0.5 * (sum_a + sum_b);
  if (max_index == expected) return 1.0;  // both partitions trivial and equal in structure
  return (index - expected) / (max_index - expected);
}

double normalized_mutual_info(std::span<const int> a, std::span<const int> b) {
  const Contingency c = contingency(a, b);
  const double ha = entropy(c.row, c.n);
  const double hb = entropy(c.col, c.n);
  if (ha == 0.0 && hb == 0.0) return 1.0;
  double mi = 0.0;
  for (std::size_t i = 0; i < c.ra; ++i) {
    for (std::size_t j = 0; j < c.rb; ++j) {
      const double v = c.table[i * c.rb + j];
      if (v > 0) mi += (v / c.n) * std::log(v * c.n / (c.row[i] * c.col[j]));
    }
  }
  return std::clamp(mi / (0.5 * (ha + hb)), 0.0, 1.0);
}

ClusteringMetrics clustering_metrics(std::span<const int> assignments, std::span<const int> labels,
                                     const NumArray& embeddings) {
  ClusteringMetrics m;
  m.silhouette = silhouette_score(embeddings, assignments);
  m.ari = adjusted_rand_index(assignments, labels);
  m.nmi = normalized_mutual_info(assignments, labels);
  return m;
}

}  // namespace tfc::eval
