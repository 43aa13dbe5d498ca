#include "tfc/losses.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

#include "tfc/errors.hpp"

namespace tfc::loss {

std::string to_string(ConsistencyVariant v) {
  switch (v) {
    case ConsistencyVariant::tfc: return "tfc";
    case ConsistencyVariant::tt_c: return "tt_c";
    case ConsistencyVariant::ff_c: return "ff_c";
    case ConsistencyVariant::none: return "none";
  }
  return "?";
}

ConsistencyVariant parse_consistency(const std::string& s) {
  for (auto v : {ConsistencyVariant::tfc, ConsistencyVariant::tt_c, ConsistencyVariant::ff_c,
                 ConsistencyVariant::none}) {
    if (to_string(v) == s) return v;
  }
  throw ConfigError("unknown consistency variant '" + s + "' (expected tfc, tt_c, ff_c, none)");
}

std::string to_string(Reduction r) { return r == Reduction::mean ? "mean" : "sum"; }

Reduction parse_reduction(const std::string& s) {
  if (s == "mean") return Reduction::mean;
  if (s == "sum") return Reduction::sum;
  throw ConfigError("unknown reduction '" + s + "' (expected mean, sum)");
}

void LossConfig::validate() const {
  if (!(tau > 0.0)) throw ConfigError("loss.tau must be > 0");
  if (!(delta >= 0.0)) throw ConfigError("loss.delta must be >= 0");
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ConfigError("loss.lambda must lie in [0, 1]");
  if (!use_time_loss && !use_freq_loss && !consistency_active()) {
    throw ConfigError("loss configuration leaves no active term");
  }
}

bool LossConfig::consistency_active() const noexcept {
  return consistency != ConsistencyVariant::none && lambda < 1.0;
}

// ------------------------------------------------------------------ NT-Xent

ad::Var nt_xent_per_sample(const ad::Var& anchors, const ad::Var& positives, double tau,
                           bool include_positive) {
  const NumArray& a = anchors->value;
  const NumArray& p = positives->value;
  if (a.rank() != 2 || a.shape() != p.shape()) {
    throw ShapeError("nt_xent: anchors " + shape_to_string(a.shape()) + " and positives " +
                     shape_to_string(p.shape()) + " must be equal [B, D]");
  }
  const std::size_t batch = a.dim(0), d = a.dim(1);
  if (batch < 2) throw ContractError("nt_xent needs a batch of at least 2");
  if (!(tau > 0.0)) throw ContractError("nt_xent: tau must be > 0");
  const std::size_t rows = 2 * batch;

  // Unit rows: 0..B-1 anchors, B..2B-1 positives.
  std::vector<double> unit(rows * d), norms(rows);
  for (std::size_t r = 0; r < rows; ++r) {
    const double* src = r < batch ? a.ptr() + r * d : p.ptr() + (r - batch) * d;
    double sq = 0.0;
    for (std::size_t k = 0; k < d; ++k) sq += src[k] * src[k];
    const double n = std::sqrt(sq);
    if (n == 0.0) throw DegenerateInputError("nt_xent: zero-norm embedding row " + std::to_string(r));
    norms[r] = n;
    for (std::size_t k = 0; k < d; ++k) unit[r * d + k] = src[k] / n;
  }

  // coeff[i][j] = d loss_i / d logit_ij, logit_ij = <u_i, u_j> / tau.
  std::vector<double> coeff(batch * rows, 0.0);
  NumArray losses(Shape{batch});
  std::vector<double> logits(rows);
  for (std::size_t i = 0; i < batch; ++i) {
    const std::size_t pos = batch + i;
    double peak = -INFINITY;
    for (std::size_t j = 0; j < rows; ++j) {
      double s = 0.0;
      for (std::size_t k = 0; k < d; ++k) s += unit[i * d + k] * unit[j * d + k];
      logits[j] = s / tau;
      const bool in_denominator = j != i && (include_positive || j != pos);
      if (in_denominator) peak = std::max(peak, logits[j]);
    }
    double denom = 0.0;
    for (std::size_t j = 0; j < rows; ++j) {
      if (j == i || (!include_positive && j == pos)) continue;
      denom += std::exp(logits[j] - peak);
    }
    losses[i] = -logits[pos] + peak + std::log(denom);
    for (std::size_t j = 0; j < rows; ++j) {
      if (j == i || (!include_positive && j == pos)) continue;
      coeff[i * rows + j] = std::exp(logits[j] - peak) / denom;
    }
    coeff[i * rows + pos] -= 1.0;
  }

  return ad::make_op(std::move(losses), {anchors, positives}, ad::OpTag::fused,
                     [=, unit = std::move(unit), norms = std::move(norms),
                      coeff = std::move(coeff)](ad::Node& self) {
    std::vector<double> du(rows * d, 0.0);
    for (std::size_t i = 0; i < batch; ++i) {
      const double g = self.grad[i] / tau;
      if (g == 0.0) continue;
      for (std::size_t j = 0; j < rows; ++j) {
        const double c = g * coeff[i * rows + j];
        if (c == 0.0) continue;
        for (std::size_t k = 0; k < d; ++k) {
          du[i * d + k] += c * unit[j * d + k];
          du[j * d + k] += c * unit[i * d + k];
        }
      }
    }
    // Back through the row normalisation: dx = (du - u <u, du>) / |x|.
    for (std::size_t r = 0; r < rows; ++r) {
      const ad::Var& target = r < batch ? self.parents[0] : self.parents[1];
      if (!target->requires_grad) continue;
      const double* u = unit.data() + r * d;
      const double* g = du.data() + r * d;
      double proj = 0.0;
      for (std::size_t k = 0; k < d; ++k) proj += u[k] * g[k];
      double* out = target->grad.ptr() + (r % batch) * d;
      for (std::size_t k = 0; k < d; ++k) out[k] += (g[k] - u[k] * proj) / norms[r];
    }
  });
}

namespace {

ad::Var reduce(const ad::Var& per_sample, Reduction reduction) {
  return reduction == Reduction::mean ? ad::mean(per_sample) : ad::sum(per_sample);
}

const ad::Var& need(const ad::Var& v, const char* what) {
  if (!v) throw ContractError(std::string("loss needs embedding ") + what);
  return v;
}

}  // namespace

ad::Var nt_xent(const ad::Var& anchors, const ad::Var& positives, double tau,
                bool include_positive, Reduction reduction) {
  return reduce(nt_xent_per_sample(anchors, positives, tau, include_positive), reduction);
}

ad::Var nt_xent_symmetric(const ad::Var& a, const ad::Var& b, double tau,
                          bool include_positive) {
  return ad::scale(ad::add(nt_xent(a, b, tau, include_positive),
                           nt_xent(b, a, tau, include_positive)),
                   0.5);
}

ad::Var time_loss(const BatchEmbeddings& batch, const LossConfig& cfg) {
  return nt_xent(need(batch.h_t, "h_t"), need(batch.h_t_aug, "h_t_aug"), cfg.tau,
                 cfg.include_positive, cfg.reduction);
}

ad::Var freq_loss(const BatchEmbeddings& batch, const LossConfig& cfg) {
  return nt_xent(need(batch.h_f, "h_f"), need(batch.h_f_aug, "h_f_aug"), cfg.tau,
                 cfg.include_positive, cfg.reduction);
}

ad::Var consistency_loss(const BatchEmbeddings& batch, const LossConfig& cfg) {
  auto s = [&](const ad::Var& t, const ad::Var& f) {
    return nt_xent_per_sample(t, f, cfg.tau, cfg.include_positive);
  };
  const ad::Var& zt = need(batch.z_t, "z_t");
  const ad::Var& zta = need(batch.z_t_aug, "z_t_aug");
  const ad::Var& zf = need(batch.z_f, "z_f");
  const ad::Var& zfa = need(batch.z_f_aug, "z_f_aug");
  const ad::Var s_tf = s(zt, zf);
  ad::Var per_sample;
  for (const ad::Var& pair : {s(zt, zfa), s(zta, zf), s(zta, zfa)}) {
    ad::Var term = ad::add_scalar(ad::sub(s_tf, pair), cfg.delta);
    if (cfg.hinge_consistency) term = ad::relu(term);
    per_sample = per_sample ? ad::add(per_sample, term) : term;
  }
  return reduce(per_sample, cfg.reduction);
}

ad::Var weighted_total(const ad::Var& time, const ad::Var& freq, const ad::Var& consistency,
                       double lambda) {
  ad::Var contrastive;
  if (time && freq) {
    contrastive = ad::add(time, freq);
  } else {
    contrastive = time ? time : freq;
  }
  ad::Var total;
  if (contrastive) total = ad::scale(contrastive, lambda);
  if (consistency) {
    ad::Var c = ad::scale(consistency, 1.0 - lambda);
    total = total ? ad::add(total, c) : c;
  }
  if (!total) throw ContractError("weighted_total: no loss terms");
  return total;
}

LossTerms total_pretrain_loss(const BatchEmbeddings& batch, const LossConfig& cfg) {
  cfg.validate();
  LossTerms terms;
  if (cfg.use_time_loss) terms.time = time_loss(batch, cfg);
  if (cfg.use_freq_loss) terms.freq = freq_loss(batch, cfg);
  if (cfg.consistency_active()) {
    switch (cfg.consistency) {
      case ConsistencyVariant::tfc:
        terms.consistency = consistency_loss(batch, cfg);
        break;
      case ConsistencyVariant::tt_c:
        terms.consistency = nt_xent(need(batch.z_t, "z_t"), need(batch.z_t_aug, "z_t_aug"),
                                    cfg.tau, cfg.include_positive, cfg.reduction);
        break;
      case ConsistencyVariant::ff_c:
        terms.consistency = nt_xent(need(batch.z_f, "z_f"), need(batch.z_f_aug, "z_f_aug"),
                                    cfg.tau, cfg.include_positive, cfg.reduction);
        break;
      case ConsistencyVariant::none:
        break;
    }
  }
  terms.total = weighted_total(terms.time, terms.freq, terms.consistency, cfg.lambda);
  return terms;
}

// ------------------------------------------------------------ cross-entropy

ad::Var cross_entropy(const ad::Var& logits, std::span<const int> labels) {
  const NumArray& z = logits->value;
  if (z.rank() != 2) throw ShapeError("cross_entropy: logits must be [B, C]");
  const std::size_t batch = z.dim(0), classes = z.dim(1);
  if (labels.size() != batch) throw ShapeError("cross_entropy: label count mismatch");
  if (batch == 0) throw ContractError("cross_entropy: empty batch");
  std::vector<double> probs(batch * classes);
  double total = 0.0;
  for (std::size_t i = 0; i < batch; ++i) {
    const int y = labels[i];
    if (y < 0 || static_cast<std::size_t>(y) >= classes) {
      throw ContractError("cross_entropy: label " + std::to_string(y) + " outside [0, " +
                          std::to_string(classes) + ")");
    }
    const double* row = z.ptr() + i * classes;
    const double peak = *std::max_element(row, row + classes);
    double denom = 0.0;
    for (std::size_t c = 0; c < classes; ++c) denom += std::exp(row[c] - peak);
    for (std::size_t c = 0; c < classes; ++c) {
      probs[i * classes + c] = std::exp(row[c] - peak) / denom;
    }
    total += peak + std::log(denom) - row[y];
  }
  const double inv = 1.0 / static_cast<double>(batch);
  std::vector<int> ys(labels.begin(), labels.end());
  return ad::make_op(NumArray(Shape{1}, total * inv), {logits}, ad::OpTag::fused,
                     [=, probs = std::move(probs), ys = std::move(ys)](ad::Node& self) {
    const double g = self.grad[0] * inv;
    double* dz = self.parents[0]->grad.ptr();
    for (std::size_t i = 0; i < batch; ++i) {
      for (std::size_t c = 0; c < classes; ++c) {
        const double onehot = static_cast<std::size_t>(ys[i]) == c ? 1.0 : 0.0;
        dz[i * classes + c] += g * (probs[i * classes + c] - onehot);
      }
    }
  });
}

}  // namespace tfc::loss
