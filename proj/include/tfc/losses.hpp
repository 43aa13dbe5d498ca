#pragma once

#include <span>
#include <string>

#include "tfc/autodiff.hpp"
#include "tfc/embeddings.hpp"

namespace tfc::loss {

enum class ConsistencyVariant {
  tfc,   // triplet-style time/frequency consistency on z
  tt_c,  // d(z_t, z_t_aug) in place of the consistency term
  ff_c,  // d(z_f, z_f_aug)
  none,
};
enum class Reduction { mean, sum };

std::string to_string(ConsistencyVariant v);
ConsistencyVariant parse_consistency(const std::string& s);
std::string to_string(Reduction r);
Reduction parse_reduction(const std::string& s);

struct LossConfig {
  double tau = 0.2;
  double delta = 1.0;
  double lambda = 0.5;
  bool hinge_consistency = false;
  ConsistencyVariant consistency = ConsistencyVariant::tfc;
  // Keep each anchor's own positive in the NT-Xent denominator.
  bool include_positive = true;
  bool use_time_loss = true;
  bool use_freq_loss = true;
  Reduction reduction = Reduction::mean;

  void validate() const;
  // True when the consistency term contributes to the total.
  bool consistency_active() const noexcept;
};

// Per-row NT-Xent of anchors[i] against positives[i], with every other row of
// {anchors} u {positives} (the anchor itself excluded) as the denominator set.
// Returns [B]. Throws ContractError for B < 2, DegenerateInputError for a
// zero row.
ad::Var nt_xent_per_sample(const ad::Var& anchors, const ad::Var& positives, double tau,
                           bool include_positive = true);
ad::Var nt_xent(const ad::Var& anchors, const ad::Var& positives, double tau,
                bool include_positive = true, Reduction reduction = Reduction::mean);
// Mean of both anchor directions.
ad::Var nt_xent_symmetric(const ad::Var& a, const ad::Var& b, double tau,
                          bool include_positive = true);

// NT-Xent on the encoder outputs (h_t vs h_t_aug, h_f vs h_f_aug).
ad::Var time_loss(const BatchEmbeddings& batch, const LossConfig& cfg);
ad::Var freq_loss(const BatchEmbeddings& batch, const LossConfig& cfg);

// Per row: sum over the three mixed pairs of (S_TF - S_pair + delta), each
// S an NT-Xent over the batch on the projections; optionally hinged at zero.
ad::Var consistency_loss(const BatchEmbeddings& batch, const LossConfig& cfg);

struct LossTerms {
  ad::Var time;         // null when not evaluated
  ad::Var freq;
  ad::Var consistency;  // holds the tt_c / ff_c term for those variants
  ad::Var total;
};

// lambda * (time + freq) + (1 - lambda) * consistency; null terms count as 0.
ad::Var weighted_total(const ad::Var& time, const ad::Var& freq, const ad::Var& consistency,
                       double lambda);

LossTerms total_pretrain_loss(const BatchEmbeddings& batch, const LossConfig& cfg);

// Softmax cross-entropy averaged over the batch. logits [B, C].
ad::Var cross_entropy(const ad::Var& logits, std::span<const int> labels);

}  // namespace tfc::loss
