#pragma once

#include "tfc/autodiff.hpp"

namespace tfc {

// The eight per-row embeddings of a batch, each [rows, D]. h_* come straight
// from the encoders, z_* from the projectors. Entries the current loss does
// not need may be null.
struct BatchEmbeddings {
  ad::Var h_t, h_t_aug, h_f, h_f_aug;
  ad::Var z_t, z_t_aug, z_f, z_f_aug;
};

}  // namespace tfc
