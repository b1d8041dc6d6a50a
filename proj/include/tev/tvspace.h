// tev/tvspace.h

// Copyright 2026  The tevkit Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#ifndef TEV_TVSPACE_H_
#define TEV_TVSPACE_H_

#include <string>
#include <vector>

#include "tev/common.h"
#include "tev/gmm.h"

namespace tev {

enum class VectorKind { kIvector, kDvector };

/// Fixed-length utterance representation.
struct SpeakerVector {
  Vector values;
  VectorKind kind = VectorKind::kIvector;
  std::string utt_id;
};

std::string VectorKindName(VectorKind k);
VectorKind ParseVectorKind(const std::string &name);

/// Total-variability model. T is stored as a (C*D) x R matrix whose c-th
/// D-row block is T_c. Statistics are centered around the UBM means, so
/// extraction has no mean-offset term.
class TotalVariabilityModel {
 public:
  TotalVariabilityModel() = default;
  TotalVariabilityModel(DiagGmm ubm, Matrix t);

  const DiagGmm &ubm() const { return ubm_; }
  const Matrix &t() const { return t_; }
  Eigen::Index IvectorDim() const { return t_.cols(); }
  Eigen::Index NumComponents() const { return ubm_.NumComponents(); }
  Eigen::Index FeatDim() const { return ubm_.Dim(); }

  /// Precision of the i-vector posterior: I + sum_c N_c T_c' Sigma_c^-1 T_c.
  Matrix PosteriorPrecision(const Vector &zeroth) const;
  /// T' Sigma^-1 F.
  Vector LinearTerm(const Matrix &first) const;

 private:
  void Precompute();

  DiagGmm ubm_;
  Matrix t_;
  Matrix sigma_inv_t_;                  // Sigma^-1 T, (C*D) x R
  std::vector<Matrix> component_terms_;  // T_c' Sigma_c^-1 T_c, R x R
};

/// Entries N(0,1) * 0.1 * mean(sigma). Throws InvalidArgument when R > C*D.
TotalVariabilityModel InitTmatrix(const DiagGmm &ubm, Eigen::Index ivector_dim, std::uint64_t seed);

/// Posterior mean of the latent factor; throws NumericError on non-finite
/// stats or a non-SPD precision.
SpeakerVector ExtractIvector(const TotalVariabilityModel &model, const BaumWelchStats &stats,
                             const std::string &utt_id = "");

struct TmatrixTrace {
  std::vector<double> objective;  // per-iteration auxiliary objective, summed over utterances
};

/// EM re-estimation of T over per-utterance stats. The objective recorded
/// for an iteration is that of the model entering it.
TotalVariabilityModel TrainTmatrix(const TotalVariabilityModel &model,
                                   const std::vector<BaumWelchStats> &stats, int n_iters,
                                   TmatrixTrace *trace = nullptr, int threads = 1);

/// sum_i 0.5 b_i' L_i^-1 b_i - 0.5 log|L_i|: the T-dependent part of the
/// marginal log-likelihood of the statistics.
double TmatrixObjective(const TotalVariabilityModel &model, const std::vector<BaumWelchStats> &stats);

}  // namespace tev

#endif  // TEV_TVSPACE_H_
