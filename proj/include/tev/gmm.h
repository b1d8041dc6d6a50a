// tev/gmm.h

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

#ifndef TEV_GMM_H_
#define TEV_GMM_H_

#include <vector>

#include "tev/common.h"
#include "tev/dsp.h"

namespace tev {

/// Diagonal-covariance Gaussian mixture; used as the UBM.
class DiagGmm {
 public:
  DiagGmm() = default;
  DiagGmm(Vector weights, Matrix means, Matrix variances);

  Eigen::Index NumComponents() const { return weights_.size(); }
  Eigen::Index Dim() const { return means_.cols(); }

  const Vector &weights() const { return weights_; }
  const Matrix &means() const { return means_; }          // C x D
  const Matrix &variances() const { return variances_; }  // C x D

  /// frames x C matrix of log(w_c N(x_t; mu_c, var_c)).
  Matrix ComponentLogLikes(const Eigen::Ref<const Matrix> &frames) const;
  /// Per-frame responsibilities, frames x C, computed with log-sum-exp.
  Matrix Posteriors(const Eigen::Ref<const Matrix> &frames) const;
  Vector FramePosteriors(const Eigen::Ref<const Vector> &frame) const;
  /// Total log-likelihood of the frames.
  double LogLikelihood(const Eigen::Ref<const Matrix> &frames) const;

 private:
  void Precompute();
  void CheckDim(Eigen::Index d) const;

  Vector weights_;
  Matrix means_, variances_;
  // Cached terms of the vectorized log-density.
  Matrix inv_vars_, means_invvars_;
  Vector log_consts_;
};

/// Zeroth- and centered first-order statistics of one or more utterances.
struct BaumWelchStats {
  Vector zeroth;  // C
  Matrix first;   // C x D, sum_t gamma_c(t) (x_t - mu_c)
  double n_frames = 0.0;

  static BaumWelchStats Zero(Eigen::Index components, Eigen::Index dim);
  Eigen::Index NumComponents() const { return zeroth.size(); }
  Eigen::Index Dim() const { return first.cols(); }
};

BaumWelchStats AccumulateStats(const DiagGmm &gmm, const Eigen::Ref<const Matrix> &frames);
/// Fieldwise sum; throws InvalidArgument on shape mismatch.
BaumWelchStats MergeStats(const BaumWelchStats &a, const BaumWelchStats &b);

struct EmConfig {
  enum class Init { kBinarySplit, kKmeans };
  int n_components = 64;
  int n_iters = 10;  // EM iterations after every split
  double variance_floor = 1e-3;  // fraction of the global per-dim variance
  Init init = Init::kBinarySplit;
  std::uint64_t seed = 0;
  double split_offset = 0.2;  // means perturbed by +-split_offset * sigma
  int threads = 1;
};

struct EmTrace {
  struct Iteration {
    int components;
    double log_likelihood;
  };
  std::vector<Iteration> iterations;
};

/// Trains from all frames of `features`. Throws InvalidArgument when there
/// are fewer than 10 frames per component and NumericError on non-finite
/// input.
DiagGmm TrainUbm(const std::vector<FeatureMatrix> &features, const EmConfig &cfg,
                 EmTrace *trace = nullptr);
DiagGmm TrainUbm(const Matrix &frames, const EmConfig &cfg, EmTrace *trace = nullptr);

/// One EM step on fixed component count; returns the log-likelihood of the
/// data under the model *before* the update.
double EmStep(DiagGmm &gmm, const Matrix &frames, const Eigen::RowVectorXd &var_floor,
              int threads = 1);

}  // namespace tev

#endif  // TEV_GMM_H_
