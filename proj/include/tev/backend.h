// tev/backend.h

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

#ifndef TEV_BACKEND_H_
#define TEV_BACKEND_H_

#include <string>
#include <vector>

#include "tev/common.h"
#include "tev/tvspace.h"

namespace tev {

enum class ScoringMethod { kCosine, kLdaCosine, kPlda };

std::string ScoringMethodName(ScoringMethod m);
ScoringMethod ParseScoringMethod(const std::string &name);

/// a.b / (|a||b|). Throws InvalidArgument on a zero vector or size mismatch.
template <typename DerivedA, typename DerivedB>
typename DerivedA::Scalar CosineScore(const Eigen::MatrixBase<DerivedA> &a,
                                      const Eigen::MatrixBase<DerivedB> &b) {
  using Scalar = typename DerivedA::Scalar;
  if (a.size() != b.size()) throw InvalidArgument("cosine: dimension mismatch");
  const Scalar na = a.norm(), nb = b.norm();
  if (na == Scalar(0) || nb == Scalar(0)) throw InvalidArgument("cosine: zero vector");
  const Scalar c = a.dot(b) / (na * nb);
  return std::clamp(c, Scalar(-1), Scalar(1));
}

inline double CosineScore(const SpeakerVector &a, const SpeakerVector &b) {
  return CosineScore(a.values, b.values);
}

/// Scales to unit Euclidean norm.
template <typename Derived>
Eigen::Matrix<typename Derived::Scalar, Eigen::Dynamic, 1> LengthNormalize(
    const Eigen::MatrixBase<Derived> &v) {
  const auto n = v.norm();
  if (n == 0) throw InvalidArgument("length normalization: zero vector");
  return v / n;
}

inline SpeakerVector LengthNormalize(const SpeakerVector &v) {
  return {LengthNormalize(v.values), v.kind, v.utt_id};
}

/// Rows of the returned matrix are the vectors.
Matrix StackVectors(const std::vector<SpeakerVector> &vectors);

struct LdaTransform {
  Matrix projection;  // D x K
  Vector mean;        // subtracted before projecting

  Eigen::Index InputDim() const { return projection.rows(); }
  Eigen::Index OutputDim() const { return projection.cols(); }
  Vector Apply(const Vector &x) const { return projection.transpose() * (x - mean); }
  SpeakerVector Apply(const SpeakerVector &v) const { return {Apply(v.values), v.kind, v.utt_id}; }
};

/// vectors: one per row. Labels are arbitrary class ids. Top-K generalized
/// eigenvectors of (between, within) scatter, in decreasing eigenvalue order.
LdaTransform TrainLda(const Matrix &vectors, const std::vector<std::string> &labels, Eigen::Index dim);

/// Two-covariance PLDA: class identity y ~ N(mu, between), x ~ N(y, within).
struct PldaModel {
  Vector mu;
  Matrix between;
  Matrix within;

  Eigen::Index Dim() const { return mu.size(); }
};

struct PldaTrace {
  std::vector<double> log_likelihood;  // marginal log-likelihood before each update, then final
};

PldaModel TrainPlda(const Matrix &vectors, const std::vector<std::string> &labels, int n_iters,
                    PldaTrace *trace = nullptr);

/// Exact marginal log-likelihood of grouped data under the model.
double PldaLogLikelihood(const PldaModel &model, const Matrix &vectors,
                         const std::vector<std::string> &labels);

/// Precomputed closed-form same/different log-likelihood ratio.
class PldaScorer {
 public:
  explicit PldaScorer(const PldaModel &model);
  double Score(const Vector &enroll, const Vector &test) const;

 private:
  Vector mu_;
  Matrix q_, p_;
  double constant_ = 0.0;
};

double PldaLlrScore(const PldaModel &model, const SpeakerVector &enroll, const SpeakerVector &test);

}  // namespace tev

#endif  // TEV_BACKEND_H_
