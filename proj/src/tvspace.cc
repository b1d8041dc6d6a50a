// tvspace.cc

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

#include <cmath>

#include "tev/tvspace.h"

namespace tev {

std::string VectorKindName(VectorKind k) { return k == VectorKind::kIvector ? "ivector" : "dvector"; }

VectorKind ParseVectorKind(const std::string &name) {
  if (name == "ivector") return VectorKind::kIvector;
  if (name == "dvector") return VectorKind::kDvector;
  throw InvalidArgument("unknown vector kind '" + name + "'");
}

TotalVariabilityModel::TotalVariabilityModel(DiagGmm ubm, Matrix t)
    : ubm_(std::move(ubm)), t_(std::move(t)) {
  if (t_.rows() != ubm_.NumComponents() * ubm_.Dim())
    throw InvalidArgument("TotalVariabilityModel: T has " + std::to_string(t_.rows()) +
                          " rows, expected C*D = " + std::to_string(ubm_.NumComponents() * ubm_.Dim()));
  if (t_.cols() < 1 || t_.cols() > t_.rows())
    throw InvalidArgument("TotalVariabilityModel: need 1 <= R <= C*D");
  if (!t_.allFinite()) throw NumericError("TotalVariabilityModel: non-finite T");
  Precompute();
}

void TotalVariabilityModel::Precompute() {
  const Eigen::Index C = NumComponents(), D = FeatDim();
  sigma_inv_t_.resize(t_.rows(), t_.cols());
  component_terms_.resize(C);
  for (Eigen::Index c = 0; c < C; ++c) {
    const auto tc = t_.middleRows(c * D, D);
    sigma_inv_t_.middleRows(c * D, D) =
        ubm_.variances().row(c).transpose().cwiseInverse().asDiagonal() * tc;
    component_terms_[c] = tc.transpose() * sigma_inv_t_.middleRows(c * D, D);
  }
}

Matrix TotalVariabilityModel::PosteriorPrecision(const Vector &zeroth) const {
  const Eigen::Index R = IvectorDim();
  Matrix l = Matrix::Identity(R, R);
  for (Eigen::Index c = 0; c < NumComponents(); ++c)
    if (zeroth(c) != 0.0) l.noalias() += zeroth(c) * component_terms_[c];
  return l;
}

Vector TotalVariabilityModel::LinearTerm(const Matrix &first) const {
  // first is C x D; its row-major flattening matches the block layout of T.
  const RowMatrix flat_rows = first;
  const Eigen::Map<const Vector> flat(flat_rows.data(), flat_rows.size());
  return sigma_inv_t_.transpose() * flat;
}

TotalVariabilityModel InitTmatrix(const DiagGmm &ubm, Eigen::Index ivector_dim, std::uint64_t seed) {
  const Eigen::Index rows = ubm.NumComponents() * ubm.Dim();
  if (ivector_dim < 1) throw InvalidArgument("InitTmatrix: i-vector dim must be >= 1");
  if (ivector_dim > rows)
    throw InvalidArgument("InitTmatrix: i-vector dim " + std::to_string(ivector_dim) +
                          " exceeds C*D = " + std::to_string(rows));
  const double scale = 0.1 * ubm.variances().cwiseSqrt().mean();
  Rng rng(seed);
  Matrix t(rows, ivector_dim);
  for (Eigen::Index j = 0; j < t.cols(); ++j)
    for (Eigen::Index i = 0; i < t.rows(); ++i) t(i, j) = scale * rng.Normal();
  return TotalVariabilityModel(ubm, std::move(t));
}

namespace {

struct Posterior {
  Vector mean;
  Matrix cov;
  double objective;
};

Posterior ComputePosterior(const TotalVariabilityModel &model, const BaumWelchStats &stats) {
  if (stats.NumComponents() != model.NumComponents() || stats.Dim() != model.FeatDim())
    throw InvalidArgument("i-vector extraction: stats shape does not match the model");
  if (!stats.zeroth.allFinite() || !stats.first.allFinite())
    throw NumericError("i-vector extraction: non-finite statistics");
  if ((stats.zeroth.array() < 0.0).any())
    throw InvalidArgument("i-vector extraction: negative occupancy");
  const Matrix l = model.PosteriorPrecision(stats.zeroth);
  const Eigen::LLT<Matrix> llt(l);
  if (llt.info() != Eigen::Success) throw NumericError("i-vector extraction: precision not SPD");
  const Vector b = model.LinearTerm(stats.first);
  Posterior p;
  p.mean = llt.solve(b);
  p.cov = llt.solve(Matrix::Identity(l.rows(), l.cols()));
  const double logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  p.objective = 0.5 * b.dot(p.mean) - 0.5 * logdet;
  return p;
}

}  // namespace

SpeakerVector ExtractIvector(const TotalVariabilityModel &model, const BaumWelchStats &stats,
                             const std::string &utt_id) {
  return {ComputePosterior(model, stats).mean, VectorKind::kIvector, utt_id};
}

double TmatrixObjective(const TotalVariabilityModel &model, const std::vector<BaumWelchStats> &stats) {
  double total = 0.0;
  for (const auto &s : stats) total += ComputePosterior(model, s).objective;
  return total;
}

TotalVariabilityModel TrainTmatrix(const TotalVariabilityModel &model,
                                   const std::vector<BaumWelchStats> &stats, int n_iters,
                                   TmatrixTrace *trace, int threads) {
  const Eigen::Index C = model.NumComponents(), D = model.FeatDim(), R = model.IvectorDim();
  if (static_cast<Eigen::Index>(stats.size()) < R)
    throw InvalidArgument("TrainTmatrix: need at least R = " + std::to_string(R) + " utterances, got " +
                          std::to_string(stats.size()));
  TotalVariabilityModel current = model;
  constexpr std::size_t kChunk = 64;
  const std::size_t n_chunks = (stats.size() + kChunk - 1) / kChunk;

  for (int iter = 0; iter < n_iters; ++iter) {
    struct Partial {
      std::vector<Matrix> a;  // per component, R x R
      Matrix c;               // (C*D) x R
      double objective = 0.0;
    };
    std::vector<Partial> parts(n_chunks);
    ParallelFor(n_chunks, threads, [&](std::size_t k) {
      Partial &p = parts[k];
      p.a.assign(C, Matrix::Zero(R, R));
      p.c = Matrix::Zero(C * D, R);
      const std::size_t end = std::min(stats.size(), (k + 1) * kChunk);
      for (std::size_t i = k * kChunk; i < end; ++i) {
        const Posterior post = ComputePosterior(current, stats[i]);
        p.objective += post.objective;
        const Matrix second = post.cov + post.mean * post.mean.transpose();
        for (Eigen::Index c = 0; c < C; ++c) {
          const double n = stats[i].zeroth(c);
          if (n != 0.0) p.a[c].noalias() += n * second;
          p.c.middleRows(c * D, D).noalias() += stats[i].first.row(c).transpose() * post.mean.transpose();
        }
      }
    });
    std::vector<Matrix> a(C, Matrix::Zero(R, R));
    Matrix acc = Matrix::Zero(C * D, R);
    double objective = 0.0;
    for (const auto &p : parts) {
      for (Eigen::Index c = 0; c < C; ++c) a[c] += p.a[c];
      acc += p.c;
      objective += p.objective;
    }
    if (trace) trace->objective.push_back(objective);

    Matrix t(C * D, R);
    for (Eigen::Index c = 0; c < C; ++c) {
      const Eigen::LLT<Matrix> llt(a[c]);
      if (llt.info() != Eigen::Success)
        throw NumericError("TrainTmatrix: singular M-step system for component " + std::to_string(c) +
                           " (degenerate data)");
      t.middleRows(c * D, D) = llt.solve(acc.middleRows(c * D, D).transpose()).transpose();
    }
    if (!t.allFinite()) throw NumericError("TrainTmatrix: non-finite T after M-step");
    current = TotalVariabilityModel(current.ubm(), std::move(t));
  }
  return current;
}

}  // namespace tev
