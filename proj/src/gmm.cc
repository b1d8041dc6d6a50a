// gmm.cc

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
#include <limits>

#include "tev/gmm.h"

namespace tev {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr Eigen::Index kChunkFrames = 4096;

// Row-wise log-sum-exp normalization; returns the per-row log normalizers.
Vector NormalizeLogRows(Matrix &logp) {
  Vector lse(logp.rows());
  for (Eigen::Index t = 0; t < logp.rows(); ++t) {
    const double m = logp.row(t).maxCoeff();
    if (!std::isfinite(m)) throw NumericError("posterior computation: no finite component likelihood");
    const double s = (logp.row(t).array() - m).exp().sum();
    lse(t) = m + std::log(s);
    logp.row(t) = (logp.row(t).array() - lse(t)).exp();
  }
  return lse;
}

}  // namespace

DiagGmm::DiagGmm(Vector weights, Matrix means, Matrix variances)
    : weights_(std::move(weights)), means_(std::move(means)), variances_(std::move(variances)) {
  if (weights_.size() < 1) throw InvalidArgument("DiagGmm: need at least one component");
  if (means_.rows() != weights_.size() || variances_.rows() != weights_.size() ||
      means_.cols() != variances_.cols())
    throw InvalidArgument("DiagGmm: inconsistent parameter shapes");
  if ((variances_.array() <= 0.0).any() || !variances_.allFinite() || !means_.allFinite())
    throw InvalidArgument("DiagGmm: variances must be positive and parameters finite");
  if ((weights_.array() < 0.0).any() || std::abs(weights_.sum() - 1.0) > 1e-6)
    throw InvalidArgument("DiagGmm: weights must form a simplex");
  Precompute();
}

void DiagGmm::Precompute() {
  inv_vars_ = variances_.cwiseInverse();
  means_invvars_ = means_.cwiseProduct(inv_vars_);
  log_consts_.resize(weights_.size());
  for (Eigen::Index c = 0; c < weights_.size(); ++c) {
    const double quad = means_.row(c).dot(means_invvars_.row(c));
    const double logdet = variances_.row(c).array().log().sum();
    log_consts_(c) = std::log(weights_(c)) - 0.5 * (Dim() * kLog2Pi + logdet + quad);
  }
}

void DiagGmm::CheckDim(Eigen::Index d) const {
  if (d != Dim())
    throw InvalidArgument("DiagGmm: feature dim " + std::to_string(d) + " != model dim " +
                          std::to_string(Dim()));
}

Matrix DiagGmm::ComponentLogLikes(const Eigen::Ref<const Matrix> &frames) const {
  CheckDim(frames.cols());
  Matrix ll = frames * means_invvars_.transpose();
  ll.noalias() -= 0.5 * frames.array().square().matrix() * inv_vars_.transpose();
  ll.rowwise() += log_consts_.transpose();
  return ll;
}

Matrix DiagGmm::Posteriors(const Eigen::Ref<const Matrix> &frames) const {
  Matrix p = ComponentLogLikes(frames);
  NormalizeLogRows(p);
  return p;
}

Vector DiagGmm::FramePosteriors(const Eigen::Ref<const Vector> &frame) const {
  const Matrix one = frame.transpose();
  return Posteriors(one).row(0).transpose();
}

double DiagGmm::LogLikelihood(const Eigen::Ref<const Matrix> &frames) const {
  Matrix p = ComponentLogLikes(frames);
  return NormalizeLogRows(p).sum();
}

BaumWelchStats BaumWelchStats::Zero(Eigen::Index components, Eigen::Index dim) {
  return {Vector::Zero(components), Matrix::Zero(components, dim), 0.0};
}

BaumWelchStats AccumulateStats(const DiagGmm &gmm, const Eigen::Ref<const Matrix> &frames) {
  const Matrix post = gmm.Posteriors(frames);
  BaumWelchStats s;
  s.zeroth = post.colwise().sum().transpose();
  s.first = post.transpose() * frames;
  s.first -= s.zeroth.asDiagonal() * gmm.means();
  s.n_frames = static_cast<double>(frames.rows());
  return s;
}

BaumWelchStats MergeStats(const BaumWelchStats &a, const BaumWelchStats &b) {
  if (a.NumComponents() != b.NumComponents() || a.Dim() != b.Dim())
    throw InvalidArgument("MergeStats: shape mismatch");
  return {a.zeroth + b.zeroth, a.first + b.first, a.n_frames + b.n_frames};
}

double EmStep(DiagGmm &gmm, const Matrix &frames, const Eigen::RowVectorXd &var_floor,
              int threads) {
  const Eigen::Index C = gmm.NumComponents(), D = gmm.Dim();
  const Eigen::Index n_chunks = (frames.rows() + kChunkFrames - 1) / kChunkFrames;
  struct Partial {
    Vector occ;
    Matrix sx, sxx;
    double ll = 0.0;
  };
  std::vector<Partial> parts(n_chunks);
  ParallelFor(n_chunks, threads, [&](std::size_t k) {
    const Eigen::Index start = static_cast<Eigen::Index>(k) * kChunkFrames;
    const Eigen::Index len = std::min(kChunkFrames, frames.rows() - start);
    const auto block = frames.middleRows(start, len);
    Matrix post = gmm.ComponentLogLikes(block);
    Partial &p = parts[k];
    p.ll = NormalizeLogRows(post).sum();
    p.occ = post.colwise().sum().transpose();
    p.sx = post.transpose() * block;
    p.sxx = post.transpose() * block.array().square().matrix();
  });
  // Fixed-order reduction keeps results independent of the thread count.
  Vector occ = Vector::Zero(C);
  Matrix sx = Matrix::Zero(C, D), sxx = Matrix::Zero(C, D);
  double ll = 0.0;
  for (const auto &p : parts) {
    occ += p.occ;
    sx += p.sx;
    sxx += p.sxx;
    ll += p.ll;
  }

  Vector w(C);
  Matrix mu = gmm.means(), var = gmm.variances();
  const double total = static_cast<double>(frames.rows());
  for (Eigen::Index c = 0; c < C; ++c) {
    w(c) = occ(c) / total;
    if (occ(c) < 1e-10) continue;  // keep parameters of an empty component
    mu.row(c) = sx.row(c) / occ(c);
    var.row(c) = (sxx.row(c) / occ(c) - mu.row(c).cwiseAbs2()).cwiseMax(var_floor);
  }
  w /= w.sum();
  gmm = DiagGmm(std::move(w), std::move(mu), std::move(var));
  return ll;
}

namespace {

DiagGmm SingleGaussian(const Matrix &frames, const Eigen::RowVectorXd &var_floor) {
  const Eigen::RowVectorXd mean = frames.colwise().mean();
  const Eigen::RowVectorXd var =
      ((frames.rowwise() - mean).array().square().colwise().sum() / frames.rows()).matrix();
  return DiagGmm(Vector::Ones(1), Matrix(mean), Matrix(var.cwiseMax(var_floor)));
}

DiagGmm Split(const DiagGmm &g, double offset) {
  const Eigen::Index C = g.NumComponents(), D = g.Dim();
  Vector w(2 * C);
  Matrix mu(2 * C, D), var(2 * C, D);
  for (Eigen::Index c = 0; c < C; ++c) {
    const Eigen::RowVectorXd delta = offset * g.variances().row(c).cwiseSqrt();
    w(2 * c) = w(2 * c + 1) = 0.5 * g.weights()(c);
    mu.row(2 * c) = g.means().row(c) + delta;
    mu.row(2 * c + 1) = g.means().row(c) - delta;
    var.row(2 * c) = var.row(2 * c + 1) = g.variances().row(c);
  }
  return DiagGmm(std::move(w), std::move(mu), std::move(var));
}

DiagGmm KmeansInit(const Matrix &frames, int C, std::uint64_t seed,
                   const Eigen::RowVectorXd &var_floor) {
  Rng rng(seed);
  const Eigen::Index T = frames.rows(), D = frames.cols();
  std::vector<Eigen::Index> order(T);
  for (Eigen::Index t = 0; t < T; ++t) order[t] = t;
  rng.Shuffle(order);
  Matrix centers(C, D);
  for (int c = 0; c < C; ++c) centers.row(c) = frames.row(order[c]);
  std::vector<int> assign(T, 0);
  for (int iter = 0; iter < 20; ++iter) {
    for (Eigen::Index t = 0; t < T; ++t) {
      Eigen::Index best;
      (centers.rowwise() - frames.row(t)).rowwise().squaredNorm().minCoeff(&best);
      assign[t] = static_cast<int>(best);
    }
    Matrix sum = Matrix::Zero(C, D);
    Vector cnt = Vector::Zero(C);
    for (Eigen::Index t = 0; t < T; ++t) {
      sum.row(assign[t]) += frames.row(t);
      cnt(assign[t]) += 1.0;
    }
    for (int c = 0; c < C; ++c)
      if (cnt(c) > 0) centers.row(c) = sum.row(c) / cnt(c);
  }
  Vector w = Vector::Zero(C);
  Matrix var = Matrix::Zero(C, D);
  for (Eigen::Index t = 0; t < T; ++t) {
    w(assign[t]) += 1.0;
    var.row(assign[t]) += (frames.row(t) - centers.row(assign[t])).cwiseAbs2();
  }
  for (int c = 0; c < C; ++c) {
    if (w(c) > 0) var.row(c) /= w(c);
    var.row(c) = var.row(c).cwiseMax(var_floor);
    w(c) = std::max(w(c), 1.0);
  }
  w /= w.sum();
  return DiagGmm(std::move(w), std::move(centers), std::move(var));
}

}  // namespace

DiagGmm TrainUbm(const Matrix &frames, const EmConfig &cfg, EmTrace *trace) {
  if (cfg.n_components < 1) throw InvalidArgument("TrainUbm: n_components must be >= 1");
  if (cfg.init == EmConfig::Init::kBinarySplit && (cfg.n_components & (cfg.n_components - 1)) != 0)
    throw InvalidArgument("TrainUbm: binary-split init needs a power-of-two component count");
  if (frames.rows() < 10 * static_cast<Eigen::Index>(cfg.n_components))
    throw InvalidArgument("TrainUbm: " + std::to_string(frames.rows()) + " frames is fewer than 10 x " +
                          std::to_string(cfg.n_components) + " components");
  if (!frames.allFinite()) throw NumericError("TrainUbm: non-finite features");

  const Eigen::RowVectorXd mean = frames.colwise().mean();
  const Eigen::RowVectorXd global_var =
      (frames.rowwise() - mean).array().square().colwise().sum() / frames.rows();
  const Eigen::RowVectorXd floor =
      (cfg.variance_floor * global_var).cwiseMax(std::numeric_limits<double>::min());

  auto run_em = [&](DiagGmm &g) {
    for (int it = 0; it < cfg.n_iters; ++it) {
      const double ll = EmStep(g, frames, floor, cfg.threads);
      if (trace) trace->iterations.push_back({static_cast<int>(g.NumComponents()), ll});
    }
  };

  DiagGmm gmm;
  if (cfg.init == EmConfig::Init::kKmeans) {
    gmm = KmeansInit(frames, cfg.n_components, cfg.seed, floor);
    run_em(gmm);
  } else {
    gmm = SingleGaussian(frames, floor);
    run_em(gmm);
    while (gmm.NumComponents() < cfg.n_components) {
      gmm = Split(gmm, cfg.split_offset);
      run_em(gmm);
    }
  }
  if (trace)
    trace->iterations.push_back({static_cast<int>(gmm.NumComponents()), gmm.LogLikelihood(frames)});
  return gmm;
}

DiagGmm TrainUbm(const std::vector<FeatureMatrix> &features, const EmConfig &cfg, EmTrace *trace) {
  if (features.empty()) throw InvalidArgument("TrainUbm: no features");
  Eigen::Index rows = 0;
  for (const auto &f : features) {
    if (f.dims() != features[0].dims()) throw InvalidArgument("TrainUbm: inconsistent feature dims");
    rows += f.frames();
  }
  Matrix all(rows, features[0].dims());
  Eigen::Index r = 0;
  for (const auto &f : features) {
    all.middleRows(r, f.frames()) = f.values;
    r += f.frames();
  }
  return TrainUbm(all, cfg, trace);
}

}  // namespace tev
