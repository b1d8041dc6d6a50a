// backend.cc

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
#include <map>

#include "tev/backend.h"

namespace tev {

namespace {

constexpr double kLog2Pi = 1.8378770664093454836;
constexpr double kRidge = 1e-6;

using Groups = std::map<std::string, std::vector<Eigen::Index>>;

Groups GroupByLabel(const Matrix &vectors, const std::vector<std::string> &labels) {
  if (static_cast<Eigen::Index>(labels.size()) != vectors.rows())
    throw InvalidArgument("labels do not align with vectors");
  Groups g;
  for (Eigen::Index i = 0; i < vectors.rows(); ++i) g[labels[i]].push_back(i);
  return g;
}

void RequireClasses(const Groups &g, const char *who) {
  if (g.size() < 2) throw InvalidArgument(std::string(who) + ": need at least 2 classes");
  for (const auto &[label, rows] : g)
    if (rows.size() < 2)
      throw InvalidArgument(std::string(who) + ": class '" + label + "' has a single vector");
}

Matrix Symmetrize(const Matrix &m) { return 0.5 * (m + m.transpose()); }

double LogDetSpd(const Matrix &m, const char *what) {
  const Eigen::LLT<Matrix> llt(m);
  if (llt.info() != Eigen::Success) throw NumericError(std::string(what) + " is not positive definite");
  return 2.0 * llt.matrixLLT().diagonal().array().log().sum();
}

}  // namespace

std::string ScoringMethodName(ScoringMethod m) {
  switch (m) {
    case ScoringMethod::kCosine: return "cosine";
    case ScoringMethod::kLdaCosine: return "lda-cosine";
    case ScoringMethod::kPlda: return "plda";
  }
  return "?";
}

ScoringMethod ParseScoringMethod(const std::string &name) {
  if (name == "cosine") return ScoringMethod::kCosine;
  if (name == "lda-cosine" || name == "lda") return ScoringMethod::kLdaCosine;
  if (name == "plda") return ScoringMethod::kPlda;
  throw InvalidArgument("unknown scoring method '" + name + "'");
}

Matrix StackVectors(const std::vector<SpeakerVector> &vectors) {
  if (vectors.empty()) return {};
  Matrix m(static_cast<Eigen::Index>(vectors.size()), vectors[0].values.size());
  for (std::size_t i = 0; i < vectors.size(); ++i) {
    if (vectors[i].values.size() != m.cols()) throw InvalidArgument("StackVectors: inconsistent dims");
    m.row(static_cast<Eigen::Index>(i)) = vectors[i].values.transpose();
  }
  return m;
}

LdaTransform TrainLda(const Matrix &vectors, const std::vector<std::string> &labels, Eigen::Index dim) {
  const Groups groups = GroupByLabel(vectors, labels);
  RequireClasses(groups, "TrainLda");
  const Eigen::Index D = vectors.cols();
  const auto n_classes = static_cast<Eigen::Index>(groups.size());
  if (dim < 1 || dim > std::min(D, n_classes - 1))
    throw InvalidArgument("TrainLda: target dim " + std::to_string(dim) + " exceeds min(D, classes-1) = " +
                          std::to_string(std::min(D, n_classes - 1)));

  const Vector mean = vectors.colwise().mean().transpose();
  Matrix sw = Matrix::Zero(D, D), sb = Matrix::Zero(D, D);
  for (const auto &[label, rows] : groups) {
    Vector m = Vector::Zero(D);
    for (Eigen::Index r : rows) m += vectors.row(r).transpose();
    m /= static_cast<double>(rows.size());
    for (Eigen::Index r : rows) {
      const Vector d = vectors.row(r).transpose() - m;
      sw.noalias() += d * d.transpose();
    }
    const Vector dm = m - mean;
    sb.noalias() += static_cast<double>(rows.size()) * dm * dm.transpose();
  }
  sw += (kRidge * sw.trace() / D + std::numeric_limits<double>::min()) * Matrix::Identity(D, D);

  // Whiten the within-class scatter, then diagonalize the between-class one.
  const Eigen::SelfAdjointEigenSolver<Matrix> ew(Symmetrize(sw));
  const Matrix whiten = ew.eigenvectors() * ew.eigenvalues().cwiseSqrt().cwiseInverse().asDiagonal();
  const Eigen::SelfAdjointEigenSolver<Matrix> eb(Symmetrize(whiten.transpose() * sb * whiten));
  Matrix proj = whiten * eb.eigenvectors().rowwise().reverse().leftCols(dim);
  for (Eigen::Index k = 0; k < proj.cols(); ++k) {
    Eigen::Index arg;
    proj.col(k).cwiseAbs().maxCoeff(&arg);
    if (proj(arg, k) < 0.0) proj.col(k) = -proj.col(k);
  }
  return {proj, mean};
}

double PldaLogLikelihood(const PldaModel &model, const Matrix &vectors,
                         const std::vector<std::string> &labels) {
  const Groups groups = GroupByLabel(vectors, labels);
  const Eigen::Index D = model.Dim();
  const Eigen::LLT<Matrix> wllt(model.within), bllt(model.between);
  if (wllt.info() != Eigen::Success || bllt.info() != Eigen::Success)
    throw NumericError("PLDA covariances are not positive definite");
  const Matrix w_inv = wllt.solve(Matrix::Identity(D, D));
  const Matrix b_inv = bllt.solve(Matrix::Identity(D, D));
  const double logdet_w = LogDetSpd(model.within, "PLDA within covariance");
  const double logdet_b = LogDetSpd(model.between, "PLDA between covariance");
  const Vector b_inv_mu = b_inv * model.mu;
  const double mu_term = model.mu.dot(b_inv_mu);
  double total = 0.0;
  for (const auto &[label, rows] : groups) {
    const auto n = static_cast<double>(rows.size());
    Vector sum = Vector::Zero(D);
    double quad = 0.0;
    for (Eigen::Index r : rows) {
      const Vector x = vectors.row(r).transpose();
      sum += x;
      quad += x.dot(w_inv * x);
    }
    const Matrix precision = b_inv + n * w_inv;
    const Eigen::LLT<Matrix> pllt(precision);
    const Vector lin = b_inv_mu + w_inv * sum;
    const double logdet_p = 2.0 * pllt.matrixLLT().diagonal().array().log().sum();
    total += -0.5 * n * D * kLog2Pi - 0.5 * logdet_b - 0.5 * n * logdet_w - 0.5 * logdet_p -
             0.5 * (quad + mu_term - lin.dot(pllt.solve(lin)));
  }
  return total;
}

PldaModel TrainPlda(const Matrix &vectors, const std::vector<std::string> &labels, int n_iters,
                    PldaTrace *trace) {
  const Groups groups = GroupByLabel(vectors, labels);
  RequireClasses(groups, "TrainPlda");
  const Eigen::Index D = vectors.cols();
  const auto K = static_cast<double>(groups.size());
  const auto N = static_cast<double>(vectors.rows());
  if (!vectors.allFinite()) throw NumericError("TrainPlda: non-finite input");

  struct ClassData {
    double n;
    Vector sum;
  };
  std::vector<ClassData> classes;
  Matrix scatter = Matrix::Zero(D, D);  // sum of x x'
  for (const auto &[label, rows] : groups) {
    ClassData c{static_cast<double>(rows.size()), Vector::Zero(D)};
    for (Eigen::Index r : rows) {
      const Vector x = vectors.row(r).transpose();
      c.sum += x;
      scatter.noalias() += x * x.transpose();
    }
    classes.push_back(std::move(c));
  }

  // Method-of-moments start: pooled within-class covariance, and the
  // scatter of class means minus its expected within-class contribution.
  Matrix within = scatter;
  Vector mu = Vector::Zero(D);
  Matrix means_scatter = Matrix::Zero(D, D);
  double inv_n = 0.0;
  for (const auto &c : classes) {
    const Vector m = c.sum / c.n;
    within.noalias() -= c.n * m * m.transpose();
    mu += m;
    inv_n += 1.0 / c.n;
  }
  within /= (N - K);
  mu /= K;
  for (const auto &c : classes) {
    const Vector d = c.sum / c.n - mu;
    means_scatter.noalias() += d * d.transpose();
  }
  const double floor = kRidge * within.trace() / D + std::numeric_limits<double>::min();
  within = Symmetrize(within) + floor * Matrix::Identity(D, D);
  {
    const Eigen::LLT<Matrix> check(within);
    if (check.info() != Eigen::Success)
      throw NumericError("TrainPlda: singular within-class covariance (too few vectors per class)");
  }
  const Eigen::SelfAdjointEigenSolver<Matrix> eig(Symmetrize(means_scatter / K - (inv_n / K) * within));
  Matrix between = eig.eigenvectors() * eig.eigenvalues().cwiseMax(floor).asDiagonal() *
                   eig.eigenvectors().transpose();

  PldaModel model{mu, Symmetrize(between), within};
  for (int iter = 0; iter < n_iters; ++iter) {
    if (trace) trace->log_likelihood.push_back(PldaLogLikelihood(model, vectors, labels));
    const Eigen::LLT<Matrix> wllt(model.within), bllt(model.between);
    if (wllt.info() != Eigen::Success) throw NumericError("TrainPlda: within covariance became singular");
    if (bllt.info() != Eigen::Success) throw NumericError("TrainPlda: between covariance became singular");
    const Matrix w_inv = wllt.solve(Matrix::Identity(D, D));
    const Matrix b_inv = bllt.solve(Matrix::Identity(D, D));
    const Vector b_inv_mu = b_inv * model.mu;

    std::vector<Vector> post_mean(classes.size());
    std::vector<Matrix> post_cov(classes.size());
    Vector new_mu = Vector::Zero(D);
    for (std::size_t k = 0; k < classes.size(); ++k) {
      const Eigen::LLT<Matrix> pllt(b_inv + classes[k].n * w_inv);
      post_cov[k] = pllt.solve(Matrix::Identity(D, D));
      post_mean[k] = pllt.solve(b_inv_mu + w_inv * classes[k].sum);
      new_mu += post_mean[k];
    }
    new_mu /= K;
    Matrix new_between = Matrix::Zero(D, D);
    Matrix new_within = scatter;
    for (std::size_t k = 0; k < classes.size(); ++k) {
      const Vector d = post_mean[k] - new_mu;
      new_between += post_cov[k] + d * d.transpose();
      const Vector &y = post_mean[k];
      new_within -= classes[k].sum * y.transpose() + y * classes[k].sum.transpose();
      new_within += classes[k].n * (post_cov[k] + y * y.transpose());
    }
    model.mu = new_mu;
    model.between = Symmetrize(new_between / K);
    model.within = Symmetrize(new_within / N);
  }
  if (trace) trace->log_likelihood.push_back(PldaLogLikelihood(model, vectors, labels));
  return model;
}

PldaScorer::PldaScorer(const PldaModel &model) : mu_(model.mu) {
  const Eigen::Index D = model.Dim();
  if (model.between.rows() != D || model.within.rows() != D)
    throw InvalidArgument("PLDA model: inconsistent dimensions");
  const Matrix total = model.between + model.within;
  const Eigen::LLT<Matrix> tllt(total);
  if (tllt.info() != Eigen::Success) throw NumericError("PLDA model: total covariance not PD");
  const Matrix total_inv = tllt.solve(Matrix::Identity(D, D));
  // Schur complement of the joint same-speaker covariance [[T, B], [B, T]].
  const Matrix schur = Symmetrize(total - model.between * total_inv * model.between);
  const Eigen::LLT<Matrix> sllt(schur);
  if (sllt.info() != Eigen::Success) throw NumericError("PLDA model: within covariance not PD");
  const Matrix schur_inv = sllt.solve(Matrix::Identity(D, D));
  q_ = Symmetrize(total_inv - schur_inv);
  p_ = Symmetrize(total_inv * model.between * schur_inv);
  constant_ = 0.5 * LogDetSpd(total, "PLDA total covariance") - 0.5 * LogDetSpd(schur, "PLDA Schur complement");
}

double PldaScorer::Score(const Vector &enroll, const Vector &test) const {
  if (enroll.size() != mu_.size() || test.size() != mu_.size())
    throw InvalidArgument("PLDA score: dimension mismatch");
  const Vector a = enroll - mu_, b = test - mu_;
  return 0.5 * a.dot(q_ * a) + 0.5 * b.dot(q_ * b) + a.dot(p_ * b) + constant_;
}

double PldaLlrScore(const PldaModel &model, const SpeakerVector &enroll, const SpeakerVector &test) {
  return PldaScorer(model).Score(enroll.values, test.values);
}

}  // namespace tev
