// tests/backend_test.cc

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

#include <algorithm>
#include <cmath>
#include <numeric>

#include <Eigen/Dense>

#include "doctest.h"
#include "oracles.h"
#include "tev/backend.h"

using namespace tev;
using namespace tevtest;

namespace {

Matrix RandomOrthogonal(Eigen::Index d, Rng &rng) {
  Matrix a(d, d);
  for (Eigen::Index i = 0; i < a.size(); ++i) a.data()[i] = rng.Normal();
  return a.householderQr().householderQ();
}

struct Labeled {
  Matrix vectors;
  std::vector<std::string> labels;
};

// Samples from the two-covariance model.
Labeled SamplePlda(const Vector &mu, const Matrix &between, const Matrix &within, int classes, int per_class,
                   Rng &rng) {
  const Eigen::Index d = mu.size();
  const Matrix lb = between.llt().matrixL(), lw = within.llt().matrixL();
  Labeled out{Matrix(classes * per_class, d), {}};
  for (int k = 0; k < classes; ++k) {
    const Vector y = mu + lb * RandomVector(d, rng);
    for (int i = 0; i < per_class; ++i) {
      out.vectors.row(k * per_class + i) = (y + lw * RandomVector(d, rng)).transpose();
      out.labels.push_back("c" + std::to_string(k));
    }
  }
  return out;
}

double RelFrobenius(const Matrix &est, const Matrix &truth) { return (est - truth).norm() / truth.norm(); }

}  // namespace

TEST_CASE("scoring method names") {
  for (auto m : {ScoringMethod::kCosine, ScoringMethod::kLdaCosine, ScoringMethod::kPlda})
    CHECK(ParseScoringMethod(ScoringMethodName(m)) == m);
  CHECK_THROWS_AS(ParseScoringMethod("svm"), InvalidArgument);
}

TEST_CASE("cosine score") {
  Rng rng(1);
  for (int i = 0; i < 20; ++i) {
    const Vector x = RandomVector(7, rng), y = RandomVector(7, rng);
    CHECK(std::abs(CosineScore(x, x) - 1.0) < 1e-12);
    CHECK(std::abs(CosineScore(x, Vector(-x)) + 1.0) < 1e-12);
    CHECK(std::abs(CosineScore(Vector(2.5 * x), Vector(0.1 * y)) - CosineScore(x, y)) < 1e-12);
    CHECK(std::abs(CosineScore(LengthNormalize(x), LengthNormalize(y)) - CosineScore(x, y)) < 1e-12);
    CHECK(std::abs(CosineScore(x, y) - x.dot(y) / (x.norm() * y.norm())) < 1e-15);
  }
  CHECK_THROWS_AS(CosineScore(Vector::Zero(3), Vector::Ones(3)), InvalidArgument);
  CHECK_THROWS_AS(CosineScore(Vector::Ones(3), Vector::Ones(4)), InvalidArgument);
}

TEST_CASE("length normalization") {
  Rng rng(2);
  const Vector v = RandomVector(9, rng);
  const Vector u = LengthNormalize(v);
  CHECK(std::abs(u.norm() - 1.0) < 1e-12);
  CHECK((LengthNormalize(u) - u).cwiseAbs().maxCoeff() < 1e-12);
  CHECK((LengthNormalize(Vector(3.0 * v)) - u).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(u.dot(v) > 0.0);
  CHECK_THROWS_AS(LengthNormalize(Vector::Zero(4)), InvalidArgument);
  const SpeakerVector s = LengthNormalize(SpeakerVector{v, VectorKind::kDvector, "x"});
  CHECK(s.kind == VectorKind::kDvector);
  CHECK(s.utt_id == "x");
}

TEST_CASE("LDA finds the separating axis") {
  Rng rng(3);
  Matrix x(200, 10);
  std::vector<std::string> labels;
  for (int i = 0; i < 200; ++i) {
    x.row(i) = RandomVector(10, rng).transpose();
    x(i, 1) += i < 100 ? -4.0 : 4.0;
    labels.push_back(i < 100 ? "a" : "b");
  }
  const LdaTransform lda = TrainLda(x, labels, 1);
  CHECK(lda.OutputDim() == 1);
  CHECK(lda.InputDim() == 10);
  const Vector dir = lda.projection.col(0).normalized();
  // Two classes: the Fisher direction is Sw^-1 (mu_b - mu_a).
  const Vector ma = x.topRows(100).colwise().mean().transpose(), mb = x.bottomRows(100).colwise().mean().transpose();
  const Matrix ca = x.topRows(100).rowwise() - ma.transpose(), cb = x.bottomRows(100).rowwise() - mb.transpose();
  const Matrix sw = ca.transpose() * ca + cb.transpose() * cb;
  const Vector fisher = sw.fullPivLu().solve(mb - ma).normalized();
  CHECK(std::abs(dir.dot(fisher)) > 1.0 - 1e-6);
  CHECK(std::abs(dir(1)) > 0.95);
  CHECK_THROWS_AS(TrainLda(x, labels, 2), InvalidArgument);
}

TEST_CASE("LDA is invariant to a consistent permutation") {
  Rng rng(4);
  Matrix x(60, 5);
  std::vector<std::string> labels;
  for (int i = 0; i < 60; ++i) {
    x.row(i) = RandomVector(5, rng).transpose();
    x(i, i % 3) += 3.0;
    labels.push_back("s" + std::to_string(i % 3));
  }
  std::vector<int> order(60);
  std::iota(order.begin(), order.end(), 0);
  rng.Shuffle(order);
  Matrix y(60, 5);
  std::vector<std::string> ly;
  for (int i = 0; i < 60; ++i) {
    y.row(i) = x.row(order[i]);
    ly.push_back(labels[order[i]]);
  }
  const LdaTransform a = TrainLda(x, labels, 2), b = TrainLda(y, ly, 2);
  CHECK((a.projection - b.projection).cwiseAbs().maxCoeff() < 1e-9);
  CHECK((a.mean - b.mean).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("LDA keeps the closest class pair under an affine pre-transform") {
  Rng rng(5);
  const int classes = 5;
  Matrix x(classes * 20, 6);
  std::vector<std::string> labels;
  std::vector<Vector> centers;
  for (int k = 0; k < classes; ++k) centers.push_back(4.0 * RandomVector(6, rng));
  centers[3] = centers[1] + 0.8 * RandomVector(6, rng);
  for (int i = 0; i < x.rows(); ++i) {
    x.row(i) = (centers[i % classes] + RandomVector(6, rng)).transpose();
    labels.push_back("c" + std::to_string(i % classes));
  }
  const Matrix a = RandomSpd(6, rng, 0.5);
  const Vector shift = RandomVector(6, rng);
  const Matrix xt = (x * a.transpose()).rowwise() + shift.transpose();

  auto closest = [&](const Matrix &data) {
    const LdaTransform lda = TrainLda(data, labels, classes - 1);
    std::vector<Vector> means(classes, Vector::Zero(classes - 1));
    for (int i = 0; i < data.rows(); ++i) means[i % classes] += lda.Apply(Vector(data.row(i).transpose())) / 20.0;
    std::pair<int, int> best{0, 1};
    for (int p = 0; p < classes; ++p)
      for (int q = p + 1; q < classes; ++q)
        if ((means[p] - means[q]).norm() < (means[best.first] - means[best.second]).norm()) best = {p, q};
    return best;
  };
  CHECK(closest(x) == closest(xt));
}

TEST_CASE("LDA input errors") {
  Matrix x(5, 3);
  x.setRandom();
  CHECK_THROWS_AS(TrainLda(x, {"a", "a", "b", "b", "c"}, 1), InvalidArgument);
  CHECK_THROWS_AS(TrainLda(x, {"a", "a", "b", "b"}, 1), InvalidArgument);
  CHECK_THROWS_AS(TrainLda(x, {"a", "a", "a", "a", "a"}, 1), InvalidArgument);
}

TEST_CASE("PLDA score matches the dense-Gaussian oracle") {
  Rng rng(6);
  for (Eigen::Index d = 1; d <= 3; ++d)
    for (int rep = 0; rep < 5; ++rep) {
      const PldaModel m = RandomPlda(d, rng);
      const PldaScorer scorer(m);
      const Vector a = m.mu + RandomVector(d, rng), b = m.mu + RandomVector(d, rng);
      CHECK(std::abs(scorer.Score(a, b) - DenseLlr(m, a, b)) < 1e-8);
      CHECK(std::abs(scorer.Score(a, b) - scorer.Score(b, a)) < 1e-10);
      CHECK(std::abs(scorer.Score(m.mu, m.mu) - DenseLlr(m, m.mu, m.mu)) < 1e-8);
    }
  const PldaModel m = RandomPlda(2, rng);
  const SpeakerVector a{RandomVector(2, rng), VectorKind::kIvector, "a"};
  const SpeakerVector b{RandomVector(2, rng), VectorKind::kIvector, "b"};
  CHECK(std::abs(PldaLlrScore(m, a, b) - DenseLlr(m, a.values, b.values)) < 1e-8);
  CHECK_THROWS_AS(PldaScorer(m).Score(Vector::Zero(3), Vector::Zero(2)), InvalidArgument);
}

TEST_CASE("PLDA score is invariant to an orthogonal transform") {
  Rng rng(7);
  const PldaModel m = RandomPlda(4, rng);
  const Matrix q = RandomOrthogonal(4, rng);
  const PldaModel r{q * m.mu, q * m.between * q.transpose(), q * m.within * q.transpose()};
  for (int i = 0; i < 10; ++i) {
    const Vector a = RandomVector(4, rng), b = RandomVector(4, rng);
    CHECK(std::abs(PldaScorer(m).Score(a, b) - PldaScorer(r).Score(q * a, q * b)) < 1e-8);
  }
}

TEST_CASE("PLDA log-likelihood matches stacked Gaussians") {
  Rng rng(8);
  const PldaModel m = RandomPlda(2, rng);
  const Labeled data = SamplePlda(m.mu, m.between, m.within, 3, 2, rng);
  double oracle = 0.0;
  for (int k = 0; k < 3; ++k) {
    const Matrix total = m.between + m.within;
    Matrix s(4, 4);
    s << total, m.between, m.between, total;
    Vector x(4), mean(4);
    x << data.vectors.row(2 * k).transpose(), data.vectors.row(2 * k + 1).transpose();
    mean << m.mu, m.mu;
    oracle += GaussLogDensity(x, mean, s);
  }
  CHECK(PldaLogLikelihood(m, data.vectors, data.labels) == doctest::Approx(oracle).epsilon(1e-10));
}

TEST_CASE("PLDA recovers generating covariances") {
  Rng rng(9);
  Matrix between(2, 2), within(2, 2);
  between << 2.0, 0.6, 0.6, 1.0;
  within << 0.5, -0.1, -0.1, 0.3;
  const Vector mu = Vector::LinSpaced(2, 1.0, -1.0);
  const Labeled data = SamplePlda(mu, between, within, 200, 10, rng);
  PldaTrace trace;
  const PldaModel m = TrainPlda(data.vectors, data.labels, 10, &trace);
  CHECK(RelFrobenius(m.between, between) < 0.15);
  CHECK(RelFrobenius(m.within, within) < 0.15);
  for (std::size_t i = 1; i < trace.log_likelihood.size(); ++i)
    CHECK(trace.log_likelihood[i] >= trace.log_likelihood[i - 1] - 1e-8);
}

TEST_CASE("PLDA with no between-class variation") {
  Rng rng(10);
  Matrix within(2, 2);
  within << 1.0, 0.2, 0.2, 0.7;
  Labeled data = SamplePlda(Vector::Zero(2), 1e-300 * Matrix::Identity(2, 2), within, 100, 10, rng);
  // Every class gets exactly the same sample mean.
  for (int k = 0; k < 100; ++k) {
    const Eigen::RowVectorXd m = data.vectors.middleRows(10 * k, 10).colwise().mean();
    data.vectors.middleRows(10 * k, 10).rowwise() -= m;
  }
  PldaTrace trace;
  const PldaModel m = TrainPlda(data.vectors, data.labels, 20, &trace);
  CHECK(m.between.trace() < 1e-3 * m.within.trace());
  for (std::size_t i = 1; i < trace.log_likelihood.size(); ++i)
    CHECK(trace.log_likelihood[i] >= trace.log_likelihood[i - 1] - 1e-8);
}

TEST_CASE("PLDA input errors") {
  Rng rng(11);
  Matrix x(4, 3);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = rng.Normal();
  CHECK_THROWS(TrainPlda(x, {"a", "b", "c", "d"}, 3));
  x(0, 0) = std::nan("");
  CHECK_THROWS_AS(TrainPlda(x, {"a", "a", "b", "b"}, 3), NumericError);
}
