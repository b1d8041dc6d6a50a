// tests/gmm_test.cc

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
#include <numeric>

#include "doctest.h"
#include "oracles.h"
#include "tev/gmm.h"

using namespace tev;
using namespace tevtest;

namespace {

// Independent log-density of a diagonal mixture.
double OracleLogLike(const DiagGmm &g, const Matrix &x) {
  double total = 0.0;
  for (Eigen::Index t = 0; t < x.rows(); ++t) {
    double p = 0.0;
    for (Eigen::Index c = 0; c < g.NumComponents(); ++c) {
      double logn = std::log(g.weights()(c));
      for (Eigen::Index d = 0; d < x.cols(); ++d) {
        const double v = g.variances()(c, d), diff = x(t, d) - g.means()(c, d);
        logn += -0.5 * std::log(2.0 * M_PI * v) - 0.5 * diff * diff / v;
      }
      p += std::exp(logn);
    }
    total += std::log(p);
  }
  return total;
}

DiagGmm TwoComponent(double sep) {
  Vector w(2);
  w << 0.5, 0.5;
  Matrix mu(2, 1), var(2, 1);
  mu << 0.0, sep;
  var << 1.0, 1.0;
  return DiagGmm(w, mu, var);
}

}  // namespace

TEST_CASE("log-likelihood matches a direct evaluation") {
  const Matrix x = Mixture({{-1, 0}, {2, 1}}, 50, 1.0, 1);
  EmConfig cfg;
  cfg.n_components = 2;
  cfg.n_iters = 3;
  const DiagGmm g = TrainUbm(x, cfg);
  CHECK(g.LogLikelihood(x) == doctest::Approx(OracleLogLike(g, x)).epsilon(1e-12));
}

TEST_CASE("EM log-likelihood never decreases") {
  for (std::uint64_t seed : {1, 2, 3}) {
    const Matrix x = Mixture({{-4, 0}, {3, 3}, {0, -5}, {5, -2}}, 150, 1.0, seed);
    EmConfig cfg;
    cfg.n_components = 4;
    cfg.n_iters = 20;
    EmTrace trace;
    TrainUbm(x, cfg, &trace);
    for (std::size_t i = 1; i < trace.iterations.size(); ++i) {
      if (trace.iterations[i].components != trace.iterations[i - 1].components) continue;
      CHECK(trace.iterations[i].log_likelihood >= trace.iterations[i - 1].log_likelihood - 1e-8);
    }
  }
}

TEST_CASE("EM steps at fixed component count are monotone") {
  const Matrix x = Mixture({{-2, 0}, {2, 1}, {0, 4}}, 100, 1.2, 4);
  Vector w = Vector::Constant(3, 1.0 / 3.0);
  Matrix mu(3, 2), var = Matrix::Ones(3, 2);
  mu << -1, -1, 1, 1, 0, 2;
  DiagGmm g(w, mu, var);
  const Eigen::RowVectorXd floor = Eigen::RowVectorXd::Constant(2, 1e-3);
  double prev = -std::numeric_limits<double>::infinity();
  for (int it = 0; it < 20; ++it) {
    const double ll = EmStep(g, x, floor);
    CHECK(ll >= prev - 1e-8);
    prev = ll;
    CHECK((g.variances().array() >= 1e-3).all());
  }
}

TEST_CASE("single component is the ML Gaussian") {
  const Matrix x = Mixture({{1.5, -2.0}, {4.0, 0.5}}, 80, 0.7, 5);
  EmConfig cfg;
  cfg.n_components = 1;
  cfg.n_iters = 1;
  const DiagGmm g = TrainUbm(x, cfg);
  const Eigen::RowVectorXd mean = x.colwise().mean();
  const Eigen::RowVectorXd var = (x.rowwise() - mean).array().square().colwise().mean();
  CHECK((g.means().row(0) - mean).cwiseAbs().maxCoeff() < 1e-10);
  CHECK((g.variances().row(0) - var).cwiseAbs().maxCoeff() < 1e-10);
  CHECK(g.weights()(0) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("two separated clusters are recovered") {
  const Matrix x = Mixture({{-5, -5}, {5, 5}}, 400, 1.0, 6);
  EmConfig cfg;
  cfg.n_components = 2;
  cfg.n_iters = 10;
  const DiagGmm g = TrainUbm(x, cfg);
  const Eigen::Index lo = g.means()(0, 0) < g.means()(1, 0) ? 0 : 1;
  CHECK(std::abs(g.means()(lo, 0) + 5.0) < 0.1);
  CHECK(std::abs(g.means()(lo, 1) + 5.0) < 0.1);
  CHECK(std::abs(g.means()(1 - lo, 0) - 5.0) < 0.1);
  CHECK(std::abs(g.means()(1 - lo, 1) - 5.0) < 0.1);
  CHECK(std::abs(g.weights()(0) - 0.5) < 0.05);
}

TEST_CASE("kmeans initialization also trains") {
  const Matrix x = Mixture({{-5, 0}, {5, 0}, {0, 6}}, 100, 1.0, 7);
  EmConfig cfg;
  cfg.n_components = 3;
  cfg.init = EmConfig::Init::kKmeans;
  cfg.n_iters = 5;
  const DiagGmm g = TrainUbm(x, cfg);
  CHECK(g.NumComponents() == 3);
  CHECK(g.weights().sum() == doctest::Approx(1.0));
}

TEST_CASE("training input errors") {
  EmConfig cfg;
  cfg.n_components = 4;
  CHECK_THROWS_AS(TrainUbm(Matrix::Zero(30, 2), cfg), InvalidArgument);
  Matrix bad = Mixture({{0, 0}}, 100, 1.0, 8);
  bad(3, 1) = std::nan("");
  CHECK_THROWS_AS(TrainUbm(bad, cfg), NumericError);
  cfg.n_components = 3;
  CHECK_THROWS_AS(TrainUbm(Mixture({{0, 0}}, 100, 1.0, 8), cfg), InvalidArgument);
}

TEST_CASE("posteriors") {
  Vector w1(1);
  w1 << 1.0;
  const DiagGmm one(w1, Matrix::Constant(1, 2, 0.3), Matrix::Ones(1, 2));
  Vector f(2);
  f << 100.0, -40.0;
  CHECK(one.FramePosteriors(f)(0) == 1.0);

  const DiagGmm two = TwoComponent(10.0);
  Vector at(1);
  at << 0.0;
  CHECK(two.FramePosteriors(at)(0) > 1.0 - 1e-10);

  Vector w(4);
  w.setConstant(0.25);
  const DiagGmm same(w, Matrix::Zero(4, 3), Matrix::Ones(4, 3));
  const Vector p = same.FramePosteriors(Vector::Constant(3, 0.7));
  CHECK((p.array() - 0.25).abs().maxCoeff() < 1e-15);

  const Matrix x = Mixture({{0, 0}, {3, 3}}, 40, 2.0, 9);
  Vector w2(2);
  w2 << 0.3, 0.7;
  Matrix mu(2, 2);
  mu << 0, 0, 3, 3;
  const DiagGmm g(w2, mu, Matrix::Ones(2, 2));
  const Matrix post = g.Posteriors(x);
  CHECK((post.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
  // Far from both components the log-sum-exp path must not underflow.
  Vector far(2);
  far << 1e3, -1e3;
  CHECK(g.FramePosteriors(far).allFinite());
  CHECK_THROWS_AS(g.FramePosteriors(Vector::Zero(3)), InvalidArgument);
}

TEST_CASE("Baum-Welch statistics") {
  const Matrix x = Mixture({{-3, 0}, {3, 0}}, 60, 1.0, 10);
  EmConfig cfg;
  cfg.n_components = 2;
  cfg.n_iters = 5;
  const DiagGmm g = TrainUbm(x, cfg);
  const BaumWelchStats s = AccumulateStats(g, x);
  CHECK(s.zeroth.sum() == doctest::Approx(x.rows()).epsilon(1e-6));
  CHECK(s.n_frames == doctest::Approx(x.rows()));

  // Oracle: direct sums of gamma and gamma * (x - mu).
  const Matrix post = g.Posteriors(x);
  for (Eigen::Index c = 0; c < 2; ++c) {
    Eigen::RowVectorXd f = Eigen::RowVectorXd::Zero(2);
    for (Eigen::Index t = 0; t < x.rows(); ++t) f += post(t, c) * (x.row(t) - g.means().row(c));
    CHECK((s.first.row(c) - f).cwiseAbs().maxCoeff() < 1e-8);
  }

  Vector w(2);
  w << 0.5, 0.5;
  Matrix mu(2, 2);
  mu << 0, 0, 50, 50;
  const DiagGmm sep(w, mu, Matrix::Ones(2, 2));
  const BaumWelchStats s0 = AccumulateStats(sep, Matrix::Zero(10, 2));
  CHECK(s0.first.cwiseAbs().maxCoeff() < 1e-8);

  CHECK_THROWS_AS(AccumulateStats(g, Matrix::Zero(4, 3)), InvalidArgument);
}

TEST_CASE("statistics merge") {
  const Matrix x = Mixture({{-3, 0}, {3, 1}}, 50, 1.0, 11);
  EmConfig cfg;
  cfg.n_components = 2;
  cfg.n_iters = 3;
  const DiagGmm g = TrainUbm(x, cfg);
  const BaumWelchStats whole = AccumulateStats(g, x);
  const BaumWelchStats a = AccumulateStats(g, x.topRows(30));
  const BaumWelchStats b = AccumulateStats(g, x.bottomRows(70));
  const BaumWelchStats ab = MergeStats(a, b), ba = MergeStats(b, a);
  CHECK((ab.zeroth - whole.zeroth).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((ab.first - whole.first).cwiseAbs().maxCoeff() < 1e-8);
  CHECK(ab.zeroth == ba.zeroth);
  CHECK(ab.first == ba.first);

  const BaumWelchStats z = BaumWelchStats::Zero(2, 2);
  const BaumWelchStats az = MergeStats(a, z);
  CHECK(az.zeroth == a.zeroth);
  CHECK(az.first == a.first);

  BaumWelchStats four = BaumWelchStats::Zero(2, 2);
  for (int k = 0; k < 4; ++k) four = MergeStats(four, AccumulateStats(g, x.middleRows(25 * k, 25)));
  CHECK((four.first - whole.first).cwiseAbs().maxCoeff() < 1e-8);

  CHECK_THROWS_AS(MergeStats(a, BaumWelchStats::Zero(3, 2)), InvalidArgument);
}

TEST_CASE("statistics are invariant to frame order") {
  const Matrix x = Mixture({{-3, 0}, {3, 1}}, 50, 1.0, 12);
  EmConfig cfg;
  cfg.n_components = 2;
  cfg.n_iters = 3;
  const DiagGmm g = TrainUbm(x, cfg);
  std::vector<Eigen::Index> order(x.rows());
  std::iota(order.begin(), order.end(), 0);
  Rng rng(3);
  rng.Shuffle(order);
  Matrix y(x.rows(), x.cols());
  for (Eigen::Index t = 0; t < x.rows(); ++t) y.row(t) = x.row(order[t]);
  const BaumWelchStats a = AccumulateStats(g, x), b = AccumulateStats(g, y);
  CHECK((a.zeroth - b.zeroth).cwiseAbs().maxCoeff() < 1e-8);
  CHECK((a.first - b.first).cwiseAbs().maxCoeff() < 1e-8);
}
