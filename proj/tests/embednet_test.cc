// tests/embednet_test.cc

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

#include "doctest.h"
#include "oracles.h"
#include "tev/embednet.h"

using namespace tev;
using namespace tevtest;

namespace {

// Fbank-like 40-bin frames with energy in one half of the bins, spliced +-4.
FeatureMatrix BandFrames(int speaker, Eigen::Index n, Rng &rng) {
  FeatureMatrix f;
  f.values.resize(n, 40);
  for (Eigen::Index t = 0; t < n; ++t)
    for (int b = 0; b < 40; ++b) {
      const bool in_band = (b < 20) == (speaker == 0);
      f.values(t, b) = (in_band ? 2.0 : -2.0) + 0.5 * rng.Normal();
    }
  return Splice(f, 4, 4);
}

}  // namespace

TEST_CASE("config validation") {
  FrameNetConfig c = TinyConfig();
  CHECK_NOTHROW(c.Validate());
  c.n_speakers = 1;
  CHECK_THROWS_AS(c.Validate(), InvalidArgument);
  c = TinyConfig();
  c.input_dim = 70;
  CHECK_THROWS_AS(c.Validate(), InvalidArgument);
  c = TinyConfig();
  c.conv_blocks = {{2, 12, 3, 2}};
  CHECK_THROWS_AS(FrameNet(c, 1), InvalidArgument);
  c = TinyConfig();
  c.momentum = 1.0;
  CHECK_THROWS_AS(c.Validate(), InvalidArgument);
}

TEST_CASE("default architecture") {
  const FrameNet net(FrameNetConfig{}, 1);
  REQUIRE(net.layers().size() == 6);
  CHECK(net.layers()[0].Tag() == "conv");
  CHECK(net.layers()[1].Tag() == "conv");
  CHECK(net.layers()[2].Tag() == "tdnn");
  CHECK(net.layers()[3].Tag() == "tdnn");
  CHECK(net.layers()[4].Tag() == "affine");
  CHECK(net.FeatureLayer() == 4);
  CHECK(net.layers()[0].InputDim() == 360);
  CHECK(net.layers().back().OutputDim() == 20);
  CHECK(net.layers()[4].OutputDim() == 16);
}

TEST_CASE("forward shapes and determinism") {
  Rng rng(1);
  const FrameNet a(TinyConfig(), 7), b(TinyConfig(), 7);
  const FeatureMatrix x = RandomFrames(6, 72, rng);
  const auto oa = a.Forward(x), ob = b.Forward(x);
  CHECK(oa.features.rows() == 6);
  CHECK(oa.features.cols() == 4);
  CHECK(oa.logits.cols() == 3);
  CHECK(oa.features == ob.features);
  CHECK(oa.logits == ob.logits);
  CHECK(oa.features.minCoeff() >= 0.0);

  const FeatureMatrix one = RandomFrames(1, 72, rng);
  CHECK(a.Forward(one).features.rows() == 1);
  CHECK_THROWS_AS(a.Forward(RandomFrames(2, 71, rng)), InvalidArgument);
}

TEST_CASE("zero network predicts uniformly") {
  FrameNet net(TinyConfig(), 1);
  for (auto &l : net.mutable_layers()) {
    l.w.setZero();
    l.b.setZero();
  }
  Rng rng(2);
  const auto out = net.Forward(RandomFrames(4, 72, rng));
  CHECK(out.logits.cwiseAbs().maxCoeff() == 0.0);
  const Matrix p = Softmax(out.logits);
  CHECK((p.array() - 1.0 / 3.0).abs().maxCoeff() < 1e-15);
}

TEST_CASE("softmax rows sum to one") {
  Rng rng(3);
  Matrix logits(10, 7);
  for (Eigen::Index i = 0; i < logits.size(); ++i) logits.data()[i] = 30.0 * rng.Normal();
  const Matrix p = Softmax(logits);
  CHECK((p.rowwise().sum().array() - 1.0).abs().maxCoeff() < 1e-12);
  CHECK(p.minCoeff() >= 0.0);
}

TEST_CASE("gradient check across layer types") {
  for (std::uint64_t seed : {1, 2, 3}) {
    Rng rng(seed);
    const FrameNetConfig c = TinyConfig();
    const FrameNet net = WithRandomBiases(FrameNet(c, seed), rng);
    const auto ex = RandomExamples(c, rng);
    const GradCheckResult r = GradCheck(net, BatchOf(ex), seed);
    CHECK(r.n_checked >= 100);
    CHECK(r.max_rel_error < 1e-4);
    bool conv = false, tdnn = false, affine = false;
    for (const auto &[tag, err] : r.per_layer) {
      conv |= tag == "conv";
      tdnn |= tag == "tdnn";
      affine |= tag == "affine";
    }
    CHECK(conv);
    CHECK(tdnn);
    CHECK(affine);
  }
}

TEST_CASE("gradient check on an all-linear network") {
  FrameNetConfig c = TinyConfig();
  c.conv_blocks.clear();
  c.tdnn_layers = {{{-1, 0, 1}, 6}};
  FrameNet net(c, 4);
  for (auto &l : net.mutable_layers()) l.w = l.w.cwiseAbs();
  Rng rng(4);
  std::vector<TrainingExample> ex;
  for (int i = 0; i < 3; ++i) {
    FeatureMatrix f = RandomFrames(4, 72, rng);
    f.values = f.values.cwiseAbs();
    ex.push_back({f, i});
  }
  CHECK(GradCheck(net, BatchOf(ex), 4, 40).max_rel_error < 1e-6);
}

TEST_CASE("initial loss is close to ln K") {
  FrameNetConfig c;
  c.n_speakers = 20;
  const FrameNet net(c, 5);
  Rng rng(5);
  std::vector<TrainingExample> ex;
  for (int i = 0; i < 20; ++i) ex.push_back({RandomFrames(10, 360, rng), i});
  const double loss = net.Loss(BatchOf(ex));
  CHECK(std::abs(loss - std::log(20.0)) / std::log(20.0) < 0.02);
}

TEST_CASE("zero learning rate leaves parameters unchanged") {
  FrameNetConfig c = TinyConfig();
  c.lr = 0.0;
  c.epochs = 1;
  Rng rng(6);
  const auto ex = RandomExamples(c, rng);
  const FrameNet net(c, 6);
  const FrameNet trained = TrainFrameNet(net, ex, c);
  for (std::size_t i = 0; i < net.layers().size(); ++i) {
    CHECK(trained.layers()[i].w == net.layers()[i].w);
    CHECK(trained.layers()[i].b == net.layers()[i].b);
  }
}

TEST_CASE("two band-separated speakers are learned") {
  FrameNetConfig c;
  c.n_speakers = 2;
  c.feature_dim = 16;
  c.epochs = 20;
  Rng rng(7);
  std::vector<TrainingExample> ex;
  for (int i = 0; i < 16; ++i) ex.push_back({BandFrames(i % 2, 20, rng), i % 2});
  TrainTrace trace;
  TrainFrameNet(FrameNet(c, 7), ex, c, &trace);
  REQUIRE(trace.epoch_accuracy.size() == 20);
  CHECK(trace.epoch_accuracy.back() > 0.95);
  CHECK(trace.epoch_loss.back() < trace.epoch_loss.front());
}

TEST_CASE("single-label corpus drives the loss toward zero") {
  FrameNetConfig c = TinyConfig();
  c.epochs = 30;
  Rng rng(8);
  std::vector<TrainingExample> ex;
  for (int i = 0; i < 4; ++i) ex.push_back({RandomFrames(5, 72, rng), 0});
  TrainTrace trace;
  TrainFrameNet(FrameNet(c, 8), ex, c, &trace);
  CHECK(trace.epoch_loss.back() < 0.05);
  CHECK(trace.epoch_loss.back() < trace.epoch_loss.front());
}

TEST_CASE("training is reproducible and rejects bad labels") {
  FrameNetConfig c = TinyConfig();
  c.epochs = 2;
  c.seed = 3;
  Rng rng(9);
  const auto ex = RandomExamples(c, rng);
  const FrameNet a = TrainFrameNet(FrameNet(c, 1), ex, c);
  const FrameNet b = TrainFrameNet(FrameNet(c, 1), ex, c);
  for (std::size_t i = 0; i < a.layers().size(); ++i) CHECK(a.layers()[i].w == b.layers()[i].w);
  auto bad = ex;
  bad[0].label = 3;
  CHECK_THROWS_AS(TrainFrameNet(FrameNet(c, 1), bad, c), InvalidArgument);
  CHECK_THROWS_AS(TrainFrameNet(FrameNet(c, 1), {}, c), InvalidArgument);
}

TEST_CASE("divergence is reported") {
  FrameNetConfig c = TinyConfig();
  c.epochs = 1;
  Rng rng(10);
  auto ex = RandomExamples(c, rng);
  ex[1].frames.values(0, 0) = std::numeric_limits<double>::infinity();
  CHECK_THROWS_AS(TrainFrameNet(FrameNet(c, 1), ex, c), NumericError);
}

TEST_CASE("d-vector averaging") {
  Rng rng(11);
  const Matrix one = RandomFrames(1, 6, rng).values;
  CHECK(AverageFrameFeatures(one).values == one.row(0).transpose());
  CHECK(AverageFrameFeatures(one).kind == VectorKind::kDvector);

  const Matrix a = RandomFrames(8, 6, rng).values, b = RandomFrames(8, 6, rng).values;
  const Matrix reversed = a.colwise().reverse();
  CHECK((AverageFrameFeatures(a).values - AverageFrameFeatures(reversed).values).cwiseAbs().maxCoeff() < 1e-15);
  Matrix ab(16, 6);
  ab << a, b;
  const Vector mean = 0.5 * (AverageFrameFeatures(a).values + AverageFrameFeatures(b).values);
  CHECK((AverageFrameFeatures(ab).values - mean).cwiseAbs().maxCoeff() < 1e-12);
  CHECK_THROWS_AS(AverageFrameFeatures(Matrix(0, 6)), InvalidArgument);

  const FrameNet net(TinyConfig(), 12);
  const FeatureMatrix x = RandomFrames(5, 72, rng);
  const SpeakerVector d = Dvector(net, x, "u1");
  CHECK(d.utt_id == "u1");
  CHECK((d.values - net.Forward(x).features.colwise().mean().transpose()).cwiseAbs().maxCoeff() < 1e-15);
}
