// tests/viz_test.cc

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
#include <set>
#include <sstream>

#include "doctest.h"
#include "oracles.h"
#include "testutil.h"
#include "tev/viz.h"

using namespace tev;
using namespace tevtest;

namespace {

TsneConfig SmallConfig(double perplexity = 10.0) {
  TsneConfig c;
  c.perplexity = perplexity;
  c.seed = 3;
  return c;
}

}  // namespace

TEST_CASE("config validation") {
  TsneConfig c = SmallConfig(10.0);
  CHECK_NOTHROW(c.Validate(31));
  CHECK_THROWS_AS(c.Validate(30), InvalidArgument);
  CHECK_THROWS_AS(c.Validate(4), InvalidArgument);
  c.perplexity = 0.5;
  CHECK_THROWS_AS(c.Validate(100), InvalidArgument);
}

TEST_CASE("squared distances") {
  Matrix x(3, 2);
  x << 0, 0, 3, 4, -1, 1;
  const Matrix d = SquaredDistances(x);
  CHECK(d(0, 1) == 25.0);
  CHECK(d(1, 0) == 25.0);
  CHECK(d(0, 2) == 2.0);
  CHECK(d(1, 2) == 25.0);
  CHECK(d.diagonal().cwiseAbs().maxCoeff() == 0.0);
}

TEST_CASE("bandwidth bisection hits the target entropy") {
  const Matrix x = TwoClusters(40, 5, 6.0, 1);
  for (double perp : {5.0, 15.0, 25.0}) {
    Vector betas, entropy;
    const Matrix p = ConditionalAffinities(SquaredDistances(x), perp, 1e-5, 200, &betas, &entropy);
    for (Eigen::Index i = 0; i < p.rows(); ++i) {
      CHECK(std::abs(RowEntropy(p, i) - std::log(perp)) < 1e-5);
      CHECK(std::abs(entropy(i) - std::log(perp)) < 1e-5);
      CHECK(std::abs(p.row(i).sum() - 1.0) < 1e-12);
      CHECK(p(i, i) == 0.0);
      CHECK(betas(i) > 0.0);
    }
  }
}

TEST_CASE("bisection failure is reported") {
  const Matrix x = TwoClusters(10, 3, 2.0, 2);
  CHECK_THROWS_AS(ConditionalAffinities(SquaredDistances(x), 5.0, 1e-12, 2), NumericError);
}

TEST_CASE("two separated clusters stay separated") {
  const Matrix x = TwoClusters(50, 10, 20.0, 3);
  TsneTrace trace;
  const Matrix y = Tsne(x, SmallConfig(20.0), &trace);
  REQUIRE(y.rows() == 100);
  REQUIRE(y.cols() == 2);
  const Eigen::RowVector2d ca = y.topRows(50).colwise().mean(), cb = y.bottomRows(50).colwise().mean();
  double intra = 0.0;
  for (int i = 0; i < 50; ++i) intra += (y.row(i) - ca).norm() + (y.row(50 + i) - cb).norm();
  intra /= 100.0;
  CHECK((ca - cb).norm() > 5.0 * intra);

  REQUIRE(trace.kl.size() == 1000);
  CHECK(trace.kl[999] < trace.kl[259]);
  for (std::size_t i = 1; i < trace.kl.size(); ++i) CHECK(std::isfinite(trace.kl[i]));
}

TEST_CASE("t-SNE is deterministic and translation invariant") {
  // Dyadic grid values keep the translation exact in floating point.
  Rng rng(4);
  Matrix x(40, 4);
  for (Eigen::Index i = 0; i < x.size(); ++i) x.data()[i] = static_cast<double>(rng.Index(64)) / 8.0;
  TsneConfig c = SmallConfig(8.0);
  c.iters = 300;
  const Matrix a = Tsne(x, c);
  const Matrix b = Tsne(x, c);
  const Matrix shifted = (x.array() + 16.0).matrix();
  CHECK(a == b);
  CHECK(Tsne(shifted, c) == a);
  c.threads = 3;
  CHECK(Tsne(x, c) == a);
  c.threads = 1;
  c.seed = 4;
  CHECK(Tsne(x, c) != a);
}

TEST_CASE("duplicated rows land together") {
  const Matrix base = TwoClusters(20, 6, 5.0, 5);
  Matrix x(80, 6);
  x << base, base;
  const Matrix y = Tsne(x, SmallConfig(10.0));
  const double scale = (y.rowwise() - y.colwise().mean()).rowwise().norm().maxCoeff();
  for (int i = 0; i < 40; ++i) CHECK((y.row(i) - y.row(40 + i)).norm() < 1e-3 * scale);
}

TEST_CASE("t-SNE input errors") {
  Matrix x = TwoClusters(10, 3, 2.0, 6);
  CHECK_THROWS_AS(Tsne(x, SmallConfig(30.0)), InvalidArgument);
  x(2, 1) = std::nan("");
  CHECK_THROWS_AS(Tsne(x, SmallConfig(3.0)), InvalidArgument);
}

TEST_CASE("plot groups") {
  Matrix p(5, 2);
  p << 0, 0, 1, 1, 2, 2, 3, 3, 4, 4;
  const std::vector<PlotLabel> labels = {
      {"spk2", "disguised"}, {"spk1", "normal"}, {"spk2", "normal"}, {"spk1", "disguised"}, {"spk3", "normal"}};
  const EmbeddingPlot plot = ExportPlotData(p, labels);
  const auto groups = PlotGroups(plot);
  REQUIRE(groups.size() == 5);
  CHECK(groups[0].spk_id == "spk1");
  CHECK(groups[0].style == "normal");
  CHECK(groups[1].style == "disguised");
  CHECK(groups[2].spk_id == "spk2");
  CHECK(groups[2].rows == std::vector<Eigen::Index>{2});
  CHECK(groups[4].spk_id == "spk3");

  CHECK_THROWS_AS(ExportPlotData(p, {labels.begin(), labels.begin() + 4}), InvalidArgument);
  auto bad = labels;
  bad[0].style = "whisper";
  CHECK_THROWS_AS(ExportPlotData(p, bad), InvalidArgument);
  Matrix nan = p;
  nan(1, 1) = std::nan("");
  CHECK_THROWS_AS(ExportPlotData(nan, labels), InvalidArgument);
}

TEST_CASE("plot data text and files") {
  Matrix p(4, 2);
  p << 0.5, -1, 1, 2, 3, 4, 5, 6;
  const EmbeddingPlot plot =
      ExportPlotData(p, {{"a", "normal"}, {"a", "disguised"}, {"b", "normal"}, {"b", "disguised"}});
  std::ostringstream os;
  WritePlotData(os, plot, {"perplexity 30"});
  const std::string text = os.str();
  CHECK(text.rfind("# perplexity 30\n", 0) == 0);
  CHECK(text.find("a\tnormal\t0.5\t-1\n") != std::string::npos);
  CHECK(text.find("b\tdisguised\t5\t6\n") != std::string::npos);

  tevtest::TempDir dir("viz");
  const auto files = WritePlotFiles(dir.path(), plot, TsneMetadata(TsneConfig{}));
  CHECK(files.size() == 3);
  const std::string a = tevtest::ReadText(dir / "a.tsv");
  CHECK(a.find("darker") != std::string::npos);
  CHECK(a.find("lighter") != std::string::npos);
  CHECK(a.find("perplexity") != std::string::npos);
  CHECK(tevtest::ReadText(dir / "all.tsv").find("b\tnormal\t3\t4") != std::string::npos);
}

TEST_CASE("group subsampling") {
  std::vector<PlotLabel> labels;
  for (int i = 0; i < 50; ++i) labels.push_back({i % 2 ? "s1" : "s2", i < 40 ? "normal" : "disguised"});
  const auto keep = SubsampleGroups(labels, 5, 7);
  CHECK(keep.size() == 20);
  CHECK(std::is_sorted(keep.begin(), keep.end()));
  CHECK(SubsampleGroups(labels, 5, 7) == keep);
  CHECK(SubsampleGroups(labels, 100, 7).size() == 50);
  const auto meta = TsneMetadata(TsneConfig{});
  CHECK(!meta.empty());
}
