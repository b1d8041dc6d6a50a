// tev/viz.h

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

#ifndef TEV_VIZ_H_
#define TEV_VIZ_H_

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "tev/common.h"

namespace tev {

struct TsneConfig {
  double perplexity = 30.0;
  int iters = 1000;
  std::uint64_t seed = 0;
  double learning_rate = 200.0;
  double exaggeration = 12.0;
  int exaggeration_iters = 250;
  double initial_momentum = 0.5;
  double final_momentum = 0.8;
  int momentum_switch_iter = 250;
  double init_scale = 1e-4;     // std of the initial embedding
  double entropy_tol = 1e-5;    // |H_i - log(perplexity)|, nats
  int max_bisect_steps = 200;
  int threads = 1;

  /// Throws InvalidArgument unless N >= 5 and perplexity < N / 3.
  void Validate(Eigen::Index n_points) const;
};

struct TsneTrace {
  Vector betas;              // per-point Gaussian precision 1 / (2 sigma^2)
  Vector entropy;            // achieved per-point entropy, nats
  std::vector<double> kl;    // KL(P || Q) with unexaggerated P, one per iteration
};

/// N x N matrix of squared Euclidean distances (sum of squared differences).
Matrix SquaredDistances(const Matrix &points);

/// Row i holds p_{j|i}; each row's bandwidth is bisected until its entropy is
/// within tol of log(perplexity). Throws NumericError when a row cannot reach
/// the target.
Matrix ConditionalAffinities(const Matrix &sq_dist, double perplexity, double tol, int max_steps,
                             Vector *betas = nullptr, Vector *entropy = nullptr);

/// Exact t-SNE of the rows of points, N x 2 result.
Matrix Tsne(const Matrix &points, const TsneConfig &cfg, TsneTrace *trace = nullptr);

struct PlotLabel {
  std::string spk_id;
  std::string style;  // "normal" or "disguised"
};

struct EmbeddingPlot {
  Matrix points;  // N x 2, order matches labels
  std::vector<PlotLabel> labels;
};

struct PlotGroup {
  std::string spk_id;
  std::string style;
  std::vector<Eigen::Index> rows;
};

/// Throws InvalidArgument on length mismatch, an unknown style or a
/// non-finite coordinate.
EmbeddingPlot ExportPlotData(const Matrix &proj, const std::vector<PlotLabel> &labels);

/// Groups sorted by speaker, normal before disguised; empty groups omitted.
std::vector<PlotGroup> PlotGroups(const EmbeddingPlot &plot);

/// One "spk_id style x y" line per point, grouped; metadata lines are written
/// as leading comments.
void WritePlotData(std::ostream &os, const EmbeddingPlot &plot, const std::vector<std::string> &metadata = {});

/// dir/all.tsv plus dir/<spk_id>.tsv per speaker; normal speech is tagged
/// darker and disguised speech lighter. Returns the files written.
std::vector<std::filesystem::path> WritePlotFiles(const std::filesystem::path &dir, const EmbeddingPlot &plot,
                                                  const std::vector<std::string> &metadata = {});

/// Row indices keeping at most max_per_group rows per (speaker, style),
/// seeded, in ascending order.
std::vector<Eigen::Index> SubsampleGroups(const std::vector<PlotLabel> &labels, int max_per_group,
                                          std::uint64_t seed);

/// Configuration lines for the plot metadata header.
std::vector<std::string> TsneMetadata(const TsneConfig &cfg);

}  // namespace tev

#endif  // TEV_VIZ_H_
