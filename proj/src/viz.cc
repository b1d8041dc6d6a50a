// viz.cc

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
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <ostream>
#include <utility>
#include <vector>

#include "tev/viz.h"

namespace tev {

void TsneConfig::Validate(Eigen::Index n_points) const {
  if (n_points < 5) throw InvalidArgument("t-SNE needs at least 5 points");
  if (!(perplexity > 1.0) || perplexity >= static_cast<double>(n_points) / 3.0)
    throw InvalidArgument("t-SNE: perplexity " + std::to_string(perplexity) + " infeasible for " +
                          std::to_string(n_points) + " points (need perplexity < N/3)");
  if (iters < 1 || learning_rate <= 0.0 || exaggeration < 1.0 || init_scale <= 0.0)
    throw InvalidArgument("t-SNE: bad optimizer settings");
  if (entropy_tol <= 0.0 || max_bisect_steps < 1) throw InvalidArgument("t-SNE: bad bisection settings");
}

Matrix SquaredDistances(const Matrix &points) {
  const Eigen::Index n = points.rows();
  Matrix d(n, n);
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i) d(i, j) = (points.row(i) - points.row(j)).squaredNorm();
  return d;
}

namespace {

// Fills p with the row's conditional distribution at precision beta and
// returns its entropy. Distances are shifted by their minimum for range.
double RowEntropy(const Matrix &sq_dist, Eigen::Index i, double beta, double d_min, Vector &p) {
  const Eigen::Index n = sq_dist.rows();
  double z = 0.0, weighted = 0.0;
  for (Eigen::Index j = 0; j < n; ++j) {
    if (j == i) {
      p(j) = 0.0;
      continue;
    }
    const double shifted = sq_dist(i, j) - d_min;
    p(j) = std::exp(-beta * shifted);
    z += p(j);
    weighted += p(j) * shifted;
  }
  p /= z;
  return std::log(z) + beta * weighted / z;
}

}  // namespace

Matrix ConditionalAffinities(const Matrix &sq_dist, double perplexity, double tol, int max_steps, Vector *betas,
                             Vector *entropy) {
  const Eigen::Index n = sq_dist.rows();
  if (sq_dist.cols() != n || n < 2) throw InvalidArgument("ConditionalAffinities: need a square matrix");
  if (!sq_dist.allFinite()) throw InvalidArgument("ConditionalAffinities: non-finite distance");
  const double target = std::log(perplexity);
  Matrix p(n, n);
  Vector beta_out(n), h_out(n);
  Vector row(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    double d_min = std::numeric_limits<double>::infinity(), d_sum = 0.0;
    for (Eigen::Index j = 0; j < n; ++j)
      if (j != i) {
        d_min = std::min(d_min, sq_dist(i, j));
        d_sum += sq_dist(i, j);
      }
    const double spread = d_sum / static_cast<double>(n - 1) - d_min;
    double beta = spread > 0.0 ? 1.0 / spread : 1.0;
    double lo = 0.0, hi = std::numeric_limits<double>::infinity();
    double h = RowEntropy(sq_dist, i, beta, d_min, row);
    int step = 0;
    while (std::abs(h - target) >= tol) {
      if (++step > max_steps)
        throw NumericError("t-SNE: bandwidth bisection did not reach perplexity " + std::to_string(perplexity) +
                           " for point " + std::to_string(i));
      if (h > target) {
        lo = beta;
        beta = std::isinf(hi) ? beta * 2.0 : 0.5 * (beta + hi);
      } else {
        hi = beta;
        beta = 0.5 * (lo + beta);
      }
      h = RowEntropy(sq_dist, i, beta, d_min, row);
    }
    p.row(i) = row.transpose();
    beta_out(i) = beta;
    h_out(i) = h;
  }
  if (betas) *betas = beta_out;
  if (entropy) *entropy = h_out;
  return p;
}

Matrix Tsne(const Matrix &points, const TsneConfig &cfg, TsneTrace *trace) {
  const Eigen::Index n = points.rows();
  cfg.Validate(n);
  if (!points.allFinite()) throw InvalidArgument("t-SNE: non-finite input");

  Vector betas, entropy;
  const Matrix d2 = SquaredDistances(points);
  Matrix cond = ConditionalAffinities(d2, cfg.perplexity, cfg.entropy_tol, cfg.max_bisect_steps, &betas, &entropy);
  // Identical rows share the affinities and the starting point of their
  // first copy, so they move together.
  std::vector<Eigen::Index> first(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    Eigen::Index f = 0;
    while (f < i && d2(f, i) != 0.0) ++f;
    first[i] = f;
    if (f == i) continue;
    cond.row(i) = cond.row(f);
    std::swap(cond(i, i), cond(i, f));
    betas(i) = betas(f);
    entropy(i) = entropy(f);
  }
  Matrix p = cond + cond.transpose();
  p /= p.sum();
  p = p.cwiseMax(std::numeric_limits<double>::min());
  p.diagonal().setZero();
  double p_log_p = 0.0;
  for (Eigen::Index j = 0; j < n; ++j)
    for (Eigen::Index i = 0; i < n; ++i)
      if (i != j) p_log_p += p(i, j) * std::log(p(i, j));

  Rng rng(cfg.seed);
  Matrix y(n, 2);
  for (Eigen::Index i = 0; i < n; ++i) {
    if (first[i] < i) {
      y.row(i) = y.row(first[i]);
      continue;
    }
    for (int k = 0; k < 2; ++k) y(i, k) = cfg.init_scale * rng.Normal();
  }
  Matrix update = Matrix::Zero(n, 2), gains = Matrix::Ones(n, 2), grad(n, 2);
  Matrix num(n, n);
  Vector row_z(n), row_plognum(n);
  std::vector<double> kl;
  kl.reserve(cfg.iters);

  for (int it = 0; it < cfg.iters; ++it) {
    const double exag = it < cfg.exaggeration_iters ? cfg.exaggeration : 1.0;
    const double momentum = it < cfg.momentum_switch_iter ? cfg.initial_momentum : cfg.final_momentum;
    ParallelFor(static_cast<std::size_t>(n), cfg.threads, [&](std::size_t ui) {
      const auto i = static_cast<Eigen::Index>(ui);
      double z = 0.0, plog = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == i) {
          num(j, i) = 0.0;
          continue;
        }
        const double v = 1.0 / (1.0 + (y.row(i) - y.row(j)).squaredNorm());
        num(j, i) = v;
        z += v;
        plog += p(j, i) * std::log(v);
      }
      row_z(i) = z;
      row_plognum(i) = plog;
    });
    double z = 0.0, plog = 0.0;
    for (Eigen::Index i = 0; i < n; ++i) {
      z += row_z(i);
      plog += row_plognum(i);
    }
    kl.push_back(p_log_p - plog + std::log(z));

    ParallelFor(static_cast<std::size_t>(n), cfg.threads, [&](std::size_t ui) {
      const auto i = static_cast<Eigen::Index>(ui);
      double g0 = 0.0, g1 = 0.0;
      for (Eigen::Index j = 0; j < n; ++j) {
        if (j == i) continue;
        const double m = (exag * p(j, i) - num(j, i) / z) * num(j, i);
        g0 += m * (y(i, 0) - y(j, 0));
        g1 += m * (y(i, 1) - y(j, 1));
      }
      grad(i, 0) = 4.0 * g0;
      grad(i, 1) = 4.0 * g1;
    });
    for (Eigen::Index i = 0; i < n; ++i)
      for (int k = 0; k < 2; ++k) {
        const bool same_sign = (grad(i, k) > 0.0) == (update(i, k) > 0.0);
        gains(i, k) = std::max(same_sign ? gains(i, k) * 0.8 : gains(i, k) + 0.2, 0.01);
        update(i, k) = momentum * update(i, k) - cfg.learning_rate * gains(i, k) * grad(i, k);
      }
    y += update;
    y.rowwise() -= y.colwise().mean();
    if (!y.allFinite()) throw NumericError("t-SNE: embedding diverged at iteration " + std::to_string(it));
  }
  if (trace) {
    trace->betas = std::move(betas);
    trace->entropy = std::move(entropy);
    trace->kl = std::move(kl);
  }
  return y;
}

// ---------------------------------------------------------------------------

EmbeddingPlot ExportPlotData(const Matrix &proj, const std::vector<PlotLabel> &labels) {
  if (proj.cols() != 2) throw InvalidArgument("plot data must be two-dimensional");
  if (static_cast<std::size_t>(proj.rows()) != labels.size())
    throw InvalidArgument("plot data: " + std::to_string(proj.rows()) + " points but " +
                          std::to_string(labels.size()) + " labels");
  if (!proj.allFinite()) throw InvalidArgument("plot data: non-finite coordinate");
  for (const auto &l : labels)
    if (l.style != "normal" && l.style != "disguised")
      throw InvalidArgument("plot data: unknown style '" + l.style + "'");
  return {proj, labels};
}

std::vector<PlotGroup> PlotGroups(const EmbeddingPlot &plot) {
  std::map<std::pair<std::string, int>, std::vector<Eigen::Index>> groups;
  for (std::size_t i = 0; i < plot.labels.size(); ++i) {
    const auto &l = plot.labels[i];
    groups[{l.spk_id, l.style == "normal" ? 0 : 1}].push_back(static_cast<Eigen::Index>(i));
  }
  std::vector<PlotGroup> out;
  for (auto &[key, rows] : groups)
    out.push_back({key.first, key.second == 0 ? "normal" : "disguised", std::move(rows)});
  return out;
}

namespace {

void WriteGroup(std::ostream &os, const EmbeddingPlot &plot, const PlotGroup &g) {
  char buf[96];
  for (Eigen::Index r : g.rows) {
    std::snprintf(buf, sizeof(buf), "\t%.9g\t%.9g\n", plot.points(r, 0), plot.points(r, 1));
    os << g.spk_id << '\t' << g.style << buf;
  }
}

void WriteHeader(std::ostream &os, const std::vector<std::string> &metadata) {
  for (const auto &m : metadata) os << "# " << m << '\n';
  os << "# spk_id\tstyle\tx\ty\n";
}

}  // namespace

void WritePlotData(std::ostream &os, const EmbeddingPlot &plot, const std::vector<std::string> &metadata) {
  WriteHeader(os, metadata);
  for (const auto &g : PlotGroups(plot)) WriteGroup(os, plot, g);
}

std::vector<std::filesystem::path> WritePlotFiles(const std::filesystem::path &dir, const EmbeddingPlot &plot,
                                                  const std::vector<std::string> &metadata) {
  std::filesystem::create_directories(dir);
  std::vector<std::filesystem::path> written;
  auto open = [&](const std::filesystem::path &path) {
    std::ofstream os(path);
    if (!os) throw IoError("cannot write " + path.string());
    written.push_back(path);
    return os;
  };
  {
    std::ofstream all = open(dir / "all.tsv");
    WritePlotData(all, plot, metadata);
  }
  const auto groups = PlotGroups(plot);
  for (std::size_t i = 0; i < groups.size();) {
    std::ofstream os = open(dir / (groups[i].spk_id + ".tsv"));
    std::vector<std::string> meta = metadata;
    meta.push_back("speaker " + groups[i].spk_id);
    meta.push_back("normal: darker");
    meta.push_back("disguised: lighter");
    WriteHeader(os, meta);
    const std::string spk = groups[i].spk_id;
    for (; i < groups.size() && groups[i].spk_id == spk; ++i) WriteGroup(os, plot, groups[i]);
  }
  return written;
}

std::vector<Eigen::Index> SubsampleGroups(const std::vector<PlotLabel> &labels, int max_per_group,
                                          std::uint64_t seed) {
  if (max_per_group < 1) throw InvalidArgument("SubsampleGroups: max_per_group must be >= 1");
  std::map<std::pair<std::string, std::string>, std::vector<Eigen::Index>> groups;
  for (std::size_t i = 0; i < labels.size(); ++i)
    groups[{labels[i].spk_id, labels[i].style}].push_back(static_cast<Eigen::Index>(i));
  Rng rng(seed);
  std::vector<Eigen::Index> keep;
  for (auto &[key, rows] : groups) {
    if (rows.size() > static_cast<std::size_t>(max_per_group)) {
      rng.Shuffle(rows);
      rows.resize(max_per_group);
    }
    keep.insert(keep.end(), rows.begin(), rows.end());
  }
  std::sort(keep.begin(), keep.end());
  return keep;
}

std::vector<std::string> TsneMetadata(const TsneConfig &cfg) {
  char buf[256];
  std::snprintf(buf, sizeof(buf),
                "tsne perplexity=%g iters=%d seed=%llu learning_rate=%g exaggeration=%g exaggeration_iters=%d "
                "momentum=%g->%g@%d init_scale=%g entropy_tol=%g",
                cfg.perplexity, cfg.iters, static_cast<unsigned long long>(cfg.seed), cfg.learning_rate,
                cfg.exaggeration, cfg.exaggeration_iters, cfg.initial_momentum, cfg.final_momentum,
                cfg.momentum_switch_iter, cfg.init_scale, cfg.entropy_tol);
  return {buf};
}

}  // namespace tev
