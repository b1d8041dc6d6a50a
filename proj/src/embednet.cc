// embednet.cc

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
#include <limits>
#include <numeric>

#include "tev/embednet.h"

namespace tev {

void FrameNetConfig::Validate() const {
  if (feature_dim < 1) throw InvalidArgument("FrameNetConfig: feature_dim must be >= 1");
  if (n_speakers < 2) throw InvalidArgument("FrameNetConfig: need at least 2 output speakers");
  if (context_frames < 1 || input_dim % context_frames != 0)
    throw InvalidArgument("FrameNetConfig: input_dim must be a multiple of context_frames");
  if (batch_size < 1 || epochs < 0 || lr < 0.0 || momentum < 0.0 || momentum >= 1.0)
    throw InvalidArgument("FrameNetConfig: bad optimizer settings");
  for (const auto &t : tdnn_layers)
    if (t.offsets.empty() || t.units < 1) throw InvalidArgument("FrameNetConfig: empty time-delay layer");
}

int NetLayer::InputDim() const {
  switch (kind) {
    case Kind::kConv: return in_channels * in_height * in_width;
    case Kind::kTdnn: return static_cast<int>(w.cols() / static_cast<Eigen::Index>(offsets.size()));
    case Kind::kAffine: return static_cast<int>(w.cols());
  }
  return 0;
}

int NetLayer::OutputDim() const {
  if (kind == Kind::kConv) return static_cast<int>(w.rows()) * out_height * out_width;
  return static_cast<int>(w.rows());
}

std::string NetLayer::Tag() const {
  switch (kind) {
    case Kind::kConv: return "conv";
    case Kind::kTdnn: return "tdnn";
    case Kind::kAffine: return "affine";
  }
  return "?";
}

namespace {

void FillNormal(Matrix &m, double sd, Rng &rng) {
  for (Eigen::Index j = 0; j < m.cols(); ++j)
    for (Eigen::Index i = 0; i < m.rows(); ++i) m(i, j) = sd * rng.Normal();
}

void CheckLayers(const FrameNetConfig &cfg, const std::vector<NetLayer> &layers) {
  if (layers.size() < 2) throw InvalidArgument("FrameNet: need at least feature and output layers");
  int dim = cfg.input_dim;
  for (const auto &l : layers) {
    if (l.InputDim() != dim || l.b.size() != l.w.rows())
      throw InvalidArgument("FrameNet: inconsistent " + l.Tag() + " layer shapes");
    if (l.kind == NetLayer::Kind::kConv &&
        l.w.cols() != static_cast<Eigen::Index>(l.in_channels) * l.time_kernel * l.freq_kernel)
      throw InvalidArgument("FrameNet: conv kernel shape mismatch");
    dim = l.OutputDim();
  }
  if (dim != cfg.n_speakers) throw InvalidArgument("FrameNet: output layer does not match n_speakers");
  if (layers[layers.size() - 2].OutputDim() != cfg.feature_dim)
    throw InvalidArgument("FrameNet: feature layer does not match feature_dim");
}

}  // namespace

FrameNet::FrameNet(const FrameNetConfig &cfg, std::uint64_t seed) : cfg_(cfg) {
  cfg_.Validate();
  Rng rng(seed);
  int channels = 1, height = cfg.context_frames, width = cfg.input_dim / cfg.context_frames;
  for (const auto &cb : cfg.conv_blocks) {
    NetLayer l;
    l.kind = NetLayer::Kind::kConv;
    l.in_channels = channels;
    l.in_height = height;
    l.in_width = width;
    l.time_kernel = cb.time_kernel;
    l.freq_kernel = cb.freq_kernel;
    l.pool = cb.pool;
    l.out_height = height - cb.time_kernel + 1;
    l.conv_width = width - cb.freq_kernel + 1;
    l.out_width = cb.pool > 0 ? l.conv_width / cb.pool : 0;
    if (l.out_height < 1 || l.out_width < 1 || cb.out_channels < 1)
      throw InvalidArgument("FrameNetConfig: conv block does not fit its input");
    const int fan_in = channels * cb.time_kernel * cb.freq_kernel;
    l.w.resize(cb.out_channels, fan_in);
    FillNormal(l.w, std::sqrt(2.0 / fan_in), rng);
    l.b = Vector::Zero(cb.out_channels);
    channels = cb.out_channels;
    height = l.out_height;
    width = l.out_width;
    layers_.push_back(std::move(l));
  }
  int dim = channels * height * width;
  for (const auto &tc : cfg.tdnn_layers) {
    NetLayer l;
    l.kind = NetLayer::Kind::kTdnn;
    l.offsets = tc.offsets;
    const int fan_in = dim * static_cast<int>(tc.offsets.size());
    l.w.resize(tc.units, fan_in);
    FillNormal(l.w, std::sqrt(2.0 / fan_in), rng);
    l.b = Vector::Zero(tc.units);
    dim = tc.units;
    layers_.push_back(std::move(l));
  }
  NetLayer feat;
  feat.w.resize(cfg.feature_dim, dim);
  FillNormal(feat.w, std::sqrt(2.0 / dim), rng);
  feat.b = Vector::Zero(cfg.feature_dim);
  layers_.push_back(std::move(feat));
  NetLayer out;
  out.relu = false;
  out.w.resize(cfg.n_speakers, cfg.feature_dim);
  FillNormal(out.w, 0.1 / std::sqrt(static_cast<double>(cfg.feature_dim)), rng);
  out.b = Vector::Zero(cfg.n_speakers);
  layers_.push_back(std::move(out));
  CheckLayers(cfg_, layers_);
}

FrameNet::FrameNet(FrameNetConfig cfg, std::vector<NetLayer> layers)
    : cfg_(std::move(cfg)), layers_(std::move(layers)) {
  cfg_.Validate();
  CheckLayers(cfg_, layers_);
}

std::size_t FrameNet::NumParams() const {
  std::size_t n = 0;
  for (const auto &l : layers_) n += l.w.size() + l.b.size();
  return n;
}

namespace {

// Per-layer forward state kept for back-propagation.
struct LayerCache {
  Matrix input;   // in_dim x F
  Matrix cols;    // conv: im2col matrix; tdnn: spliced input
  Matrix act;     // conv: post-ReLU conv map (out_ch x F*oh*cw); others: post-activation output
  Eigen::Matrix<Eigen::Index, Eigen::Dynamic, Eigen::Dynamic> argmax;  // conv pooling
};

Matrix ConvForward(const NetLayer &l, const Matrix &x, LayerCache *cache) {
  const Eigen::Index F = x.cols();
  const int kt = l.time_kernel, kf = l.freq_kernel, iw = l.in_width, ih = l.in_height;
  const int oh = l.out_height, cw = l.conv_width, ow = l.out_width;
  const Eigen::Index K = l.w.cols();
  Matrix cols(K, F * oh * cw);
  for (Eigen::Index f = 0; f < F; ++f)
    for (int h = 0; h < oh; ++h)
      for (int w = 0; w < cw; ++w) {
        double *dst = cols.col((f * oh + h) * cw + w).data();
        for (int c = 0; c < l.in_channels; ++c)
          for (int i = 0; i < kt; ++i) {
            const double *src = x.col(f).data() + (c * ih + h + i) * iw + w;
            std::copy(src, src + kf, dst + (c * kt + i) * kf);
          }
      }
  Matrix z = l.w * cols;
  z.colwise() += l.b;
  z = z.cwiseMax(0.0);

  const Eigen::Index out_ch = l.w.rows();
  Matrix out(out_ch * oh * ow, F);
  Eigen::Matrix<Eigen::Index, Eigen::Dynamic, Eigen::Dynamic> argmax(out.rows(), F);
  for (Eigen::Index f = 0; f < F; ++f)
    for (Eigen::Index o = 0; o < out_ch; ++o)
      for (int h = 0; h < oh; ++h)
        for (int j = 0; j < ow; ++j) {
          const Eigen::Index base = (f * oh + h) * cw + j * l.pool;
          Eigen::Index best = base;
          for (int q = 1; q < l.pool; ++q)
            if (z(o, base + q) > z(o, best)) best = base + q;
          const Eigen::Index r = (o * oh + h) * ow + j;
          out(r, f) = z(o, best);
          argmax(r, f) = best;
        }
  if (cache) {
    cache->cols = std::move(cols);
    cache->act = std::move(z);
    cache->argmax = std::move(argmax);
  }
  return out;
}

Matrix ConvBackward(const NetLayer &l, const LayerCache &cache, const Matrix &dout, Matrix &dw,
                    Vector &db, bool need_dx) {
  const Eigen::Index F = dout.cols(), out_ch = l.w.rows();
  Matrix dz = Matrix::Zero(out_ch, cache.act.cols());
  const Eigen::Index per_ch = dout.rows() / out_ch;
  for (Eigen::Index f = 0; f < F; ++f)
    for (Eigen::Index r = 0; r < dout.rows(); ++r) {
      const Eigen::Index o = r / per_ch;
      const Eigen::Index col = cache.argmax(r, f);
      if (cache.act(o, col) > 0.0) dz(o, col) += dout(r, f);
    }
  dw = dz * cache.cols.transpose();
  db = dz.rowwise().sum();
  if (!need_dx) return {};
  const Matrix dcols = l.w.transpose() * dz;
  const int kt = l.time_kernel, kf = l.freq_kernel, iw = l.in_width, ih = l.in_height;
  const int oh = l.out_height, cw = l.conv_width;
  Matrix dx = Matrix::Zero(static_cast<Eigen::Index>(l.in_channels) * ih * iw, F);
  for (Eigen::Index f = 0; f < F; ++f)
    for (int h = 0; h < oh; ++h)
      for (int w = 0; w < cw; ++w) {
        const double *src = dcols.col((f * oh + h) * cw + w).data();
        for (int c = 0; c < l.in_channels; ++c)
          for (int i = 0; i < kt; ++i) {
            double *dst = dx.col(f).data() + (c * ih + h + i) * iw + w;
            const double *s = src + (c * kt + i) * kf;
            for (int j = 0; j < kf; ++j) dst[j] += s[j];
          }
      }
  return dx;
}

Matrix SpliceSegments(const Matrix &x, const Segments &segs, const std::vector<int> &offsets) {
  const Eigen::Index d = x.rows();
  Matrix s(d * static_cast<Eigen::Index>(offsets.size()), x.cols());
  for (const auto &[off, len] : segs)
    for (Eigen::Index t = 0; t < len; ++t)
      for (std::size_t k = 0; k < offsets.size(); ++k) {
        const Eigen::Index src = off + std::clamp<Eigen::Index>(t + offsets[k], 0, len - 1);
        s.block(static_cast<Eigen::Index>(k) * d, off + t, d, 1) = x.col(src);
      }
  return s;
}

Matrix UnspliceSegments(const Matrix &ds, const Segments &segs, const std::vector<int> &offsets,
                        Eigen::Index d) {
  Matrix dx = Matrix::Zero(d, ds.cols());
  for (const auto &[off, len] : segs)
    for (Eigen::Index t = 0; t < len; ++t)
      for (std::size_t k = 0; k < offsets.size(); ++k) {
        const Eigen::Index src = off + std::clamp<Eigen::Index>(t + offsets[k], 0, len - 1);
        dx.col(src) += ds.block(static_cast<Eigen::Index>(k) * d, off + t, d, 1);
      }
  return dx;
}

Matrix AffineForward(const NetLayer &l, const Matrix &x) {
  Matrix z = l.w * x;
  z.colwise() += l.b;
  if (l.relu) z = z.cwiseMax(0.0);
  return z;
}

// Runs all layers; returns the final logits (n_speakers x F).
Matrix RunForward(const std::vector<NetLayer> &layers, const Matrix &inputs, const Segments &segs,
                  std::vector<LayerCache> *caches) {
  if (caches) caches->assign(layers.size(), LayerCache{});
  Matrix h = inputs;
  for (std::size_t i = 0; i < layers.size(); ++i) {
    const NetLayer &l = layers[i];
    LayerCache *c = caches ? &(*caches)[i] : nullptr;
    Matrix out;
    if (l.kind == NetLayer::Kind::kConv) {
      out = ConvForward(l, h, c);
    } else if (l.kind == NetLayer::Kind::kTdnn) {
      Matrix s = SpliceSegments(h, segs, l.offsets);
      out = AffineForward(l, s);
      if (c) c->cols = std::move(s);
    } else {
      out = AffineForward(l, h);
    }
    if (c) {
      c->input = std::move(h);
      if (l.kind != NetLayer::Kind::kConv) c->act = out;
    }
    h = std::move(out);
  }
  return h;
}

}  // namespace

Matrix Softmax(const Matrix &logits) {
  Matrix p(logits.rows(), logits.cols());
  for (Eigen::Index r = 0; r < logits.rows(); ++r) {
    const double m = logits.row(r).maxCoeff();
    p.row(r) = (logits.row(r).array() - m).exp();
    p.row(r) /= p.row(r).sum();
  }
  return p;
}

FrameNet::Output FrameNet::Forward(const FeatureMatrix &frames) const {
  if (frames.dims() != cfg_.input_dim)
    throw InvalidArgument("FrameNet: input dim " + std::to_string(frames.dims()) + " != " +
                          std::to_string(cfg_.input_dim));
  if (frames.frames() < 1) throw InvalidArgument("FrameNet: no input frames");
  std::vector<LayerCache> caches;
  const Segments segs = {{0, frames.frames()}};
  Matrix logits = RunForward(layers_, frames.values.transpose(), segs, &caches);
  return {caches[FeatureLayer()].act.transpose(), logits.transpose()};
}

double FrameNet::Loss(const Batch &batch, std::vector<std::pair<Matrix, Vector>> *grads,
                      double *accuracy) const {
  const Eigen::Index F = batch.inputs.cols();
  if (batch.inputs.rows() != cfg_.input_dim || static_cast<Eigen::Index>(batch.labels.size()) != F || F == 0)
    throw InvalidArgument("FrameNet::Loss: malformed batch");
  std::vector<LayerCache> caches;
  const Matrix logits = RunForward(layers_, batch.inputs, batch.segments, grads ? &caches : nullptr);

  // Column-wise softmax cross-entropy.
  Matrix dlogits(logits.rows(), F);
  double loss = 0.0;
  Eigen::Index correct = 0;
  for (Eigen::Index f = 0; f < F; ++f) {
    const int y = batch.labels[f];
    if (y < 0 || y >= cfg_.n_speakers) throw InvalidArgument("FrameNet::Loss: label out of range");
    Eigen::Index arg;
    const double m = logits.col(f).maxCoeff(&arg);
    if (arg == y) ++correct;
    const Vector e = (logits.col(f).array() - m).exp();
    const double z = e.sum();
    loss += std::log(z) + m - logits(y, f);
    dlogits.col(f) = e / z;
    dlogits(y, f) -= 1.0;
  }
  loss /= static_cast<double>(F);
  if (accuracy) *accuracy = static_cast<double>(correct) / static_cast<double>(F);
  if (!grads) return loss;

  dlogits /= static_cast<double>(F);
  grads->resize(layers_.size());
  Matrix d = std::move(dlogits);
  for (std::size_t i = layers_.size(); i-- > 0;) {
    const NetLayer &l = layers_[i];
    const LayerCache &c = caches[i];
    auto &[dw, db] = (*grads)[i];
    const bool need_dx = i > 0;
    if (l.kind == NetLayer::Kind::kConv) {
      d = ConvBackward(l, c, d, dw, db, need_dx);
      continue;
    }
    if (l.relu) d = d.cwiseProduct((c.act.array() > 0.0).cast<double>().matrix());
    const Matrix &in = l.kind == NetLayer::Kind::kTdnn ? c.cols : c.input;
    dw = d * in.transpose();
    db = d.rowwise().sum();
    if (!need_dx) break;
    Matrix dx = l.w.transpose() * d;
    if (l.kind == NetLayer::Kind::kTdnn) dx = UnspliceSegments(dx, batch.segments, l.offsets, c.input.rows());
    d = std::move(dx);
  }
  return loss;
}

FrameNet::Batch MakeBatch(const std::vector<const TrainingExample *> &examples) {
  FrameNet::Batch b;
  Eigen::Index total = 0, dim = -1;
  for (const auto *e : examples) {
    if (e->frames.frames() < 1) throw InvalidArgument("MakeBatch: empty utterance");
    if (dim >= 0 && e->frames.dims() != dim) throw InvalidArgument("MakeBatch: inconsistent dims");
    dim = e->frames.dims();
    total += e->frames.frames();
  }
  if (dim < 0) throw InvalidArgument("MakeBatch: empty batch");
  b.inputs.resize(dim, total);
  Eigen::Index off = 0;
  for (const auto *e : examples) {
    const Eigen::Index n = e->frames.frames();
    b.inputs.middleCols(off, n) = e->frames.values.transpose();
    b.segments.emplace_back(off, n);
    b.labels.insert(b.labels.end(), static_cast<std::size_t>(n), e->label);
    off += n;
  }
  return b;
}

FrameNet TrainFrameNet(FrameNet net, const std::vector<TrainingExample> &data, const FrameNetConfig &cfg,
                       TrainTrace *trace) {
  cfg.Validate();
  if (data.empty()) throw InvalidArgument("TrainFrameNet: no training data");
  for (const auto &e : data)
    if (e.label < 0 || e.label >= net.config().n_speakers)
      throw InvalidArgument("TrainFrameNet: label out of range");

  Rng rng(cfg.seed ^ 0x5eedf00dULL);
  std::vector<std::pair<Matrix, Vector>> velocity;
  for (const auto &l : net.layers())
    velocity.emplace_back(Matrix::Zero(l.w.rows(), l.w.cols()), Vector::Zero(l.b.size()));
  std::vector<std::size_t> order(data.size());
  std::iota(order.begin(), order.end(), 0);
  double lr = cfg.lr;
  double prev_loss = std::numeric_limits<double>::infinity();
  std::vector<std::pair<Matrix, Vector>> grads;

  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    rng.Shuffle(order);
    double loss_sum = 0.0, acc_sum = 0.0;
    Eigen::Index frame_sum = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      std::vector<const TrainingExample *> members;
      for (std::size_t i = start; i < std::min(order.size(), start + cfg.batch_size); ++i)
        members.push_back(&data[order[i]]);
      const FrameNet::Batch batch = MakeBatch(members);
      double acc = 0.0;
      const double loss = net.Loss(batch, &grads, &acc);
      if (!std::isfinite(loss))
        throw NumericError("TrainFrameNet: loss diverged in epoch " + std::to_string(epoch + 1));
      const Eigen::Index n = batch.inputs.cols();
      loss_sum += loss * n;
      acc_sum += acc * n;
      frame_sum += n;
      auto &layers = net.mutable_layers();
      for (std::size_t i = 0; i < layers.size(); ++i) {
        velocity[i].first = cfg.momentum * velocity[i].first - lr * grads[i].first;
        velocity[i].second = cfg.momentum * velocity[i].second - lr * grads[i].second;
        layers[i].w += velocity[i].first;
        layers[i].b += velocity[i].second;
      }
    }
    const double epoch_loss = loss_sum / static_cast<double>(frame_sum);
    if (!std::isfinite(epoch_loss))
      throw NumericError("TrainFrameNet: loss diverged in epoch " + std::to_string(epoch + 1));
    if (trace) {
      trace->epoch_loss.push_back(epoch_loss);
      trace->epoch_accuracy.push_back(acc_sum / static_cast<double>(frame_sum));
      trace->epoch_lr.push_back(lr);
    }
    if (epoch_loss >= prev_loss) lr *= 0.5;
    prev_loss = epoch_loss;
  }
  return net;
}

GradCheckResult GradCheck(const FrameNet &net, const FrameNet::Batch &batch, std::uint64_t seed,
                          int per_tensor, double eps) {
  std::vector<std::pair<Matrix, Vector>> grads;
  net.Loss(batch, &grads);
  FrameNet probe = net;
  Rng rng(seed);
  GradCheckResult result;
  auto check = [&](double &param, double analytic) {
    const double saved = param;
    param = saved + eps;
    const double up = probe.Loss(batch);
    param = saved - eps;
    const double down = probe.Loss(batch);
    param = saved;
    const double numeric = (up - down) / (2.0 * eps);
    // Relative error with a 1e-6 floor.
    const double denom = std::max({std::abs(analytic), std::abs(numeric), 1e-6});
    ++result.n_checked;
    return std::abs(analytic - numeric) / denom;
  };
  auto &layers = probe.mutable_layers();
  for (std::size_t i = 0; i < layers.size(); ++i) {
    double worst = 0.0;
    for (int which = 0; which < 2; ++which) {
      const Eigen::Index n = which == 0 ? layers[i].w.size() : layers[i].b.size();
      std::vector<Eigen::Index> idx(n);
      std::iota(idx.begin(), idx.end(), 0);
      rng.Shuffle(idx);
      idx.resize(std::min<Eigen::Index>(n, per_tensor));
      for (Eigen::Index k : idx) {
        double &p = which == 0 ? layers[i].w.data()[k] : layers[i].b.data()[k];
        const double g = which == 0 ? grads[i].first.data()[k] : grads[i].second.data()[k];
        worst = std::max(worst, check(p, g));
      }
    }
    result.per_layer.emplace_back(layers[i].Tag(), worst);
    result.max_rel_error = std::max(result.max_rel_error, worst);
  }
  return result;
}

SpeakerVector AverageFrameFeatures(const Matrix &frame_features, const std::string &utt_id) {
  if (frame_features.rows() < 1) throw InvalidArgument("d-vector: utterance has no frames");
  return {frame_features.colwise().mean().transpose(), VectorKind::kDvector, utt_id};
}

SpeakerVector Dvector(const FrameNet &net, const FeatureMatrix &frames, const std::string &utt_id) {
  if (frames.frames() < 1) throw InvalidArgument("d-vector: utterance has no frames");
  return AverageFrameFeatures(net.Forward(frames).features, utt_id);
}

}  // namespace tev
