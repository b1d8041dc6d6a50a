// dsp.cc

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
#include <complex>
#include <vector>

#include <unsupported/Eigen/FFT>

#include "tev/dsp.h"

namespace tev {

int FrontendConfig::FrameLength(int sample_rate) const {
  return static_cast<int>(std::lround(frame_len_ms * 1e-3 * sample_rate));
}

int FrontendConfig::FrameShift(int sample_rate) const {
  return static_cast<int>(std::lround(frame_shift_ms * 1e-3 * sample_rate));
}

void FrontendConfig::Validate(int sample_rate) const {
  const int len = FrameLength(sample_rate), shift = FrameShift(sample_rate);
  if (len < 1 || shift < 1) throw InvalidArgument("FrontendConfig: empty frame");
  if (shift > len) throw InvalidArgument("FrontendConfig: frame shift exceeds frame length");
  if (n_mel_bins < 1 || n_ceps < 1 || n_ceps >= n_mel_bins)
    throw InvalidArgument("FrontendConfig: need 1 <= n_ceps < n_mel_bins");
  if (fft_size < len || (fft_size & (fft_size - 1)) != 0)
    throw InvalidArgument("FrontendConfig: fft_size must be a power of two >= frame length");
  if (!(low_freq_hz >= 0.0 && high_freq_hz > low_freq_hz && high_freq_hz <= 0.5 * sample_rate))
    throw InvalidArgument("FrontendConfig: bad mel frequency range");
}

int NumFrames(std::size_t n_samples, int frame_len, int frame_shift) {
  if (n_samples < static_cast<std::size_t>(frame_len)) return 0;
  return 1 + static_cast<int>((n_samples - frame_len) / frame_shift);
}

double MelScale(double hz) { return 1127.0 * std::log(1.0 + hz / 700.0); }
double InverseMelScale(double mel) { return 700.0 * (std::exp(mel / 1127.0) - 1.0); }

Matrix MelFilterbank(int n_bins, int fft_size, double sample_rate, double low_hz, double high_hz) {
  const int n_freq = fft_size / 2 + 1;
  const double mel_lo = MelScale(low_hz), mel_hi = MelScale(high_hz);
  const double step = (mel_hi - mel_lo) / (n_bins + 1);
  Matrix fb = Matrix::Zero(n_bins, n_freq);
  for (int b = 0; b < n_bins; ++b) {
    const double left = mel_lo + b * step, center = left + step, right = center + step;
    for (int k = 0; k < n_freq; ++k) {
      const double mel = MelScale(k * sample_rate / fft_size);
      if (mel > left && mel < center)
        fb(b, k) = (mel - left) / (center - left);
      else if (mel >= center && mel < right)
        fb(b, k) = (right - mel) / (right - center);
    }
  }
  return fb;
}

Matrix DctMatrix(int n_out, int n_in) {
  Matrix d(n_out, n_in);
  for (int k = 0; k < n_out; ++k) {
    const double norm = std::sqrt((k == 0 ? 1.0 : 2.0) / n_in);
    for (int n = 0; n < n_in; ++n) d(k, n) = norm * std::cos(M_PI * k * (n + 0.5) / n_in);
  }
  return d;
}

namespace {

struct Spectra {
  Matrix power;              // frames x (fft/2+1)
  Eigen::VectorXd log_energy;  // log raw frame energy
};

Spectra PowerSpectra(const AudioSegment &seg, const FrontendConfig &cfg) {
  cfg.Validate(seg.sample_rate);
  const int len = cfg.FrameLength(seg.sample_rate);
  const int shift = cfg.FrameShift(seg.sample_rate);
  const int n_frames = NumFrames(seg.samples.size(), len, shift);
  if (n_frames < 1)
    throw InvalidArgument("segment of " + std::to_string(seg.samples.size()) +
                          " samples is shorter than one frame (" + std::to_string(len) + ")");
  for (double s : seg.samples)
    if (!std::isfinite(s)) throw InvalidArgument("segment contains non-finite samples");

  std::vector<double> window(len);
  for (int i = 0; i < len; ++i)
    window[i] = 0.54 - 0.46 * std::cos(2.0 * M_PI * i / (len - 1));

  Rng dither_rng(cfg.dither_seed);
  Eigen::FFT<double> fft;
  const int n_freq = cfg.fft_size / 2 + 1;
  Spectra out{Matrix(n_frames, n_freq), Eigen::VectorXd(n_frames)};
  std::vector<double> frame(cfg.fft_size);
  std::vector<std::complex<double>> spectrum;
  for (int t = 0; t < n_frames; ++t) {
    std::fill(frame.begin(), frame.end(), 0.0);
    const std::size_t off = static_cast<std::size_t>(t) * shift;
    double energy = 0.0;
    for (int i = 0; i < len; ++i) {
      double v = seg.samples[off + i];
      if (cfg.dither > 0.0) v += cfg.dither * dither_rng.Normal();
      frame[i] = v;
      energy += v * v;
    }
    out.log_energy(t) = std::log(std::max(energy, cfg.energy_floor));
    for (int i = len - 1; i > 0; --i) frame[i] -= cfg.preemphasis * frame[i - 1];
    frame[0] -= cfg.preemphasis * frame[0];
    for (int i = 0; i < len; ++i) frame[i] *= window[i];
    fft.fwd(spectrum, frame);
    for (int k = 0; k < n_freq; ++k) out.power(t, k) = std::norm(spectrum[k]);
  }
  return out;
}

Matrix LogMel(const Matrix &power, const FrontendConfig &cfg, int sample_rate) {
  const Matrix fb =
      MelFilterbank(cfg.n_mel_bins, cfg.fft_size, sample_rate, cfg.low_freq_hz, cfg.high_freq_hz);
  Matrix mel = power * fb.transpose();
  return mel.unaryExpr([&](double e) { return std::log(std::max(e, cfg.energy_floor)); });
}

}  // namespace

FeatureMatrix Fbank(const AudioSegment &seg, const FrontendConfig &cfg) {
  const Spectra s = PowerSpectra(seg, cfg);
  return {LogMel(s.power, cfg, seg.sample_rate), "fbank" + std::to_string(cfg.n_mel_bins)};
}

FeatureMatrix Mfcc(const AudioSegment &seg, const FrontendConfig &cfg) {
  const Spectra s = PowerSpectra(seg, cfg);
  const Matrix logmel = LogMel(s.power, cfg, seg.sample_rate);
  // Rows 1..n_ceps of the DCT; c0 is replaced by the raw log energy.
  const Matrix dct = DctMatrix(cfg.n_ceps + 1, cfg.n_mel_bins).bottomRows(cfg.n_ceps);
  FeatureMatrix f;
  f.values.resize(logmel.rows(), cfg.n_ceps + 1);
  f.values.leftCols(cfg.n_ceps) = logmel * dct.transpose();
  f.values.col(cfg.n_ceps) = s.log_energy;
  f.label = "mfcc" + std::to_string(cfg.n_ceps) + "+e";
  return f;
}

namespace {

Matrix Delta(const Matrix &x, int window) {
  const Eigen::Index n = x.rows();
  double denom = 0.0;
  for (int k = 1; k <= window; ++k) denom += 2.0 * k * k;
  Matrix d = Matrix::Zero(n, x.cols());
  for (Eigen::Index t = 0; t < n; ++t) {
    for (int k = 1; k <= window; ++k) {
      const Eigen::Index fwd = std::min<Eigen::Index>(t + k, n - 1);
      const Eigen::Index back = std::max<Eigen::Index>(t - k, 0);
      d.row(t) += k * (x.row(fwd) - x.row(back));
    }
  }
  return d / denom;
}

}  // namespace

FeatureMatrix AddDeltas(const FeatureMatrix &f, int order, int window) {
  if (order < 1 || order > 2) throw InvalidArgument("AddDeltas: order must be 1 or 2");
  if (window < 1) throw InvalidArgument("AddDeltas: window must be >= 1");
  const Eigen::Index d = f.dims();
  FeatureMatrix out;
  out.values.resize(f.frames(), d * (1 + order));
  out.values.leftCols(d) = f.values;
  Matrix prev = f.values;
  for (int o = 1; o <= order; ++o) {
    prev = Delta(prev, window);
    out.values.middleCols(d * o, d) = prev;
  }
  out.label = f.label + (order == 2 ? "+d+dd" : "+d") + ":" + std::to_string(out.values.cols());
  return out;
}

FeatureMatrix Splice(const FeatureMatrix &f, int left, int right) {
  if (left < 0 || right < 0) throw InvalidArgument("Splice: negative context");
  const Eigen::Index n = f.frames(), d = f.dims(), width = left + right + 1;
  FeatureMatrix out;
  out.values.resize(n, d * width);
  for (Eigen::Index t = 0; t < n; ++t)
    for (Eigen::Index j = 0; j < width; ++j) {
      const Eigen::Index src = std::clamp<Eigen::Index>(t - left + j, 0, n - 1);
      out.values.block(t, j * d, 1, d) = f.values.row(src);
    }
  out.label = f.label + "x" + std::to_string(width) + ":" + std::to_string(d * width);
  return out;
}

FeatureMatrix Cmvn(const FeatureMatrix &f, bool normalize_variance) {
  FeatureMatrix out{f.values, f.label};
  if (f.frames() == 0) return out;
  const Eigen::RowVectorXd mean = f.values.colwise().mean();
  out.values.rowwise() -= mean;
  if (normalize_variance && f.frames() >= 2) {
    const Eigen::RowVectorXd sd =
        (out.values.array().square().colwise().sum() / static_cast<double>(f.frames())).sqrt();
    for (Eigen::Index j = 0; j < out.values.cols(); ++j)
      if (sd(j) > 0.0) out.values.col(j) /= sd(j);
  }
  return out;
}

FeatureMatrix IvectorFeatures(const AudioSegment &seg, const FrontendConfig &cfg) {
  FeatureMatrix f = AddDeltas(Mfcc(seg, cfg), 2, 2);
  return cfg.cmvn ? Cmvn(f) : f;
}

FeatureMatrix DvectorFeatures(const AudioSegment &seg, const FrontendConfig &cfg, int context) {
  const FeatureMatrix f = Fbank(seg, cfg);
  return Splice(cfg.cmvn ? Cmvn(f) : f, context, context);
}

}  // namespace tev
