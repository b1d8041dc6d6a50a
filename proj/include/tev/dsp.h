// tev/dsp.h

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

#ifndef TEV_DSP_H_
#define TEV_DSP_H_

#include <string>

#include "tev/common.h"
#include "tev/corpus.h"

namespace tev {

/// Acoustic frontend settings. Defaults are the MFCC path; use
/// FbankDefaults() for the 40-bin filterbank path.
struct FrontendConfig {
  double frame_len_ms = 25.0;
  double frame_shift_ms = 10.0;
  double preemphasis = 0.97;
  int n_mel_bins = 23;
  int n_ceps = 19;
  int fft_size = 512;
  double dither = 0.0;
  double low_freq_hz = 20.0;
  double high_freq_hz = 7600.0;
  double energy_floor = 1e-10;
  std::uint64_t dither_seed = 0;
  bool cmvn = true;  // per-utterance mean and variance normalization

  static FrontendConfig MfccDefaults() { return {}; }
  static FrontendConfig FbankDefaults() {
    FrontendConfig c;
    c.n_mel_bins = 40;
    return c;
  }

  int FrameLength(int sample_rate) const;
  int FrameShift(int sample_rate) const;
  /// Throws InvalidArgument when the invariants do not hold.
  void Validate(int sample_rate) const;
};

/// frames x dims, one row per frame.
struct FeatureMatrix {
  Matrix values;
  std::string label;

  Eigen::Index frames() const { return values.rows(); }
  Eigen::Index dims() const { return values.cols(); }
};

/// Number of frames for n samples: 1 + floor((n - len) / shift), 0 if n < len.
int NumFrames(std::size_t n_samples, int frame_len, int frame_shift);

double MelScale(double hz);
double InverseMelScale(double mel);

/// n_bins x (fft_size/2 + 1) triangular filters, equally spaced on the mel
/// scale between low_hz and high_hz.
Matrix MelFilterbank(int n_bins, int fft_size, double sample_rate, double low_hz, double high_hz);

/// Orthonormal DCT-II basis, n_out x n_in.
Matrix DctMatrix(int n_out, int n_in);

/// Natural log of floored mel-filterbank energies (power spectrum).
FeatureMatrix Fbank(const AudioSegment &seg, const FrontendConfig &cfg = FrontendConfig::FbankDefaults());

/// Cepstra 1..n_ceps of the log-mel energies plus the log raw frame energy.
FeatureMatrix Mfcc(const AudioSegment &seg, const FrontendConfig &cfg = FrontendConfig::MfccDefaults());

/// Regression deltas with edge replication; order 1 or 2.
FeatureMatrix AddDeltas(const FeatureMatrix &f, int order = 2, int window = 2);

/// Concatenates frames t-left .. t+right (edge-replicated) per frame.
FeatureMatrix Splice(const FeatureMatrix &f, int left = 4, int right = 4);

/// Per-utterance mean (and, with >= 2 frames, variance) normalization.
FeatureMatrix Cmvn(const FeatureMatrix &f, bool normalize_variance = true);

/// Frontend recipes used by the two systems.
FeatureMatrix IvectorFeatures(const AudioSegment &seg, const FrontendConfig &cfg);  // mfcc+e, deltas, optional cmvn
FeatureMatrix DvectorFeatures(const AudioSegment &seg, const FrontendConfig &cfg, int context = 4);  // fbank, optional cmvn, splice

}  // namespace tev

#endif  // TEV_DSP_H_
