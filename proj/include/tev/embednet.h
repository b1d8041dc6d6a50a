// tev/embednet.h

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

// Frame-level speaker network: convolution over the spliced time x frequency
// patch of every frame, time-delay layers over neighbouring frames of the
// same utterance, a rectified bottleneck whose activations are the
// frame-level speaker features, and a softmax over training speakers.

#ifndef TEV_EMBEDNET_H_
#define TEV_EMBEDNET_H_

#include <string>
#include <utility>
#include <vector>

#include "tev/common.h"
#include "tev/dsp.h"
#include "tev/tvspace.h"

namespace tev {

struct ConvBlockConfig {
  int out_channels = 8;
  int time_kernel = 4;
  int freq_kernel = 8;
  int pool = 2;  // max-pool width along frequency
};

struct TdnnLayerConfig {
  std::vector<int> offsets;
  int units = 128;
};

struct FrameNetConfig {
  int input_dim = 360;
  int context_frames = 9;  // input is viewed as context_frames x (input_dim / context_frames)
  std::vector<ConvBlockConfig> conv_blocks = {{8, 4, 8, 2}, {16, 3, 4, 2}};
  std::vector<TdnnLayerConfig> tdnn_layers = {{{-2, 0, 2}, 128}, {{-4, 0, 4}, 128}};
  int feature_dim = 16;
  int n_speakers = 20;
  double lr = 0.01;
  double momentum = 0.9;
  int batch_size = 8;  // utterances per minibatch
  int epochs = 20;
  std::uint64_t seed = 0;

  void Validate() const;
};

/// One layer's parameters and static geometry. Conv layers see each frame
/// as a channels x height(time) x width(freq) tensor flattened as [c][h][w].
struct NetLayer {
  enum class Kind { kConv, kTdnn, kAffine };
  Kind kind = Kind::kAffine;
  Matrix w;
  Vector b;
  bool relu = true;
  // Conv geometry.
  int in_channels = 0, in_height = 0, in_width = 0;
  int time_kernel = 0, freq_kernel = 0, pool = 1;
  int out_height = 0, conv_width = 0, out_width = 0;
  // Time-delay splice offsets.
  std::vector<int> offsets;

  int InputDim() const;
  int OutputDim() const;
  std::string Tag() const;  // "conv", "tdnn" or "affine"
};

/// Contiguous utterance spans inside a batch of stacked frames.
using Segments = std::vector<std::pair<Eigen::Index, Eigen::Index>>;  // (offset, length)

class FrameNet {
 public:
  FrameNet() = default;
  /// Random initialization (He-normal hidden layers, small output layer).
  FrameNet(const FrameNetConfig &cfg, std::uint64_t seed);
  FrameNet(FrameNetConfig cfg, std::vector<NetLayer> layers);

  const FrameNetConfig &config() const { return cfg_; }
  const std::vector<NetLayer> &layers() const { return layers_; }
  std::vector<NetLayer> &mutable_layers() { return layers_; }
  std::size_t NumParams() const;
  /// Index of the bottleneck layer whose output is the speaker feature.
  std::size_t FeatureLayer() const { return layers_.size() - 2; }

  struct Output {
    Matrix features;  // frames x feature_dim
    Matrix logits;    // frames x n_speakers
  };
  /// Runs one utterance (frames x input_dim).
  Output Forward(const FeatureMatrix &frames) const;

  /// Mean frame cross-entropy over a batch; fills parameter gradients
  /// (same layout as layers()) when grads is non-null.
  struct Batch {
    Matrix inputs;  // input_dim x total_frames
    Segments segments;
    std::vector<int> labels;  // one per frame
  };
  double Loss(const Batch &batch, std::vector<std::pair<Matrix, Vector>> *grads = nullptr,
              double *accuracy = nullptr) const;

 private:
  FrameNetConfig cfg_;
  std::vector<NetLayer> layers_;
};

/// Row-wise softmax.
Matrix Softmax(const Matrix &logits);

struct TrainingExample {
  FeatureMatrix frames;  // spliced features of one utterance
  int label = 0;
};

struct TrainTrace {
  std::vector<double> epoch_loss;
  std::vector<double> epoch_accuracy;
  std::vector<double> epoch_lr;
};

FrameNet::Batch MakeBatch(const std::vector<const TrainingExample *> &examples);

/// Minibatch SGD with momentum on frame cross-entropy. Utterance order is
/// reshuffled every epoch; the learning rate halves when the epoch loss
/// stops improving. Throws NumericError naming the epoch on divergence.
FrameNet TrainFrameNet(FrameNet net, const std::vector<TrainingExample> &data,
                       const FrameNetConfig &cfg, TrainTrace *trace = nullptr);

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t n_checked = 0;
  std::vector<std::pair<std::string, double>> per_layer;  // tag, max error
};

/// Compares analytic gradients with central differences on sampled
/// parameters (at least `per_tensor` from every weight and bias tensor).
GradCheckResult GradCheck(const FrameNet &net, const FrameNet::Batch &batch, std::uint64_t seed,
                          int per_tensor = 20, double eps = 1e-4);

/// Mean of the frame-level features.
SpeakerVector AverageFrameFeatures(const Matrix &frame_features, const std::string &utt_id = "");
SpeakerVector Dvector(const FrameNet &net, const FeatureMatrix &frames, const std::string &utt_id = "");

}  // namespace tev

#endif  // TEV_EMBEDNET_H_
