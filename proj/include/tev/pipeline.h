// tev/pipeline.h

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

#ifndef TEV_PIPELINE_H_
#define TEV_PIPELINE_H_

#include <filesystem>
#include <map>
#include <string>
#include <vector>

#include "tev/backend.h"
#include "tev/corpus.h"
#include "tev/dsp.h"
#include "tev/embednet.h"
#include "tev/eval.h"
#include "tev/gmm.h"
#include "tev/viz.h"

namespace tev {

/// Every tunable of the command-line pipeline. Serialized as JSON with one
/// object per group; keys are addressed as "group.key" by overrides.
struct PipelineConfig {
  std::uint64_t seed = 1;
  bool deterministic = true;  // false: unseeded runs draw a fresh seed
  int threads = 1;            // defaults to $TEV_THREADS

  SynthSpec corpus;        // evaluation corpus
  SynthSpec train_corpus;  // background corpus for UBM, T, network and backends
  FrontendConfig mfcc = FrontendConfig::MfccDefaults();
  FrontendConfig fbank = FrontendConfig::FbankDefaults();
  int splice_context = 4;
  EmConfig gmm;
  int ivector_dim = 8;
  int tvm_iters = 5;
  FrameNetConfig embednet;
  ScoringMethod method = ScoringMethod::kCosine;
  int lda_dim = 150;
  int plda_iters = 10;
  TsneConfig tsne;
  int tsne_max_per_group = 200;

  PipelineConfig();

  std::string ToJson() const;
  /// Keys absent from the JSON keep their current values; unknown keys throw.
  void MergeJson(const std::string &text);
  /// "group.key=value"; value parsed as JSON when possible, else as a string.
  void Set(const std::string &assignment);
  static PipelineConfig Load(const std::filesystem::path &path);

  /// Worker threads; results do not depend on it.
  int Threads() const;
};

/// Writes `<dir>/<subcommand>.config.json` with the effective configuration.
void EchoConfig(const PipelineConfig &cfg, const std::string &subcommand, const std::filesystem::path &dir);

enum class FeatureKind { kIvector, kDvector };
FeatureKind ParseFeatureKind(const std::string &name);

// One function per command-line subcommand; each reads and writes files.

CorpusManifest RunSynthCorpus(const SynthSpec &spec, const std::filesystem::path &out_dir);
std::string RunStats(const std::filesystem::path &manifest);
void RunExtractFeatures(const PipelineConfig &cfg, const std::filesystem::path &manifest, FeatureKind kind,
                        const std::filesystem::path &out);
void RunTrainUbm(const PipelineConfig &cfg, const std::filesystem::path &features, const std::filesystem::path &out);
void RunAccumulateStats(const PipelineConfig &cfg, const std::filesystem::path &model,
                        const std::filesystem::path &features, const std::filesystem::path &out);
void RunTrainTmatrix(const PipelineConfig &cfg, const std::filesystem::path &model,
                     const std::filesystem::path &stats, const std::filesystem::path &out);
void RunExtractIvectors(const PipelineConfig &cfg, const std::filesystem::path &model,
                        const std::filesystem::path &stats, const std::filesystem::path &out);
void RunTrainDnn(const PipelineConfig &cfg, const std::filesystem::path &features,
                 const std::filesystem::path &manifest, const std::filesystem::path &out);
void RunExtractDvectors(const PipelineConfig &cfg, const std::filesystem::path &model,
                        const std::filesystem::path &features, const std::filesystem::path &out);
/// LDA on length-normalized vectors; other sections of `in_model` (if given)
/// are carried into `out`.
void RunTrainLda(const PipelineConfig &cfg, const std::filesystem::path &vectors,
                 const std::filesystem::path &manifest, const std::filesystem::path &in_model,
                 const std::filesystem::path &out);
/// PLDA on length-normalized vectors, projected by the LDA section of
/// `in_model` when present.
void RunTrainPlda(const PipelineConfig &cfg, const std::filesystem::path &vectors,
                  const std::filesystem::path &manifest, const std::filesystem::path &in_model,
                  const std::filesystem::path &out);
/// event: an event name, "all" (union of per-event exhaustive lists) or
/// "disguise" (normal vs disguised pairs).
TrialList RunGenTrials(const std::filesystem::path &manifest, const std::string &event,
                       const std::filesystem::path &out);
std::size_t RunScore(const PipelineConfig &cfg, const std::filesystem::path &trials,
                     const std::filesystem::path &vectors, const std::filesystem::path &model,
                     const std::filesystem::path &out);
EvalReport RunEvalEer(const std::filesystem::path &scores, const std::filesystem::path &trials,
                      const std::filesystem::path &out, const std::string &title);
void RunTsneExport(const PipelineConfig &cfg, const std::filesystem::path &model,
                   const std::filesystem::path &features, const std::filesystem::path &manifest,
                   const std::filesystem::path &out_dir);

/// Results of the scripted synthetic experiment.
struct PipelineResult {
  std::map<std::string, EvalReport> reports;  // "<ivector|dvector>-<method>[-<event>]"
  std::vector<std::filesystem::path> artifacts;  // model, score and report files
  double seconds = 0.0;
};

/// synth (train and eval corpora) -> features -> UBM -> T -> i-vectors;
/// network -> d-vectors; LDA and PLDA per vector kind; exhaustive per-event
/// trials on the eval corpus; every scoring method; pooled and per-event EER.
PipelineResult RunSyntheticPipeline(const PipelineConfig &cfg, const std::filesystem::path &work_dir,
                                    bool verbose = false);

}  // namespace tev

#endif  // TEV_PIPELINE_H_
