// tools/tevkit.cc

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

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>

#include "CLI11.hpp"
#include "tev/io.h"
#include "tev/listensvc.h"
#include "tev/pipeline.h"

namespace fs = std::filesystem;
using namespace tev;

namespace {

struct CommonOptions {
  std::string config;
  std::optional<std::uint64_t> seed;
  std::optional<bool> deterministic;
  std::optional<int> threads;
  std::vector<std::string> sets;
};

void AddCommon(CLI::App *sub, CommonOptions &o) {
  sub->add_option("--config", o.config, "JSON pipeline configuration")->check(CLI::ExistingFile);
  sub->add_option("--seed", o.seed, "Master random seed");
  sub->add_option("--deterministic", o.deterministic,
                  "true: fixed seed (default); false: unseeded runs draw a fresh seed");
  sub->add_option("--threads", o.threads, "Worker threads (default: $TEV_THREADS or 1)")
      ->check(CLI::PositiveNumber);
  sub->add_option("--set", o.sets, "Override a config key, e.g. --set gmm.n_components=32");
}

// Module-specific flags become "group.key=value" overrides so the echoed
// config reflects them.
template <typename T>
void Override(std::vector<std::string> &sets, const std::string &key, const std::optional<T> &v) {
  if (!v) return;
  std::ostringstream os;
  if constexpr (std::is_same_v<T, std::string>)
    os << '"' << *v << '"';
  else
    os << *v;
  sets.push_back(key + "=" + os.str());
}

PipelineConfig Resolve(const CommonOptions &o, const std::vector<std::string> &extra) {
  PipelineConfig cfg = o.config.empty() ? PipelineConfig() : PipelineConfig::Load(o.config);
  for (const auto &s : o.sets) cfg.Set(s);
  for (const auto &s : extra) cfg.Set(s);
  if (o.deterministic) cfg.deterministic = *o.deterministic;
  if (o.threads) cfg.threads = *o.threads;
  if (o.seed)
    cfg.seed = *o.seed;
  else if (!cfg.deterministic)
    cfg.seed = (static_cast<std::uint64_t>(std::random_device{}()) << 32) ^ std::random_device{}();
  return cfg;
}

fs::path DirOf(const fs::path &p) { return p.has_parent_path() ? p.parent_path() : fs::path("."); }

std::string JoinEvents(const std::string &csv) {
  std::string out = "[";
  std::stringstream ss(csv);
  std::string e;
  bool first = true;
  while (std::getline(ss, e, ',')) {
    out += (first ? "\"" : ",\"") + e + "\"";
    first = false;
  }
  return out + "]";
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"tevkit: speaker verification on trivial speech events"};
  app.require_subcommand(1);
  app.set_help_all_flag("--help-all", "Show help for every subcommand");

  // Flags shared across subcommands.
  std::string out, manifest, features, model, stats, vectors, trials, scores, kind, method, event, log_path;
  std::string host = "127.0.0.1";
  int port = 8080;
  std::uint64_t id_seed = 0;
  bool train_corpus = false;
  std::optional<int> n_speakers, utts, components, iters, ivector_dim, epochs, feature_dim, dim;
  std::optional<double> min_dur, max_dur, lr, perplexity;
  std::optional<std::uint64_t> corpus_seed;
  std::optional<std::string> events;

  std::map<std::string, CommonOptions> common;
  auto sub = [&](const std::string &name, const std::string &desc) {
    CLI::App *s = app.add_subcommand(name, desc);
    AddCommon(s, common[name]);
    return s;
  };

  CLI::App *synth = sub("synth-corpus", "Write a synthetic corpus (wav/ and manifest.tsv)");
  synth->add_option("--out", out, "Output directory")->required();
  synth->add_flag("--train", train_corpus, "Use the train_corpus config group instead of corpus");
  synth->add_option("--n-speakers", n_speakers, "Number of speakers");
  synth->add_option("--utts", utts, "Utterances per speaker per event");
  synth->add_option("--events", events, "Comma-separated events, e.g. cough,laugh");
  synth->add_option("--min-dur", min_dur, "Minimum duration, seconds");
  synth->add_option("--max-dur", max_dur, "Maximum duration, seconds");
  synth->add_option("--corpus-seed", corpus_seed, "Seed of the synthetic speakers and audio");

  CLI::App *stats_cmd = sub("stats", "Per-event corpus statistics table");
  stats_cmd->add_option("--manifest", manifest, "Manifest file")->required()->check(CLI::ExistingFile);
  stats_cmd->add_option("--out", out, "Also write the table to this file");

  CLI::App *feats = sub("extract-features", "Acoustic features to a TEVF archive");
  feats->add_option("--manifest", manifest, "Manifest file")->required()->check(CLI::ExistingFile);
  feats->add_option("--kind", kind, "ivector (mfcc+e, deltas, cmvn) or dvector (fbank, cmvn, splice)")
      ->required();
  feats->add_option("--out", out, "Output archive")->required();

  CLI::App *ubm = sub("train-ubm", "Train the diagonal-covariance UBM");
  ubm->add_option("--features", features, "Feature archive")->required()->check(CLI::ExistingFile);
  ubm->add_option("--out", out, "Output model file")->required();
  ubm->add_option("--components", components, "Number of Gaussians (power of two for split init)");
  ubm->add_option("--iters", iters, "EM iterations per split stage");

  CLI::App *acc = sub("accumulate-stats", "Baum-Welch statistics under the UBM");
  acc->add_option("--model", model, "Model file with a GMM section")->required()->check(CLI::ExistingFile);
  acc->add_option("--features", features, "Feature archive")->required()->check(CLI::ExistingFile);
  acc->add_option("--out", out, "Output stats archive")->required();

  CLI::App *tmat = sub("train-tmatrix", "Train the total variability matrix");
  tmat->add_option("--model", model, "Model file with a GMM section")->required()->check(CLI::ExistingFile);
  tmat->add_option("--stats", stats, "Stats archive")->required()->check(CLI::ExistingFile);
  tmat->add_option("--out", out, "Output model file (GMM and TVM sections)")->required();
  tmat->add_option("--ivector-dim", ivector_dim, "i-vector dimension");
  tmat->add_option("--iters", iters, "EM iterations");

  CLI::App *ivec = sub("extract-ivectors", "Extract i-vectors");
  ivec->add_option("--model", model, "Model file with GMM and TVM sections")->required()->check(CLI::ExistingFile);
  ivec->add_option("--stats", stats, "Stats archive")->required()->check(CLI::ExistingFile);
  ivec->add_option("--out", out, "Output vector file")->required();

  CLI::App *dnn = sub("train-dnn", "Train the frame-level speaker network");
  dnn->add_option("--features", features, "Spliced fbank archive")->required()->check(CLI::ExistingFile);
  dnn->add_option("--manifest", manifest, "Manifest giving speaker labels")->required()->check(CLI::ExistingFile);
  dnn->add_option("--out", out, "Output model file")->required();
  dnn->add_option("--epochs", epochs, "Training epochs");
  dnn->add_option("--lr", lr, "Initial learning rate");
  dnn->add_option("--feature-dim", feature_dim, "Width of the feature layer");

  CLI::App *dvec = sub("extract-dvectors", "Extract d-vectors (mean of frame features)");
  dvec->add_option("--model", model, "Model file with a DNN section")->required()->check(CLI::ExistingFile);
  dvec->add_option("--features", features, "Spliced fbank archive")->required()->check(CLI::ExistingFile);
  dvec->add_option("--out", out, "Output vector file")->required();

  CLI::App *lda = sub("train-lda", "Train LDA on length-normalized vectors");
  lda->add_option("--vectors", vectors, "Vector file")->required()->check(CLI::ExistingFile);
  lda->add_option("--manifest", manifest, "Manifest giving speaker labels")->required()->check(CLI::ExistingFile);
  lda->add_option("--model", model, "Model file whose sections are carried over")->check(CLI::ExistingFile);
  lda->add_option("--out", out, "Output model file")->required();
  lda->add_option("--dim", dim, "Output dimension (capped at classes - 1)");

  CLI::App *plda = sub("train-plda", "Train two-covariance PLDA");
  plda->add_option("--vectors", vectors, "Vector file")->required()->check(CLI::ExistingFile);
  plda->add_option("--manifest", manifest, "Manifest giving speaker labels")->required()->check(CLI::ExistingFile);
  plda->add_option("--model", model, "Model file; its LDA section is applied first")->check(CLI::ExistingFile);
  plda->add_option("--out", out, "Output model file")->required();
  plda->add_option("--iters", iters, "EM iterations");

  CLI::App *gen = sub("gen-trials", "Generate a trial list");
  gen->add_option("--manifest", manifest, "Manifest file")->required()->check(CLI::ExistingFile);
  gen->add_option("--event", event, "Event name, 'all' (per-event exhaustive) or 'disguise'")
      ->default_val("all");
  gen->add_option("--out", out, "Output trial file")->required();

  CLI::App *score = sub("score", "Score a trial list");
  score->add_option("--trials", trials, "Trial file")->required()->check(CLI::ExistingFile);
  score->add_option("--vectors", vectors, "Vector file")->required()->check(CLI::ExistingFile);
  score->add_option("--model", model, "Model file with LDA/PLDA sections")->check(CLI::ExistingFile);
  score->add_option("--method", method, "cosine, lda-cosine or plda");
  score->add_option("--out", out, "Output score file")->required();

  CLI::App *eer = sub("eval-eer", "Equal error rate of a score file");
  eer->add_option("--scores", scores, "Score file")->required()->check(CLI::ExistingFile);
  eer->add_option("--trials", trials, "Trial file with labels")->required()->check(CLI::ExistingFile);
  eer->add_option("--out", out, "Write the full report here");

  CLI::App *tsne = sub("tsne-export", "t-SNE of frame-level deep features for normal/disguised speech");
  tsne->add_option("--model", model, "Model file with a DNN section")->required()->check(CLI::ExistingFile);
  tsne->add_option("--features", features, "Spliced fbank archive")->required()->check(CLI::ExistingFile);
  tsne->add_option("--manifest", manifest, "Manifest with normal/disguised records")
      ->required()
      ->check(CLI::ExistingFile);
  tsne->add_option("--out", out, "Output directory for plot files")->required();
  tsne->add_option("--perplexity", perplexity, "t-SNE perplexity");
  tsne->add_option("--iters", iters, "t-SNE iterations");

  CLI::App *serve = sub("serve-listen", "Serve the listening-test API");
  serve->add_option("--manifest", manifest, "Manifest of the test corpus")->required()->check(CLI::ExistingFile);
  serve->add_option("--log", log_path, "Append-only session log")->required();
  serve->add_option("--host", host, "Bind address")->default_val("127.0.0.1");
  serve->add_option("--port", port, "Port")->default_val(8080);
  serve->add_option("--id-seed", id_seed, "Seed of session ids and audio tokens");

  CLI::App *pipe = sub("run-pipeline", "Synthetic end-to-end experiment (both systems, all scorers)");
  pipe->add_option("--out", out, "Work directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    return app.exit(e);
  }

  try {
    CLI::App *used = app.get_subcommands().front();
    const std::string name = used->get_name();
    std::vector<std::string> extra;
    const std::string group = train_corpus ? "train_corpus" : "corpus";
    Override(extra, group + ".n_speakers", n_speakers);
    Override(extra, group + ".utts_per_speaker_per_event", utts);
    Override(extra, group + ".duration_min_s", min_dur);
    Override(extra, group + ".duration_max_s", max_dur);
    Override(extra, group + ".seed", corpus_seed);
    if (events) extra.push_back(group + ".events=" + JoinEvents(*events));
    if (name == "train-ubm") {
      Override(extra, "gmm.n_components", components);
      Override(extra, "gmm.n_iters", iters);
    }
    if (name == "train-tmatrix") {
      Override(extra, "tvspace.ivector_dim", ivector_dim);
      Override(extra, "tvspace.n_iters", iters);
    }
    Override(extra, "embednet.epochs", epochs);
    Override(extra, "embednet.lr", lr);
    Override(extra, "embednet.feature_dim", feature_dim);
    Override(extra, "backend.lda_dim", dim);
    if (name == "train-plda") Override(extra, "backend.plda_iters", iters);
    if (!method.empty()) extra.push_back("backend.method=\"" + method + "\"");
    if (name == "tsne-export") {
      Override(extra, "tsne.perplexity", perplexity);
      Override(extra, "tsne.iters", iters);
    }
    const PipelineConfig cfg = Resolve(common[name], extra);

    if (name == "synth-corpus") {
      const SynthSpec &spec = train_corpus ? cfg.train_corpus : cfg.corpus;
      EchoConfig(cfg, name, out);
      const CorpusManifest m = RunSynthCorpus(spec, out);
      std::cout << "wrote " << m.records.size() << " utterances to " << out << "\n";
    } else if (name == "stats") {
      const std::string table = RunStats(manifest);
      std::cout << table;
      if (!out.empty()) {
        EchoConfig(cfg, name, DirOf(out));
        WriteFileBytes(out, table);
      }
    } else if (name == "extract-features") {
      EchoConfig(cfg, name, DirOf(out));
      RunExtractFeatures(cfg, manifest, ParseFeatureKind(kind), out);
    } else if (name == "train-ubm") {
      EchoConfig(cfg, name, DirOf(out));
      RunTrainUbm(cfg, features, out);
    } else if (name == "accumulate-stats") {
      EchoConfig(cfg, name, DirOf(out));
      RunAccumulateStats(cfg, model, features, out);
    } else if (name == "train-tmatrix") {
      EchoConfig(cfg, name, DirOf(out));
      RunTrainTmatrix(cfg, model, stats, out);
    } else if (name == "extract-ivectors") {
      EchoConfig(cfg, name, DirOf(out));
      RunExtractIvectors(cfg, model, stats, out);
    } else if (name == "train-dnn") {
      EchoConfig(cfg, name, DirOf(out));
      RunTrainDnn(cfg, features, manifest, out);
    } else if (name == "extract-dvectors") {
      EchoConfig(cfg, name, DirOf(out));
      RunExtractDvectors(cfg, model, features, out);
    } else if (name == "train-lda") {
      EchoConfig(cfg, name, DirOf(out));
      RunTrainLda(cfg, vectors, manifest, model, out);
    } else if (name == "train-plda") {
      EchoConfig(cfg, name, DirOf(out));
      RunTrainPlda(cfg, vectors, manifest, model, out);
    } else if (name == "gen-trials") {
      EchoConfig(cfg, name, DirOf(out));
      const TrialList list = RunGenTrials(manifest, event, out);
      std::cout << list.trials.size() << " trials (" << list.NumTargets() << " target)\n";
    } else if (name == "score") {
      EchoConfig(cfg, name, DirOf(out));
      const std::size_t n = RunScore(cfg, trials, vectors, model, out);
      std::cout << "scored " << n << " trials with " << ScoringMethodName(cfg.method) << "\n";
    } else if (name == "eval-eer") {
      if (!out.empty()) EchoConfig(cfg, name, DirOf(out));
      const EvalReport r = RunEvalEer(scores, trials, out, scores);
      std::printf("EER %.4f%% (threshold %.6g, %zu target, %zu nontarget)\n", 100.0 * r.eer, r.threshold_at_eer,
                  r.n_target, r.n_nontarget);
    } else if (name == "tsne-export") {
      EchoConfig(cfg, name, out);
      RunTsneExport(cfg, model, features, manifest, out);
    } else if (name == "serve-listen") {
      EchoConfig(cfg, name, DirOf(log_path));
      ListenService service(LoadManifest(manifest), log_path, id_seed);
      ListenServer server(service);
      std::cerr << "listening on http://" << host << ":" << port << "\n";
      server.Run(host, port);
    } else if (name == "run-pipeline") {
      const PipelineResult r = RunSyntheticPipeline(cfg, out, true);
      for (const char *k : {"ivector", "dvector"})
        for (const char *m : {"cosine", "lda-cosine", "plda"}) {
          const std::string key = std::string(k) + "-" + m;
          std::printf("%-20s EER %7.3f%%\n", key.c_str(), 100.0 * r.reports.at(key).eer);
        }
      std::printf("total %.1f s\n", r.seconds);
    }
  } catch (const std::exception &e) {
    std::cerr << "tevkit: error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
