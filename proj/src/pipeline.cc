// pipeline.cc

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

#include <chrono>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "json.hpp"
#include "tev/io.h"
#include "tev/pipeline.h"
#include "tev/tvspace.h"

namespace tev {

using nlohmann::json;
namespace fs = std::filesystem;

namespace {

json SpecToJson(const SynthSpec &s) {
  json events = json::array();
  for (EventType e : s.events) events.push_back(EventName(e));
  return {{"n_speakers", s.n_speakers},
          {"utts_per_speaker_per_event", s.utts_per_speaker_per_event},
          {"events", events},
          {"duration_min_s", s.duration_range_s.first},
          {"duration_max_s", s.duration_range_s.second},
          {"seed", s.seed}};
}

SynthSpec SpecFromJson(const json &j) {
  SynthSpec s;
  s.n_speakers = j.at("n_speakers");
  s.utts_per_speaker_per_event = j.at("utts_per_speaker_per_event");
  s.events.clear();
  for (const auto &e : j.at("events")) s.events.push_back(ParseEvent(e));
  s.duration_range_s = {j.at("duration_min_s"), j.at("duration_max_s")};
  s.seed = j.at("seed");
  return s;
}

json FrontendToJson(const FrontendConfig &c) {
  return {{"frame_len_ms", c.frame_len_ms}, {"frame_shift_ms", c.frame_shift_ms},
          {"preemphasis", c.preemphasis},   {"n_mel_bins", c.n_mel_bins},
          {"n_ceps", c.n_ceps},             {"fft_size", c.fft_size},
          {"dither", c.dither},             {"low_freq_hz", c.low_freq_hz},
          {"high_freq_hz", c.high_freq_hz}, {"energy_floor", c.energy_floor},
          {"cmvn", c.cmvn}};
}

FrontendConfig FrontendFromJson(const json &j) {
  FrontendConfig c;
  c.frame_len_ms = j.at("frame_len_ms");
  c.frame_shift_ms = j.at("frame_shift_ms");
  c.preemphasis = j.at("preemphasis");
  c.n_mel_bins = j.at("n_mel_bins");
  c.n_ceps = j.at("n_ceps");
  c.fft_size = j.at("fft_size");
  c.dither = j.at("dither");
  c.low_freq_hz = j.at("low_freq_hz");
  c.high_freq_hz = j.at("high_freq_hz");
  c.energy_floor = j.at("energy_floor");
  c.cmvn = j.at("cmvn");
  return c;
}

json ToJsonObject(const PipelineConfig &c) {
  json conv = json::array(), tdnn = json::array();
  for (const auto &b : c.embednet.conv_blocks)
    conv.push_back({{"out_channels", b.out_channels},
                    {"time_kernel", b.time_kernel},
                    {"freq_kernel", b.freq_kernel},
                    {"pool", b.pool}});
  for (const auto &t : c.embednet.tdnn_layers) tdnn.push_back({{"offsets", t.offsets}, {"units", t.units}});
  return {
      {"seed", c.seed},
      {"deterministic", c.deterministic},
      {"threads", c.threads},
      {"corpus", SpecToJson(c.corpus)},
      {"train_corpus", SpecToJson(c.train_corpus)},
      {"mfcc", FrontendToJson(c.mfcc)},
      {"fbank", FrontendToJson(c.fbank)},
      {"splice", {{"context", c.splice_context}}},
      {"gmm",
       {{"n_components", c.gmm.n_components},
        {"n_iters", c.gmm.n_iters},
        {"variance_floor", c.gmm.variance_floor},
        {"init", c.gmm.init == EmConfig::Init::kBinarySplit ? "split" : "kmeans"},
        {"split_offset", c.gmm.split_offset}}},
      {"tvspace", {{"ivector_dim", c.ivector_dim}, {"n_iters", c.tvm_iters}}},
      {"embednet",
       {{"conv_blocks", conv},
        {"tdnn_layers", tdnn},
        {"feature_dim", c.embednet.feature_dim},
        {"lr", c.embednet.lr},
        {"momentum", c.embednet.momentum},
        {"batch_size", c.embednet.batch_size},
        {"epochs", c.embednet.epochs}}},
      {"backend", {{"method", ScoringMethodName(c.method)}, {"lda_dim", c.lda_dim}, {"plda_iters", c.plda_iters}}},
      {"tsne",
       {{"perplexity", c.tsne.perplexity},
        {"iters", c.tsne.iters},
        {"learning_rate", c.tsne.learning_rate},
        {"exaggeration", c.tsne.exaggeration},
        {"exaggeration_iters", c.tsne.exaggeration_iters},
        {"initial_momentum", c.tsne.initial_momentum},
        {"final_momentum", c.tsne.final_momentum},
        {"momentum_switch_iter", c.tsne.momentum_switch_iter},
        {"max_per_group", c.tsne_max_per_group}}},
  };
}

void FromJsonObject(const json &j, PipelineConfig &c) {
  c.seed = j.at("seed");
  c.deterministic = j.at("deterministic");
  c.threads = j.at("threads");
  c.corpus = SpecFromJson(j.at("corpus"));
  c.train_corpus = SpecFromJson(j.at("train_corpus"));
  c.mfcc = FrontendFromJson(j.at("mfcc"));
  c.fbank = FrontendFromJson(j.at("fbank"));
  c.splice_context = j.at("splice").at("context");
  const json &g = j.at("gmm");
  c.gmm.n_components = g.at("n_components");
  c.gmm.n_iters = g.at("n_iters");
  c.gmm.variance_floor = g.at("variance_floor");
  const std::string init = g.at("init");
  if (init != "split" && init != "kmeans") throw InvalidArgument("gmm.init must be 'split' or 'kmeans'");
  c.gmm.init = init == "split" ? EmConfig::Init::kBinarySplit : EmConfig::Init::kKmeans;
  c.gmm.split_offset = g.at("split_offset");
  c.ivector_dim = j.at("tvspace").at("ivector_dim");
  c.tvm_iters = j.at("tvspace").at("n_iters");
  const json &n = j.at("embednet");
  c.embednet.conv_blocks.clear();
  for (const auto &b : n.at("conv_blocks"))
    c.embednet.conv_blocks.push_back({b.at("out_channels"), b.at("time_kernel"), b.at("freq_kernel"), b.at("pool")});
  c.embednet.tdnn_layers.clear();
  for (const auto &t : n.at("tdnn_layers"))
    c.embednet.tdnn_layers.push_back({t.at("offsets").get<std::vector<int>>(), t.at("units")});
  c.embednet.feature_dim = n.at("feature_dim");
  c.embednet.lr = n.at("lr");
  c.embednet.momentum = n.at("momentum");
  c.embednet.batch_size = n.at("batch_size");
  c.embednet.epochs = n.at("epochs");
  c.method = ParseScoringMethod(j.at("backend").at("method"));
  c.lda_dim = j.at("backend").at("lda_dim");
  c.plda_iters = j.at("backend").at("plda_iters");
  const json &t = j.at("tsne");
  c.tsne.perplexity = t.at("perplexity");
  c.tsne.iters = t.at("iters");
  c.tsne.learning_rate = t.at("learning_rate");
  c.tsne.exaggeration = t.at("exaggeration");
  c.tsne.exaggeration_iters = t.at("exaggeration_iters");
  c.tsne.initial_momentum = t.at("initial_momentum");
  c.tsne.final_momentum = t.at("final_momentum");
  c.tsne.momentum_switch_iter = t.at("momentum_switch_iter");
  c.tsne_max_per_group = t.at("max_per_group");
}

// Recursively overlays `in` onto `cur`, rejecting keys `cur` does not have.
void Overlay(json &cur, const json &in, const std::string &where) {
  if (!in.is_object()) throw InvalidArgument("config: expected an object at '" + where + "'");
  for (const auto &[k, v] : in.items()) {
    const std::string path = where.empty() ? k : where + "." + k;
    if (!cur.contains(k)) throw InvalidArgument("config: unknown key '" + path + "'");
    if (cur[k].is_object())
      Overlay(cur[k], v, path);
    else
      cur[k] = v;
  }
}

}  // namespace

PipelineConfig::PipelineConfig() {
  corpus.n_speakers = 20;
  corpus.utts_per_speaker_per_event = 10;
  corpus.events.assign(kTrivialEvents.begin(), kTrivialEvents.end());
  corpus.duration_range_s = {0.3, 0.5};
  corpus.seed = 202;
  train_corpus = corpus;
  train_corpus.n_speakers = 60;
  train_corpus.seed = 101;
  gmm.n_components = 64;
  gmm.n_iters = 5;
  embednet.epochs = 8;
  mfcc.cmvn = false;
  fbank.cmvn = false;
  threads = DefaultThreads();
  FromJsonObject(ToJsonObject(*this), *this);
}

int PipelineConfig::Threads() const { return std::max(1, threads); }

std::string PipelineConfig::ToJson() const { return ToJsonObject(*this).dump(2) + "\n"; }

void PipelineConfig::MergeJson(const std::string &text) {
  json cur = ToJsonObject(*this);
  json in;
  try {
    in = json::parse(text);
  } catch (const json::exception &e) {
    throw InvalidArgument(std::string("config: ") + e.what());
  }
  Overlay(cur, in, "");
  try {
    FromJsonObject(cur, *this);
  } catch (const json::exception &e) {
    throw InvalidArgument(std::string("config: ") + e.what());
  }
}

void PipelineConfig::Set(const std::string &assignment) {
  const auto eq = assignment.find('=');
  if (eq == std::string::npos || eq == 0) throw InvalidArgument("--set expects key=value, got '" + assignment + "'");
  const std::string key = assignment.substr(0, eq), text = assignment.substr(eq + 1);
  json value;
  try {
    value = json::parse(text);
  } catch (const json::exception &) {
    value = text;
  }
  json patch = value;
  std::string rest = key;
  std::vector<std::string> parts;
  for (std::size_t pos; (pos = rest.find('.')) != std::string::npos; rest = rest.substr(pos + 1))
    parts.push_back(rest.substr(0, pos));
  parts.push_back(rest);
  for (auto it = parts.rbegin(); it != parts.rend(); ++it) patch = json{{*it, patch}};
  MergeJson(patch.dump());
}

PipelineConfig PipelineConfig::Load(const fs::path &path) {
  PipelineConfig c;
  c.MergeJson(ReadFileBytes(path));
  return c;
}

void EchoConfig(const PipelineConfig &cfg, const std::string &subcommand, const fs::path &dir) {
  fs::create_directories(dir);
  WriteFileBytes(dir / (subcommand + ".config.json"), cfg.ToJson());
}

FeatureKind ParseFeatureKind(const std::string &name) {
  if (name == "ivector" || name == "mfcc") return FeatureKind::kIvector;
  if (name == "dvector" || name == "fbank") return FeatureKind::kDvector;
  throw InvalidArgument("unknown feature kind '" + name + "' (ivector|dvector)");
}

// ---------------------------------------------------------------------------

namespace {

fs::path ParentDir(const fs::path &p) { return p.has_parent_path() ? p.parent_path() : fs::path("."); }

void EnsureParent(const fs::path &p) { fs::create_directories(ParentDir(p)); }

// Speaker label per utterance id, speakers numbered in sorted order.
std::map<std::string, std::string> SpeakerOf(const CorpusManifest &m) {
  std::map<std::string, std::string> out;
  for (const auto &r : m.records) out[r.utt_id] = r.spk_id;
  return out;
}

std::vector<std::string> LabelsFor(const std::vector<SpeakerVector> &vectors, const CorpusManifest &m) {
  const auto spk = SpeakerOf(m);
  std::vector<std::string> labels;
  for (const auto &v : vectors) {
    const auto it = spk.find(v.utt_id);
    if (it == spk.end()) throw InvalidArgument("vector '" + v.utt_id + "' is not in the manifest");
    labels.push_back(it->second);
  }
  return labels;
}

Matrix NormalizedRows(const std::vector<SpeakerVector> &vectors, const LdaTransform *lda) {
  Matrix x = StackVectors(vectors);
  for (Eigen::Index i = 0; i < x.rows(); ++i) x.row(i) = LengthNormalize(x.row(i).transpose()).transpose();
  if (lda) {
    Matrix y(x.rows(), lda->OutputDim());
    for (Eigen::Index i = 0; i < x.rows(); ++i) y.row(i) = lda->Apply(Vector(x.row(i).transpose())).transpose();
    return y;
  }
  return x;
}

ModelFile MaybeReadModel(const fs::path &p) { return p.empty() ? ModelFile{} : ReadModelFile(p); }

}  // namespace

CorpusManifest RunSynthCorpus(const SynthSpec &spec, const fs::path &out_dir) { return SynthCorpus(spec, out_dir); }

std::string RunStats(const fs::path &manifest) {
  return FormatStatsTable(CorpusStats(LoadManifest(manifest)));
}

void RunExtractFeatures(const PipelineConfig &cfg, const fs::path &manifest, FeatureKind kind, const fs::path &out) {
  const CorpusManifest m = LoadManifest(manifest);
  std::vector<ArchiveRecord> records(m.records.size());
  ParallelFor(m.records.size(), cfg.Threads(), [&](std::size_t i) {
    const auto &r = m.records[i];
    const AudioSegment audio = ReadWav(m.AudioPath(r));
    records[i] = {r.utt_id, kind == FeatureKind::kIvector ? IvectorFeatures(audio, cfg.mfcc)
                                                          : DvectorFeatures(audio, cfg.fbank, cfg.splice_context)};
  });
  EnsureParent(out);
  WriteArchive(out, records);
}

void RunTrainUbm(const PipelineConfig &cfg, const fs::path &features, const fs::path &out) {
  std::vector<FeatureMatrix> feats;
  for (auto &r : ReadArchive(features)) feats.push_back(std::move(r.matrix));
  EmConfig ec = cfg.gmm;
  ec.seed = cfg.seed;
  ec.threads = cfg.Threads();
  ModelFile model;
  model.gmm = TrainUbm(feats, ec);
  EnsureParent(out);
  WriteModelFile(out, model);
}

void RunAccumulateStats(const PipelineConfig &cfg, const fs::path &model, const fs::path &features,
                        const fs::path &out) {
  const ModelFile mf = ReadModelFile(model, {"GMM "});
  if (!mf.gmm) throw InvalidArgument(model.string() + " has no GMM section");
  const auto feats = ReadArchive(features);
  std::vector<ArchiveRecord> stats(feats.size());
  ParallelFor(feats.size(), cfg.Threads(), [&](std::size_t i) {
    stats[i] = StatsToRecord(feats[i].id, AccumulateStats(*mf.gmm, feats[i].matrix.values));
  });
  EnsureParent(out);
  WriteArchive(out, stats);
}

void RunTrainTmatrix(const PipelineConfig &cfg, const fs::path &model, const fs::path &stats, const fs::path &out) {
  ModelFile mf = ReadModelFile(model);
  if (!mf.gmm) throw InvalidArgument(model.string() + " has no GMM section");
  std::vector<BaumWelchStats> st;
  for (const auto &r : ReadArchive(stats)) st.push_back(RecordToStats(r));
  const TotalVariabilityModel tvm =
      TrainTmatrix(InitTmatrix(*mf.gmm, cfg.ivector_dim, cfg.seed), st, cfg.tvm_iters, nullptr, cfg.Threads());
  mf.tmatrix = tvm.t();
  EnsureParent(out);
  WriteModelFile(out, mf);
}

void RunExtractIvectors(const PipelineConfig &cfg, const fs::path &model, const fs::path &stats,
                        const fs::path &out) {
  const TotalVariabilityModel tvm = ReadModelFile(model, {"GMM ", "TVM "}).Tvm();
  const auto records = ReadArchive(stats);
  std::vector<SpeakerVector> vectors(records.size());
  ParallelFor(records.size(), cfg.Threads(), [&](std::size_t i) {
    vectors[i] = ExtractIvector(tvm, RecordToStats(records[i]), records[i].id);
  });
  EnsureParent(out);
  WriteVectors(out, vectors);
}

void RunTrainDnn(const PipelineConfig &cfg, const fs::path &features, const fs::path &manifest,
                 const fs::path &out) {
  const auto spk = SpeakerOf(LoadManifest(manifest, {.check_audio = false}));
  std::map<std::string, int> index;
  for (const auto &[utt, s] : spk) index.emplace(s, 0);
  int next = 0;
  for (auto &[s, k] : index) k = next++;
  std::vector<TrainingExample> data;
  for (auto &r : ReadArchive(features)) {
    const auto it = spk.find(r.id);
    if (it == spk.end()) throw InvalidArgument("features for '" + r.id + "' are not in the manifest");
    data.push_back({std::move(r.matrix), index.at(it->second)});
  }
  FrameNetConfig nc = cfg.embednet;
  nc.seed = cfg.seed;
  nc.n_speakers = static_cast<int>(index.size());
  if (!data.empty()) {
    nc.input_dim = static_cast<int>(data.front().frames.dims());
    nc.context_frames = 2 * cfg.splice_context + 1;
  }
  ModelFile mf;
  mf.dnn = TrainFrameNet(FrameNet(nc, cfg.seed), data, nc);
  EnsureParent(out);
  WriteModelFile(out, mf);
}

void RunExtractDvectors(const PipelineConfig &cfg, const fs::path &model, const fs::path &features,
                        const fs::path &out) {
  const ModelFile mf = ReadModelFile(model, {"DNN "});
  if (!mf.dnn) throw InvalidArgument(model.string() + " has no DNN section");
  const auto records = ReadArchive(features);
  std::vector<SpeakerVector> vectors(records.size());
  ParallelFor(records.size(), cfg.Threads(),
              [&](std::size_t i) { vectors[i] = Dvector(*mf.dnn, records[i].matrix, records[i].id); });
  EnsureParent(out);
  WriteVectors(out, vectors);
}

void RunTrainLda(const PipelineConfig &cfg, const fs::path &vectors, const fs::path &manifest,
                 const fs::path &in_model, const fs::path &out) {
  const auto v = ReadVectors(vectors);
  const auto labels = LabelsFor(v, LoadManifest(manifest, {.check_audio = false}));
  const std::set<std::string> classes(labels.begin(), labels.end());
  const Matrix x = NormalizedRows(v, nullptr);
  const Eigen::Index dim =
      std::min<Eigen::Index>({cfg.lda_dim, x.cols(), static_cast<Eigen::Index>(classes.size()) - 1});
  ModelFile mf = MaybeReadModel(in_model);
  mf.lda = TrainLda(x, labels, dim);
  mf.plda.reset();
  EnsureParent(out);
  WriteModelFile(out, mf);
}

void RunTrainPlda(const PipelineConfig &cfg, const fs::path &vectors, const fs::path &manifest,
                  const fs::path &in_model, const fs::path &out) {
  const auto v = ReadVectors(vectors);
  const auto labels = LabelsFor(v, LoadManifest(manifest, {.check_audio = false}));
  ModelFile mf = MaybeReadModel(in_model);
  mf.plda = TrainPlda(NormalizedRows(v, mf.lda ? &*mf.lda : nullptr), labels, cfg.plda_iters);
  EnsureParent(out);
  WriteModelFile(out, mf);
}

TrialList RunGenTrials(const fs::path &manifest, const std::string &event, const fs::path &out) {
  const CorpusManifest m = LoadManifest(manifest, {.check_audio = false});
  TrialList list;
  if (event == "all") {
    for (EventType e : kAllEvents) {
      if (e == EventType::kNormal || e == EventType::kDisguised || m.OfEvent(e).size() < 2) continue;
      const TrialList part = GenExhaustiveTrials(m, e);
      list.trials.insert(list.trials.end(), part.trials.begin(), part.trials.end());
    }
    if (list.trials.empty()) throw InvalidArgument("manifest has no event with two or more utterances");
  } else if (event == "disguise") {
    list = GenDisguiseTrials(m);
  } else {
    list = GenExhaustiveTrials(m, ParseEvent(event));
  }
  ValidateTrialList(list);
  EnsureParent(out);
  WriteTrialFile(out, list);
  return list;
}

std::size_t RunScore(const PipelineConfig &cfg, const fs::path &trials, const fs::path &vectors,
                     const fs::path &model, const fs::path &out) {
  const VectorTable table = ToTable(ReadVectors(vectors));
  ModelFile mf;
  if (cfg.method != ScoringMethod::kCosine) {
    if (model.empty()) throw InvalidArgument(ScoringMethodName(cfg.method) + " scoring needs --model");
    mf = ReadModelFile(model, {"LDA ", "PLDA"});
  }
  ScoringModels models;
  if (mf.lda) models.lda = &*mf.lda;
  if (cfg.method == ScoringMethod::kPlda && mf.plda) models.plda = &*mf.plda;
  const TrialScorer scorer(cfg.method, models);
  std::ifstream is(trials);
  if (!is) throw IoError("cannot open " + trials.string());
  EnsureParent(out);
  std::ofstream os(out, std::ios::binary);
  if (!os) throw IoError("cannot write " + out.string());
  const std::size_t n = ScoreTrialStream(is, os, table, scorer);
  if (!os) throw IoError("write failed: " + out.string());
  return n;
}

EvalReport RunEvalEer(const fs::path &scores, const fs::path &trials, const fs::path &out,
                      const std::string &title) {
  const TrialList list = ReadTrialFile(trials);
  std::map<std::pair<std::string, std::string>, bool> label;
  for (const auto &t : list.trials) label[{t.utt_a, t.utt_b}] = t.is_target;
  std::vector<double> s;
  std::vector<bool> l;
  for (const auto &st : ReadScores(scores)) {
    const auto it = label.find({st.utt_a, st.utt_b});
    if (it == label.end()) throw InvalidArgument("scored pair " + st.utt_a + " / " + st.utt_b + " is not a trial");
    s.push_back(st.score);
    l.push_back(it->second);
  }
  const EvalReport report = ComputeEer(s, l);
  if (!out.empty()) {
    EnsureParent(out);
    std::ofstream os(out, std::ios::binary);
    if (!os) throw IoError("cannot write " + out.string());
    WriteReport(os, report, title);
  }
  return report;
}

void RunTsneExport(const PipelineConfig &cfg, const fs::path &model, const fs::path &features,
                   const fs::path &manifest, const fs::path &out_dir) {
  const ModelFile mf = ReadModelFile(model, {"DNN "});
  if (!mf.dnn) throw InvalidArgument(model.string() + " has no DNN section");
  const CorpusManifest m = LoadManifest(manifest, {.check_audio = false});
  std::map<std::string, const UtteranceRecord *> rec;
  for (const auto &r : m.records) rec[r.utt_id] = &r;
  std::vector<Matrix> blocks;
  std::vector<PlotLabel> labels;
  Eigen::Index dim = 0;
  for (const auto &r : ReadArchive(features)) {
    const auto it = rec.find(r.id);
    if (it == rec.end() || (it->second->event != EventType::kNormal && it->second->event != EventType::kDisguised))
      continue;
    Matrix f = mf.dnn->Forward(r.matrix).features;
    dim = f.cols();
    for (Eigen::Index t = 0; t < f.rows(); ++t) labels.push_back({it->second->spk_id, EventName(it->second->event)});
    blocks.push_back(std::move(f));
  }
  if (labels.empty()) throw InvalidArgument("no normal or disguised utterances to plot");
  Matrix all(static_cast<Eigen::Index>(labels.size()), dim);
  Eigen::Index row = 0;
  for (const auto &b : blocks) {
    all.middleRows(row, b.rows()) = b;
    row += b.rows();
  }
  const auto keep = SubsampleGroups(labels, cfg.tsne_max_per_group, cfg.seed);
  Matrix x(static_cast<Eigen::Index>(keep.size()), dim);
  std::vector<PlotLabel> kept;
  for (std::size_t i = 0; i < keep.size(); ++i) {
    x.row(static_cast<Eigen::Index>(i)) = all.row(keep[i]);
    kept.push_back(labels[keep[i]]);
  }
  TsneConfig tc = cfg.tsne;
  tc.seed = cfg.seed;
  tc.threads = cfg.Threads();
  const Matrix proj = Tsne(x, tc);
  WritePlotFiles(out_dir, ExportPlotData(proj, kept), TsneMetadata(tc));
}

// ---------------------------------------------------------------------------

PipelineResult RunSyntheticPipeline(const PipelineConfig &cfg, const fs::path &work_dir, bool verbose) {
  const auto t0 = std::chrono::steady_clock::now();
  auto log = [&](const std::string &msg) {
    if (!verbose) return;
    const double s = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::cerr << "[" << static_cast<int>(s) << "s] " << msg << "\n";
  };
  const fs::path w = work_dir;
  fs::create_directories(w);
  EchoConfig(cfg, "pipeline", w);
  PipelineResult result;

  RunSynthCorpus(cfg.train_corpus, w / "train");
  RunSynthCorpus(cfg.corpus, w / "eval");
  log("corpora synthesized");
  const fs::path train_m = w / "train" / "manifest.tsv", eval_m = w / "eval" / "manifest.tsv";
  for (const char *set : {"train", "eval"}) {
    const fs::path m = w / set / "manifest.tsv";
    RunExtractFeatures(cfg, m, FeatureKind::kIvector, w / "feats" / (std::string(set) + ".mfcc.tevf"));
    RunExtractFeatures(cfg, m, FeatureKind::kDvector, w / "feats" / (std::string(set) + ".fbank.tevf"));
  }
  log("features extracted");

  const fs::path ubm = w / "models" / "ubm.tevm", tvm = w / "models" / "tvm.tevm", dnn = w / "models" / "dnn.tevm";
  RunTrainUbm(cfg, w / "feats" / "train.mfcc.tevf", ubm);
  log("ubm trained");
  for (const char *set : {"train", "eval"})
    RunAccumulateStats(cfg, ubm, w / "feats" / (std::string(set) + ".mfcc.tevf"),
                       w / "stats" / (std::string(set) + ".tevf"));
  RunTrainTmatrix(cfg, ubm, w / "stats" / "train.tevf", tvm);
  log("T matrix trained");
  for (const char *set : {"train", "eval"})
    RunExtractIvectors(cfg, tvm, w / "stats" / (std::string(set) + ".tevf"),
                       w / "vectors" / (std::string(set) + ".ivector.txt"));
  RunTrainDnn(cfg, w / "feats" / "train.fbank.tevf", train_m, dnn);
  log("network trained");
  for (const char *set : {"train", "eval"})
    RunExtractDvectors(cfg, dnn, w / "feats" / (std::string(set) + ".fbank.tevf"),
                       w / "vectors" / (std::string(set) + ".dvector.txt"));

  const fs::path trials = w / "trials" / "all.trials";
  RunGenTrials(eval_m, "all", trials);
  const CorpusManifest em = LoadManifest(eval_m, {.check_audio = false});
  const auto spk = SpeakerOf(em);
  std::map<std::string, EventType> event_of;
  for (const auto &r : em.records) event_of[r.utt_id] = r.event;

  for (const char *kind : {"ivector", "dvector"}) {
    const fs::path base = std::string(kind) == "ivector" ? tvm : dnn;
    const fs::path backend = w / "models" / (std::string(kind) + "-backend.tevm");
    const fs::path train_v = w / "vectors" / (std::string("train.") + kind + ".txt");
    RunTrainLda(cfg, train_v, train_m, base, backend);
    RunTrainPlda(cfg, train_v, train_m, backend, backend);
    for (ScoringMethod method : {ScoringMethod::kCosine, ScoringMethod::kLdaCosine, ScoringMethod::kPlda}) {
      PipelineConfig c = cfg;
      c.method = method;
      const std::string name = std::string(kind) + "-" + ScoringMethodName(method);
      const fs::path scores = w / "scores" / (name + ".scores");
      const fs::path report = w / "reports" / (name + ".txt");
      RunScore(c, trials, w / "vectors" / (std::string("eval.") + kind + ".txt"), backend, scores);
      result.reports[name] = RunEvalEer(scores, trials, report, name + " pooled over per-event trials");
      result.artifacts.push_back(scores);
      result.artifacts.push_back(report);

      // Per-event breakdown of the same scores.
      std::map<EventType, std::pair<std::vector<double>, std::vector<bool>>> by_event;
      for (const auto &s : ReadScores(scores)) {
        auto &slot = by_event[event_of.at(s.utt_a)];
        slot.first.push_back(s.score);
        slot.second.push_back(spk.at(s.utt_a) == spk.at(s.utt_b));
      }
      for (const auto &[ev, sl] : by_event) {
        const std::string ename = name + "-" + EventName(ev);
        const EvalReport r = ComputeEer(sl.first, sl.second);
        const fs::path path = w / "reports" / (ename + ".txt");
        std::ofstream os(path, std::ios::binary);
        WriteReport(os, r, ename);
        result.reports[ename] = r;
        result.artifacts.push_back(path);
      }
    }
    result.artifacts.push_back(backend);
  }
  result.artifacts.insert(result.artifacts.end(), {ubm, tvm, dnn});
  log("scored");
  result.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return result;
}

}  // namespace tev
