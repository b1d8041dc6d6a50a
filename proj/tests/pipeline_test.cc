// tests/pipeline_test.cc

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

#include <string>

#include "doctest.h"
#include "json.hpp"
#include "testutil.h"
#include "tev/io.h"
#include "tev/pipeline.h"

using namespace tev;
using json = nlohmann::json;
using tevtest::ReadText;
using tevtest::TempDir;
using tevtest::TinyPipelineConfig;

TEST_CASE("config JSON round trip") {
  PipelineConfig a = TinyPipelineConfig();
  a.method = ScoringMethod::kPlda;
  a.mfcc.cmvn = true;
  PipelineConfig b;
  b.MergeJson(a.ToJson());
  CHECK(b.ToJson() == a.ToJson());
  CHECK(json::parse(a.ToJson()).at("backend").at("method") == "plda");
}

TEST_CASE("config overrides") {
  PipelineConfig c;
  const std::string before = c.ToJson();
  c.Set("gmm.n_components=16");
  c.Set("backend.method=lda-cosine");
  c.Set("embednet.lr=0.5");
  c.Set("corpus.events=[\"cough\",\"sniff\"]");
  CHECK(c.gmm.n_components == 16);
  CHECK(c.method == ScoringMethod::kLdaCosine);
  CHECK(c.embednet.lr == 0.5);
  REQUIRE(c.corpus.events.size() == 2);
  CHECK(c.corpus.events[1] == EventType::kSniff);
  c.MergeJson(R"({"tvspace":{"ivector_dim":7}})");
  CHECK(c.ivector_dim == 7);
  CHECK(c.gmm.n_components == 16);
  CHECK(c.ToJson() != before);
}

TEST_CASE("config errors") {
  PipelineConfig c;
  const std::string before = c.ToJson();
  CHECK_THROWS_AS(c.Set("gmm.n_comps=4"), InvalidArgument);
  CHECK_THROWS_AS(c.Set("nosuch=1"), InvalidArgument);
  CHECK_THROWS_AS(c.Set("novalue"), InvalidArgument);
  CHECK_THROWS_AS(c.Set("=3"), InvalidArgument);
  CHECK_THROWS_AS(c.Set("gmm.n_components=\"many\""), InvalidArgument);
  CHECK_THROWS_AS(c.MergeJson("{"), InvalidArgument);
  CHECK_THROWS_AS(c.Set("backend.method=euclid"), InvalidArgument);
  CHECK(c.ToJson() == before);
}

TEST_CASE("config load and echo") {
  TempDir dir("config");
  tevtest::WriteText(dir / "c.json", R"({"seed": 9, "gmm": {"n_iters": 3}})");
  const PipelineConfig c = PipelineConfig::Load(dir / "c.json");
  CHECK(c.seed == 9);
  CHECK(c.gmm.n_iters == 3);
  EchoConfig(c, "train-ubm", dir / "out");
  CHECK(ReadText(dir / "out" / "train-ubm.config.json") == c.ToJson());
  CHECK_THROWS_AS(PipelineConfig::Load(dir / "missing.json"), IoError);
}

TEST_CASE("feature kind names") {
  CHECK(ParseFeatureKind("ivector") == FeatureKind::kIvector);
  CHECK(ParseFeatureKind("dvector") == FeatureKind::kDvector);
  CHECK_THROWS_AS(ParseFeatureKind("xvector"), InvalidArgument);
}

TEST_CASE("tiny synthetic pipeline") {
  TempDir dir("pipeline");
  const PipelineConfig cfg = TinyPipelineConfig();
  const PipelineResult r = RunSyntheticPipeline(cfg, dir.path());
  for (const char *kind : {"ivector", "dvector"})
    for (const char *method : {"cosine", "lda-cosine", "plda"}) {
      const std::string name = std::string(kind) + "-" + method;
      REQUIRE(r.reports.count(name) == 1);
      const EvalReport &e = r.reports.at(name);
      CHECK(e.eer >= 0.0);
      CHECK(e.eer <= 1.0);
      // 4 speakers x 3 utterances per event, 2 events.
      CHECK(e.n_target == 2 * 4 * 3);
      CHECK(e.n_nontarget == 2 * (66 - 12));
      CHECK(r.reports.count(name + "-cough") == 1);
      CHECK(r.reports.count(name + "-hmm") == 1);
    }
  for (const auto &p : r.artifacts) CHECK(std::filesystem::exists(p));
  CHECK(ModelSections(dir / "models" / "ivector-backend.tevm") ==
        std::vector<std::string>{"GMM ", "TVM ", "LDA ", "PLDA"});
  CHECK(ReadText(dir / "pipeline.config.json") == cfg.ToJson());

  CHECK_THROWS_AS(RunTsneExport(cfg, dir / "models" / "dnn.tevm", dir / "feats" / "eval.fbank.tevf",
                                dir / "eval" / "manifest.tsv", dir / "tsne"),
                  InvalidArgument);

  SynthSpec spec = cfg.corpus;
  spec.n_speakers = 2;
  spec.events = {EventType::kNormal, EventType::kDisguised};
  RunSynthCorpus(spec, dir / "speech");
  RunExtractFeatures(cfg, dir / "speech" / "manifest.tsv", FeatureKind::kDvector, dir / "speech.tevf");
  PipelineConfig tc = cfg;
  tc.tsne_max_per_group = 30;
  RunTsneExport(tc, dir / "models" / "dnn.tevm", dir / "speech.tevf", dir / "speech" / "manifest.tsv", dir / "tsne");
  const std::string all = ReadText(dir / "tsne" / "all.tsv");
  std::size_t rows = 0;
  for (const char ch : all) rows += ch == '\n';
  CHECK(rows > 4 * 30);
}
