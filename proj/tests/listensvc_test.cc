// tests/listensvc_test.cc

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

#include <set>
#include <string>

#include "doctest.h"
#include "json.hpp"
#include "testutil.h"
#include "tev/listensvc.h"
// After the Eigen-based headers: httplib pulls in system macros.
#include "httplib.h"

using namespace tev;
using json = nlohmann::json;
using tevtest::TempDir;

namespace {

struct Fixture {
  TempDir dir{"listen"};
  CorpusManifest manifest;

  Fixture() {
    SynthSpec spec;
    spec.n_speakers = 4;
    spec.utts_per_speaker_per_event = 3;
    spec.events.assign(kTrivialEvents.begin(), kTrivialEvents.end());
    spec.events.push_back(EventType::kNormal);
    spec.events.push_back(EventType::kDisguised);
    spec.duration_range_s = {0.2, 0.25};
    spec.seed = 17;
    manifest = SynthCorpus(spec, dir / "corpus");
  }
  std::filesystem::path log() const { return dir / "sessions.ndjson"; }
};

json Call(ListenService &svc, const std::string &method, const std::string &path, const std::string &body,
          int expect_status) {
  const ServiceResponse r = svc.Handle(method, path, body);
  CHECK(r.status == expect_status);
  return json::parse(r.body);
}

std::string Answer(bool same) { return json{{"answer", same ? "same" : "different"}}.dump(); }

// Identity-bearing strings that must not reach a client before finalize.
std::set<std::string> Secrets(const CorpusManifest &m) {
  std::set<std::string> s = {"spk_id", "is_target", "utt_id", "target"};
  for (const auto &r : m.records) {
    s.insert(r.spk_id);
    s.insert(r.utt_id);
    s.insert(r.path);
  }
  return s;
}

void CheckNoLeak(const std::string &payload, const std::set<std::string> &secrets) {
  for (const auto &s : secrets) CHECK_MESSAGE(payload.find(s) == std::string::npos, "leaked " << s);
}

}  // namespace

TEST_CASE("session config validation") {
  SessionConfig c;
  CHECK_NOTHROW(c.Validate());
  c.per_event = 0;
  CHECK_THROWS_AS(c.Validate(), InvalidArgument);
  c = SessionConfig{};
  c.p_target = 1.5;
  CHECK_THROWS_AS(c.Validate(), InvalidArgument);
}

TEST_CASE("scripted trivial-event session") {
  Fixture fx;
  ListenService svc(fx.manifest, fx.log(), 99);
  const auto secrets = Secrets(fx.manifest);

  const ServiceResponse created = svc.Handle("POST", "/sessions", R"({"protocol":"trivial","seed":5})");
  REQUIRE(created.status == 200);
  CheckNoLeak(created.body, secrets);
  const json c = json::parse(created.body);
  const std::string id = c.at("session_id");
  CHECK(id.size() == 16);
  CHECK(c.at("n_trials") == 36);

  // Answer key from the server side; every third trial answered wrongly.
  const HumanSession &truth = svc.Session(id);
  REQUIRE(truth.trials.size() == 36);
  std::map<EventType, DerCounts> expect;
  DerCounts expect_all;
  for (std::size_t k = 0; k < 36; ++k) {
    const ServiceResponse tr = svc.Handle("GET", "/sessions/" + id + "/trials/" + std::to_string(k), "");
    REQUIRE(tr.status == 200);
    CheckNoLeak(tr.body, secrets);
    const json t = json::parse(tr.body);
    CHECK(t.at("index") == k);
    CHECK(t.at("answered") == false);
    const ServiceResponse audio = svc.Handle("GET", "/audio/" + t.at("audio_a").get<std::string>(), "");
    CHECK(audio.status == 200);
    CHECK(audio.content_type == "audio/wav");
    CHECK(audio.body.substr(0, 4) == "RIFF");

    const bool target = truth.trials[k].is_target;
    const bool wrong = k % 3 == 0;
    const ServiceResponse ack =
        svc.Handle("POST", "/sessions/" + id + "/trials/" + std::to_string(k) + "/answer", Answer(target != wrong));
    CHECK(ack.status == 200);
    CheckNoLeak(ack.body, secrets);
    DerCounts d;
    d.trials = 1;
    d.errors = wrong;
    d.false_alarms = wrong && !target;
    d.false_rejections = wrong && target;
    expect[truth.trials[k].event] += d;
    expect_all += d;
  }
  CheckNoLeak(svc.Handle("GET", "/sessions/" + id + "/report", "").body, secrets);

  const json report = Call(svc, "POST", "/sessions/" + id + "/finalize", "", 200);
  CHECK(report.at("overall").at("errors") == expect_all.errors);
  CHECK(report.at("overall").at("trials") == 36);
  CHECK(report.at("overall").at("false_alarms") == expect_all.false_alarms);
  CHECK(report.at("overall").at("der") == static_cast<double>(expect_all.errors) / 36.0);
  CHECK(report.at("overall").at("der_percent") == "33.33");
  for (const auto &[event, d] : expect) {
    const json &pe = report.at("per_event").at(EventName(event));
    CHECK(pe.at("errors") == d.errors);
    CHECK(pe.at("trials") == d.trials);
    CHECK(pe.at("false_rejections") == d.false_rejections);
  }
  CHECK(report.at("trials").size() == 36);
  CHECK(report.at("trials")[0].contains("is_target"));
  CHECK(svc.IsFinalized(id));
  CHECK(Call(svc, "GET", "/sessions/" + id + "/report", "", 200) == report);
  CHECK(Call(svc, "POST", "/sessions/" + id + "/finalize", "", 200) == report);
}

TEST_CASE("answer errors") {
  Fixture fx;
  ListenService svc(fx.manifest, fx.log(), 1);
  const std::string id = svc.CreateSession(SessionConfig{});
  const std::string base = "/sessions/" + id + "/trials/";
  Call(svc, "POST", base + "0/answer", Answer(true), 200);
  Call(svc, "POST", base + "0/answer", Answer(false), 409);
  CHECK_THROWS_AS(svc.SubmitAnswer(id, 0, "same"), ServiceError);
  Call(svc, "POST", base + "36/answer", Answer(true), 404);
  Call(svc, "GET", base + "36", "", 404);
  Call(svc, "GET", "/sessions/ffffffffffffffff/trials/0", "", 404);
  Call(svc, "POST", base + "1/answer", R"({"answer":"maybe"})", 400);
  Call(svc, "POST", base + "1/answer", "not json", 400);
  Call(svc, "POST", base + "x/answer", Answer(true), 404);
  Call(svc, "GET", "/audio/000000000000000000000000", "", 404);
  Call(svc, "GET", "/nowhere", "", 404);
  Call(svc, "POST", "/sessions/" + id + "/finalize", "", 409);
  Call(svc, "GET", "/sessions/" + id + "/report", "", 409);
  Call(svc, "POST", "/sessions", R"({"protocol":"opera"})", 400);
}

TEST_CASE("insufficient corpus") {
  Fixture fx;
  CorpusManifest thin = fx.manifest;
  std::erase_if(thin.records, [](const UtteranceRecord &r) { return r.event != EventType::kCough; });
  ListenService svc(thin, fx.log(), 1);
  Call(svc, "POST", "/sessions", "{}", 422);
  CHECK(svc.NumSessions() == 0);
}

TEST_CASE("disguise protocol session") {
  Fixture fx;
  ListenService svc(fx.manifest, fx.log(), 2);
  const json c = Call(svc, "POST", "/sessions", R"({"protocol":"disguise","imposter_noise":2,"seed":3})", 200);
  CHECK(c.at("n_trials") == 8);
  CHECK(c.at("n_counted") == 6);
  const std::string id = c.at("session_id");
  const HumanSession &s = svc.Session(id);
  for (std::size_t k = 0; k < s.trials.size(); ++k)
    svc.SubmitAnswer(id, k, s.trials[k].counted ? "different" : "same");
  const SessionReport r = svc.Finalize(id);
  CHECK(r.overall.trials == 6);
  CHECK(r.overall.errors == 6);
  CHECK(r.overall.false_rejections == 6);
}

TEST_CASE("same seed gives the same session") {
  Fixture fx;
  ListenService svc(fx.manifest, fx.log(), 3);
  SessionConfig cfg;
  cfg.seed = 42;
  const std::string a = svc.CreateSession(cfg), b = svc.CreateSession(cfg);
  CHECK(a != b);
  const auto &ta = svc.Session(a).trials, &tb = svc.Session(b).trials;
  REQUIRE(ta.size() == tb.size());
  for (std::size_t k = 0; k < ta.size(); ++k) {
    CHECK(ta[k].utt_a == tb[k].utt_a);
    CHECK(ta[k].utt_b == tb[k].utt_b);
  }
}

TEST_CASE("restart replays the log") {
  Fixture fx;
  std::string id;
  std::string token;
  {
    ListenService svc(fx.manifest, fx.log(), 4);
    id = svc.CreateSession(SessionConfig{});
    for (std::size_t k = 0; k < 10; ++k) svc.SubmitAnswer(id, k, k % 2 ? "same" : "different");
    token = json::parse(svc.TrialJson(id, 0)).at("audio_a");
    svc.Audio(token);
    svc.Audio(token);
  }
  ListenService again(fx.manifest, fx.log(), 4);
  CHECK(again.NumSessions() == 1);
  const HumanSession &s = again.Session(id);
  for (std::size_t k = 0; k < 36; ++k) {
    CHECK(s.answers[k].has_value() == (k < 10));
    if (k < 10) CHECK(*s.answers[k] == (k % 2 == 1));
  }
  CHECK(again.ReplayCount(token) == 2);
  CHECK_THROWS_AS(again.SubmitAnswer(id, 3, "same"), ServiceError);
  const std::string other = again.CreateSession(SessionConfig{});
  CHECK(other != id);
}

TEST_CASE("aggregate over sessions") {
  Fixture fx;
  ListenService svc(fx.manifest, fx.log(), 5);
  std::size_t wrong = 0;
  for (int n = 0; n < 33; ++n) {
    const std::string id = svc.CreateSession(SessionConfig{});
    const HumanSession &s = svc.Session(id);
    for (std::size_t k = 0; k < s.trials.size(); ++k) {
      const bool err = (n + k) % 5 == 0;
      wrong += err;
      svc.SubmitAnswer(id, k, s.trials[k].is_target != err ? "same" : "different");
    }
    svc.Finalize(id);
  }
  const DerCounts agg = svc.Aggregate();
  CHECK(agg.trials == 1188);
  CHECK(agg.errors == wrong);
  CHECK(agg.Rate() == static_cast<double>(wrong) / 1188.0);
}

TEST_CASE("HTTP transport") {
  Fixture fx;
  ListenService svc(fx.manifest, fx.log(), 6);
  ListenServer server(svc);
  const int port = server.Start("127.0.0.1", 0);
  REQUIRE(port > 0);
  httplib::Client client("127.0.0.1", port);
  auto created = client.Post("/sessions", R"({"seed":1})", "application/json");
  REQUIRE(created);
  CHECK(created->status == 200);
  const std::string id = json::parse(created->body).at("session_id");
  auto trial = client.Get("/sessions/" + id + "/trials/0");
  REQUIRE(trial);
  const json t = json::parse(trial->body);
  auto audio = client.Get("/audio/" + t.at("audio_b").get<std::string>());
  REQUIRE(audio);
  CHECK(audio->get_header_value("Content-Type") == "audio/wav");
  auto ans = client.Post("/sessions/" + id + "/trials/0/answer", Answer(true), "application/json");
  REQUIRE(ans);
  CHECK(ans->status == 200);
  auto dup = client.Post("/sessions/" + id + "/trials/0/answer", Answer(true), "application/json");
  REQUIRE(dup);
  CHECK(dup->status == 409);
  server.Stop();
}
