// listensvc.cc

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
#include <chrono>
#include <cstdio>
#include <fstream>
#include <thread>

#include "tev/listensvc.h"

// After Eigen: <resolv.h> defines a _res macro that clashes with Eigen names.
#include "httplib.h"
#include "json.hpp"

namespace tev {

using nlohmann::json;

namespace {

std::int64_t NowMs() {
  return std::chrono::duration_cast<std::chrono::milliseconds>(
             std::chrono::system_clock::now().time_since_epoch())
      .count();
}

std::string ProtocolName(Protocol p) { return p == Protocol::kTrivial ? "trivial" : "disguise"; }

Protocol ParseProtocol(const std::string &s) {
  if (s == "trivial") return Protocol::kTrivial;
  if (s == "disguise") return Protocol::kDisguise;
  throw ServiceError(400, "unknown protocol '" + s + "'");
}

json CountsJson(const DerCounts &c) {
  char pct[32];
  std::snprintf(pct, sizeof(pct), "%.2f", 100.0 * c.Rate());
  return {{"errors", c.errors},
          {"false_alarms", c.false_alarms},
          {"false_rejections", c.false_rejections},
          {"trials", c.trials},
          {"der", c.Rate()},
          {"der_percent", pct}};
}

std::vector<std::string> SplitPath(const std::string &path) {
  std::vector<std::string> parts;
  std::size_t i = 0;
  while (i < path.size()) {
    while (i < path.size() && path[i] == '/') ++i;
    const std::size_t j = path.find('/', i);
    if (i < path.size()) parts.push_back(path.substr(i, j == std::string::npos ? std::string::npos : j - i));
    i = j == std::string::npos ? path.size() : j;
  }
  return parts;
}

std::size_t ParseIndex(const std::string &s) {
  if (s.empty() || s.size() > 9 || s.find_first_not_of("0123456789") != std::string::npos)
    throw ServiceError(404, "unknown trial '" + s + "'");
  return static_cast<std::size_t>(std::stoul(s));
}

}  // namespace

void SessionConfig::Validate() const {
  if (per_event < 1) throw InvalidArgument("per_event must be >= 1");
  if (!(p_target >= 0.0 && p_target <= 1.0)) throw InvalidArgument("p_target must lie in [0, 1]");
  if (counted < 1 || imposter_noise < 0) throw InvalidArgument("bad disguise trial counts");
}

ListenService::ListenService(CorpusManifest manifest, std::filesystem::path log_path, std::uint64_t id_seed)
    : manifest_(std::move(manifest)), log_path_(std::move(log_path)), id_rng_(id_seed) {
  Replay();
}

std::string ListenService::NewId(std::size_t hex_chars) {
  static const char kHex[] = "0123456789abcdef";
  for (;;) {
    std::string id;
    while (id.size() < hex_chars) {
      std::uint64_t v = id_rng_.Next();
      for (int i = 0; i < 16 && id.size() < hex_chars; ++i, v >>= 4) id.push_back(kHex[v & 15]);
    }
    if (!sessions_.count(id) && !tokens_.count(id)) return id;
  }
}

ListenService::Entry &ListenService::Find(const std::string &session_id) {
  const auto it = sessions_.find(session_id);
  if (it == sessions_.end()) throw ServiceError(404, "unknown session");
  return it->second;
}

const ListenService::Entry &ListenService::Find(const std::string &session_id) const {
  const auto it = sessions_.find(session_id);
  if (it == sessions_.end()) throw ServiceError(404, "unknown session");
  return it->second;
}

void ListenService::Append(const std::string &line) {
  std::ofstream os(log_path_, std::ios::app | std::ios::binary);
  os << line << '\n';
  os.flush();
  if (!os) throw IoError("cannot append to session log " + log_path_.string());
}

void ListenService::Replay() {
  std::ifstream is(log_path_, std::ios::binary);
  if (!is) return;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      Apply(line, true);
    } catch (const std::exception &e) {
      Warn("session log line " + std::to_string(lineno) + " ignored: " + e.what());
    }
  }
}

void ListenService::Apply(const std::string &line, bool from_log) {
  const json ev = json::parse(line);
  const std::string type = ev.at("type");
  if (type == "create") {
    Entry e;
    e.protocol = ParseProtocol(ev.at("protocol"));
    e.session.session_id = ev.at("session_id");
    e.session.created_ms = ev.at("created_ms");
    for (const auto &t : ev.at("trials")) {
      HumanTrial h;
      h.utt_a = t.at("utt_a");
      h.utt_b = t.at("utt_b");
      h.event = ParseEvent(t.at("event"));
      h.is_target = t.at("is_target");
      h.counted = t.at("counted");
      e.session.trials.push_back(h);
      e.tokens.emplace_back(t.at("token_a"), t.at("token_b"));
      tokens_[t.at("token_a")] = {h.utt_a};
      tokens_[t.at("token_b")] = {h.utt_b};
    }
    e.session.answers.assign(e.session.trials.size(), std::nullopt);
    e.session.answer_times_ms.assign(e.session.trials.size(), 0);
    sessions_[e.session.session_id] = std::move(e);
  } else if (type == "answer") {
    Entry &e = Find(ev.at("session_id"));
    const std::size_t k = ev.at("trial");
    if (k >= e.session.trials.size() || e.session.answers[k]) {
      if (from_log) throw InvalidArgument("inconsistent answer record");
      return;
    }
    e.session.answers[k] = ev.at("same").get<bool>();
    e.session.answer_times_ms[k] = ev.at("time_ms");
  } else if (type == "replay") {
    ++replays_[ev.at("token")];
  } else if (type == "finalize") {
    Find(ev.at("session_id")).finalized = true;
  } else {
    throw InvalidArgument("unknown record type '" + type + "'");
  }
}

std::string ListenService::CreateSession(const SessionConfig &cfg) {
  try {
    cfg.Validate();
  } catch (const InvalidArgument &e) {
    throw ServiceError(400, e.what());
  }
  std::lock_guard<std::mutex> lock(mu_);
  const std::uint64_t seed = cfg.seed ? *cfg.seed : id_rng_.Next();
  std::vector<HumanTrial> trials;
  try {
    trials = cfg.protocol == Protocol::kTrivial
                 ? GenHumanTrials(manifest_, cfg.per_event, cfg.p_target, seed)
                 : GenDisguiseHumanTrials(manifest_, cfg.counted, cfg.imposter_noise, seed);
  } catch (const InvalidArgument &e) {
    throw ServiceError(422, std::string("insufficient corpus: ") + e.what());
  }
  if (cfg.protocol == Protocol::kTrivial)
    for (EventType e : kTrivialEvents)
      if (std::none_of(trials.begin(), trials.end(), [e](const HumanTrial &t) { return t.event == e; }))
        throw ServiceError(422, "insufficient corpus: no " + EventName(e) + " utterances");
  const std::string id = NewId(16);
  json rec = {{"type", "create"},
              {"session_id", id},
              {"protocol", ProtocolName(cfg.protocol)},
              {"seed", seed},
              {"created_ms", NowMs()},
              {"trials", json::array()}};
  for (const auto &t : trials) {
    const std::string ta = NewId(24);
    tokens_[ta] = {t.utt_a};
    const std::string tb = NewId(24);
    tokens_[tb] = {t.utt_b};
    rec["trials"].push_back({{"utt_a", t.utt_a},
                             {"utt_b", t.utt_b},
                             {"event", EventName(t.event)},
                             {"is_target", t.is_target},
                             {"counted", t.counted},
                             {"token_a", ta},
                             {"token_b", tb}});
  }
  const std::string line = rec.dump();
  Append(line);
  Apply(line, false);
  return id;
}

std::string ListenService::TrialJson(const std::string &session_id, std::size_t k) const {
  std::lock_guard<std::mutex> lock(mu_);
  const Entry &e = Find(session_id);
  if (k >= e.session.trials.size()) throw ServiceError(404, "unknown trial");
  const json out = {{"session_id", session_id},
                    {"index", k},
                    {"n_trials", e.session.trials.size()},
                    {"event", EventName(e.session.trials[k].event)},
                    {"audio_a", e.tokens[k].first},
                    {"audio_b", e.tokens[k].second},
                    {"answered", e.session.answers[k].has_value()}};
  return out.dump();
}

std::string ListenService::Audio(const std::string &token) {
  std::lock_guard<std::mutex> lock(mu_);
  const auto it = tokens_.find(token);
  if (it == tokens_.end()) throw ServiceError(404, "unknown audio token");
  const UtteranceRecord &r = manifest_.Find(it->second.utt_id);
  // Re-encoded so no container metadata reaches the client.
  std::string wav = EncodeWav(ReadWav(manifest_.AudioPath(r)));
  const std::string line = json{{"type", "replay"}, {"token", token}}.dump();
  Append(line);
  Apply(line, false);
  return wav;
}

void ListenService::SubmitAnswer(const std::string &session_id, std::size_t k, const std::string &answer) {
  if (answer != "same" && answer != "different") throw ServiceError(400, "answer must be 'same' or 'different'");
  std::lock_guard<std::mutex> lock(mu_);
  Entry &e = Find(session_id);
  if (k >= e.session.trials.size()) throw ServiceError(404, "unknown trial");
  if (e.finalized) throw ServiceError(409, "session already finalized");
  if (e.session.answers[k]) throw ServiceError(409, "trial already answered");
  const std::string line = json{{"type", "answer"},
                                {"session_id", session_id},
                                {"trial", k},
                                {"same", answer == "same"},
                                {"time_ms", NowMs()}}
                               .dump();
  Append(line);
  Apply(line, false);
}

SessionReport ListenService::MakeReport(const Entry &e) {
  SessionReport r;
  r.overall = CountDer(e.session);
  if (e.protocol == Protocol::kTrivial) r.per_event = CountDerPerEvent(e.session);
  return r;
}

SessionReport ListenService::Finalize(const std::string &session_id) {
  std::lock_guard<std::mutex> lock(mu_);
  Entry &e = Find(session_id);
  if (e.finalized) return MakeReport(e);
  for (std::size_t k = 0; k < e.session.trials.size(); ++k)
    if (e.session.trials[k].counted && !e.session.answers[k])
      throw ServiceError(409, "session incomplete: trial " + std::to_string(k) + " unanswered");
  const SessionReport report = MakeReport(e);
  const std::string line = json{{"type", "finalize"}, {"session_id", session_id}}.dump();
  Append(line);
  Apply(line, false);
  return report;
}

std::string ListenService::ReportBody(const Entry &e) {
  const SessionReport r = MakeReport(e);
  json out = {{"session_id", e.session.session_id},
              {"protocol", ProtocolName(e.protocol)},
              {"overall", CountsJson(r.overall)},
              {"per_event", json::object()},
              {"trials", json::array()}};
  for (const auto &[ev, c] : r.per_event) out["per_event"][EventName(ev)] = CountsJson(c);
  for (std::size_t k = 0; k < e.session.trials.size(); ++k) {
    const HumanTrial &t = e.session.trials[k];
    json tj = {{"index", k}, {"event", EventName(t.event)}, {"counted", t.counted}, {"is_target", t.is_target}};
    tj["answer"] = e.session.answers[k] ? json(*e.session.answers[k] ? "same" : "different") : json(nullptr);
    out["trials"].push_back(std::move(tj));
  }
  return out.dump();
}

std::string ListenService::ReportJson(const std::string &session_id) const {
  std::lock_guard<std::mutex> lock(mu_);
  const Entry &e = Find(session_id);
  if (!e.finalized) throw ServiceError(409, "session not finalized");
  return ReportBody(e);
}

const HumanSession &ListenService::Session(const std::string &session_id) const {
  std::lock_guard<std::mutex> lock(mu_);
  return Find(session_id).session;
}

bool ListenService::IsFinalized(const std::string &session_id) const {
  std::lock_guard<std::mutex> lock(mu_);
  return Find(session_id).finalized;
}

std::size_t ListenService::NumSessions() const {
  std::lock_guard<std::mutex> lock(mu_);
  return sessions_.size();
}

std::size_t ListenService::ReplayCount(const std::string &token) const {
  std::lock_guard<std::mutex> lock(mu_);
  const auto it = replays_.find(token);
  return it == replays_.end() ? 0 : it->second;
}

DerCounts ListenService::Aggregate() const {
  std::lock_guard<std::mutex> lock(mu_);
  DerCounts total;
  for (const auto &[id, e] : sessions_)
    if (e.finalized) total += CountDer(e.session);
  return total;
}

ServiceResponse ListenService::Handle(const std::string &method, const std::string &path, const std::string &body) {
  auto error = [](int status, const std::string &msg) {
    return ServiceResponse{status, "application/json", json{{"error", msg}}.dump()};
  };
  try {
    const auto p = SplitPath(path);
    if (method == "POST" && p.size() == 1 && p[0] == "sessions") {
      SessionConfig cfg;
      const json req = body.empty() ? json::object() : json::parse(body);
      if (!req.is_object()) return error(400, "expected a JSON object");
      cfg.protocol = ParseProtocol(req.value("protocol", std::string("trivial")));
      cfg.per_event = req.value("per_event", cfg.per_event);
      cfg.p_target = req.value("p_target", cfg.p_target);
      cfg.counted = req.value("counted", cfg.counted);
      cfg.imposter_noise = req.value("imposter_noise", cfg.imposter_noise);
      if (req.contains("seed")) cfg.seed = req.at("seed").get<std::uint64_t>();
      const std::string id = CreateSession(cfg);
      std::size_t n_trials = 0, n_counted = 0;
      {
        std::lock_guard<std::mutex> lock(mu_);
        for (const auto &t : Find(id).session.trials) {
          ++n_trials;
          n_counted += t.counted;
        }
      }
      return {200, "application/json",
              json{{"session_id", id}, {"protocol", ProtocolName(cfg.protocol)}, {"n_trials", n_trials},
                   {"n_counted", n_counted}}
                  .dump()};
    }
    if (method == "GET" && p.size() == 4 && p[0] == "sessions" && p[2] == "trials")
      return {200, "application/json", TrialJson(p[1], ParseIndex(p[3]))};
    if (method == "GET" && p.size() == 2 && p[0] == "audio") return {200, "audio/wav", Audio(p[1])};
    if (method == "POST" && p.size() == 5 && p[0] == "sessions" && p[2] == "trials" && p[4] == "answer") {
      const std::size_t k = ParseIndex(p[3]);
      const json req = json::parse(body);
      if (!req.is_object() || !req.contains("answer") || !req.at("answer").is_string())
        return error(400, "expected {\"answer\": \"same\"|\"different\"}");
      SubmitAnswer(p[1], k, req.at("answer").get<std::string>());
      return {200, "application/json", json{{"ok", true}, {"index", k}}.dump()};
    }
    if (method == "POST" && p.size() == 3 && p[0] == "sessions" && p[2] == "finalize") {
      Finalize(p[1]);
      return {200, "application/json", ReportJson(p[1])};
    }
    if (method == "GET" && p.size() == 3 && p[0] == "sessions" && p[2] == "report")
      return {200, "application/json", ReportJson(p[1])};
    return error(404, "no such endpoint");
  } catch (const ServiceError &e) {
    return error(e.status(), e.what());
  } catch (const json::exception &e) {
    return error(400, std::string("bad request body: ") + e.what());
  } catch (const std::exception &e) {
    return error(500, e.what());
  }
}

// ---------------------------------------------------------------------------

struct ListenServer::Impl {
  ListenService &service;
  httplib::Server server;
  std::thread thread;

  explicit Impl(ListenService &s) : service(s) {
    auto handler = [this](const httplib::Request &req, httplib::Response &res) {
      const ServiceResponse r = service.Handle(req.method, req.path, req.body);
      res.status = r.status;
      res.set_content(r.body, r.content_type);
    };
    server.Get(".*", handler);
    server.Post(".*", handler);
  }
};

ListenServer::ListenServer(ListenService &service) : impl_(std::make_unique<Impl>(service)) {}

ListenServer::~ListenServer() { Stop(); }

int ListenServer::Start(const std::string &host, int port) {
  const int bound = port == 0 ? impl_->server.bind_to_any_port(host) : (impl_->server.bind_to_port(host, port) ? port : -1);
  if (bound < 0) throw IoError("cannot bind " + host + ":" + std::to_string(port));
  impl_->thread = std::thread([this] { impl_->server.listen_after_bind(); });
  impl_->server.wait_until_ready();
  return bound;
}

void ListenServer::Run(const std::string &host, int port) {
  if (!impl_->server.listen(host, port)) throw IoError("cannot serve on " + host + ":" + std::to_string(port));
}

void ListenServer::Stop() {
  if (!impl_) return;
  impl_->server.stop();
  if (impl_->thread.joinable()) impl_->thread.join();
}

}  // namespace tev
