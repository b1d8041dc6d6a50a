// tev/listensvc.h

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

#ifndef TEV_LISTENSVC_H_
#define TEV_LISTENSVC_H_

#include <filesystem>
#include <map>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <vector>

#include "tev/corpus.h"
#include "tev/eval.h"

namespace tev {

enum class Protocol { kTrivial, kDisguise };

struct SessionConfig {
  Protocol protocol = Protocol::kTrivial;
  int per_event = 6;
  double p_target = 0.5;
  int counted = 6;         // disguise protocol: counted same-speaker trials
  int imposter_noise = 2;  // disguise protocol: uncounted imposter trials
  std::optional<std::uint64_t> seed;

  void Validate() const;
};

/// Error carrying the status code a transport should report.
class ServiceError : public Error {
 public:
  ServiceError(int status, const std::string &msg) : Error(msg), status_(status) {}
  int status() const { return status_; }

 private:
  int status_;
};

struct ServiceResponse {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
};

struct SessionReport {
  DerCounts overall;
  std::map<EventType, DerCounts> per_event;
};

/// Administers listening sessions over a manifest. Every state change is
/// appended to a newline-delimited JSON log before it is acknowledged, and the
/// log is replayed on construction. Thread-safe.
class ListenService {
 public:
  /// id_seed drives session ids, audio tokens and unseeded session draws.
  ListenService(CorpusManifest manifest, std::filesystem::path log_path, std::uint64_t id_seed);

  std::string CreateSession(const SessionConfig &cfg);
  /// Client view of trial k: index, count, event, two audio tokens, answered.
  std::string TrialJson(const std::string &session_id, std::size_t k) const;
  /// WAV bytes for an audio token; counts the play.
  std::string Audio(const std::string &token);
  void SubmitAnswer(const std::string &session_id, std::size_t k, const std::string &answer);
  SessionReport Finalize(const std::string &session_id);
  /// Report JSON; 409 before finalize.
  std::string ReportJson(const std::string &session_id) const;

  /// Server-side views for tests and aggregation.
  const HumanSession &Session(const std::string &session_id) const;
  bool IsFinalized(const std::string &session_id) const;
  std::size_t NumSessions() const;
  std::size_t ReplayCount(const std::string &token) const;
  /// Summed counts over finalized sessions.
  DerCounts Aggregate() const;

  /// Routes one request of the HTTP API; never throws.
  ServiceResponse Handle(const std::string &method, const std::string &path, const std::string &body);

 private:
  struct Entry {
    HumanSession session;
    Protocol protocol = Protocol::kTrivial;
    std::vector<std::pair<std::string, std::string>> tokens;  // per trial
    bool finalized = false;
  };
  struct TokenTarget {
    std::string utt_id;
  };

  std::string NewId(std::size_t hex_chars);
  Entry &Find(const std::string &session_id);
  const Entry &Find(const std::string &session_id) const;
  void Append(const std::string &line);
  void Replay();
  void Apply(const std::string &line, bool from_log);
  static SessionReport MakeReport(const Entry &e);
  static std::string ReportBody(const Entry &e);

  CorpusManifest manifest_;
  std::filesystem::path log_path_;
  Rng id_rng_;
  mutable std::mutex mu_;
  std::map<std::string, Entry> sessions_;
  std::map<std::string, TokenTarget> tokens_;
  std::map<std::string, std::size_t> replays_;
};

/// HTTP front end over a ListenService.
class ListenServer {
 public:
  explicit ListenServer(ListenService &service);
  ~ListenServer();
  /// Binds and serves on a background thread; port 0 picks a free port.
  /// Returns the bound port.
  int Start(const std::string &host, int port);
  /// Blocks serving on the calling thread.
  void Run(const std::string &host, int port);
  void Stop();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

}  // namespace tev

#endif  // TEV_LISTENSVC_H_
