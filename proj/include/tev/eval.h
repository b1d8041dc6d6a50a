// tev/eval.h

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

#ifndef TEV_EVAL_H_
#define TEV_EVAL_H_

#include <functional>
#include <iosfwd>
#include <map>
#include <optional>
#include <string>
#include <unordered_map>
#include <vector>

#include "tev/backend.h"
#include "tev/corpus.h"

namespace tev {

struct Trial {
  std::string utt_a, utt_b;
  bool is_target = false;
};

struct TrialList {
  std::vector<Trial> trials;
  std::optional<EventType> event;  // unset for lists mixing events

  std::size_t NumTargets() const;
};

/// All C(n,2) pairs of the event's utterances, sorted by utt_id; targets are
/// same-speaker pairs. Throws InvalidArgument with fewer than 2 utterances.
TrialList GenExhaustiveTrials(const CorpusManifest &manifest, EventType event);

/// Cross-style pairs (one normal, one disguised): same speaker is a target.
TrialList GenDisguiseTrials(const CorpusManifest &manifest);

/// Throws InvalidArgument when a trial pairs an utterance with itself or an
/// unordered pair repeats.
void ValidateTrialList(const TrialList &list);

void WriteTrials(std::ostream &os, const TrialList &list);
TrialList ReadTrials(std::istream &is);

// ---------------------------------------------------------------------------
// Scoring.

/// Models needed by the non-cosine methods.
struct ScoringModels {
  const LdaTransform *lda = nullptr;
  const PldaModel *plda = nullptr;
};

/// Pair scorer bound to a method. Vectors are length-normalized before LDA
/// and PLDA.
class TrialScorer {
 public:
  TrialScorer(ScoringMethod method, ScoringModels models);
  double Score(const Vector &a, const Vector &b) const;

 private:
  Vector Prepare(const Vector &v) const;

  ScoringMethod method_;
  ScoringModels models_;
  std::optional<PldaScorer> plda_;
};

using VectorTable = std::unordered_map<std::string, SpeakerVector>;

/// One score per trial, order-aligned. Throws InvalidArgument naming the
/// first utterance without a vector.
std::vector<double> ScoreTrials(const TrialList &trials, const VectorTable &vectors,
                                ScoringMethod method, ScoringModels models = {});

/// Streams "utt_a utt_b target|nontarget" lines to "utt_a utt_b score" lines
/// without materializing the list. Returns the number of trials scored.
std::size_t ScoreTrialStream(std::istream &trials, std::ostream &scores, const VectorTable &vectors,
                             const TrialScorer &scorer);

// ---------------------------------------------------------------------------
// Metrics.

struct DetPoint {
  double threshold;
  double far;
  double frr;
};

struct EvalReport {
  double eer = 0.0;
  double threshold_at_eer = 0.0;
  std::size_t n_target = 0;
  std::size_t n_nontarget = 0;
  std::vector<DetPoint> det_points;  // one per distinct score, ascending threshold
};

/// FAR(t) = #nontarget >= t / n_nontarget, FRR(t) = #target < t / n_target
/// at every distinct score; the EER is where the DET polyline (closed with
/// the (0, 1) point at t = +inf) crosses FAR = FRR, linearly interpolated
/// between adjacent sweep points. Throws InvalidArgument on single-class
/// input.
EvalReport ComputeEer(const std::vector<double> &scores, const std::vector<bool> &labels);

/// Text report: header comments, key/value lines, then "det threshold far frr".
void WriteReport(std::ostream &os, const EvalReport &report, const std::string &title,
                 const std::vector<std::string> &notes = {});

// ---------------------------------------------------------------------------
// Human listening sessions.

struct HumanTrial {
  std::string utt_a, utt_b;
  EventType event = EventType::kCough;
  bool is_target = false;
  bool counted = true;  // imposter noise trials are presented but not scored
};

struct HumanSession {
  std::string session_id;
  std::vector<HumanTrial> trials;
  std::vector<std::optional<bool>> answers;  // true = "same speaker"
  std::vector<std::int64_t> answer_times_ms;
  std::int64_t created_ms = 0;
};

/// Exact error count over counted trials.
struct DerCounts {
  std::size_t errors = 0;
  std::size_t false_alarms = 0;
  std::size_t false_rejections = 0;
  std::size_t trials = 0;

  double Rate() const { return trials == 0 ? 0.0 : static_cast<double>(errors) / static_cast<double>(trials); }
  DerCounts &operator+=(const DerCounts &o);
};

/// Throws InvalidArgument if a counted trial is unanswered.
DerCounts CountDer(const HumanSession &session);
double ComputeDer(const HumanSession &session);
std::map<EventType, DerCounts> CountDerPerEvent(const HumanSession &session);

/// Per event: per_event trials, target with probability p_target; the two
/// utterances share the event and are always distinct.
std::vector<HumanTrial> GenHumanTrials(const CorpusManifest &manifest, int per_event, double p_target,
                                       std::uint64_t seed);

/// `counted` same-speaker normal/disguised pairs plus `imposter_noise`
/// uncounted different-speaker pairs, shuffled.
std::vector<HumanTrial> GenDisguiseHumanTrials(const CorpusManifest &manifest, int counted,
                                               int imposter_noise, std::uint64_t seed);

}  // namespace tev

#endif  // TEV_EVAL_H_
