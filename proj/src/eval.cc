// eval.cc

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
#include <cmath>
#include <limits>
#include <cstdio>
#include <istream>
#include <numeric>
#include <ostream>
#include <set>
#include <sstream>

#include "tev/eval.h"

namespace tev {

namespace {

std::vector<std::string> SplitFields(const std::string &line) {
  std::vector<std::string> out;
  std::istringstream is(line);
  std::string f;
  while (is >> f) out.push_back(f);
  return out;
}

std::string FormatDouble(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

// spk_id -> utterance ids, both sorted.
std::map<std::string, std::vector<std::string>> BySpeaker(const CorpusManifest &m, EventType e) {
  std::map<std::string, std::vector<std::string>> out;
  for (const auto &r : m.records)
    if (r.event == e) out[r.spk_id].push_back(r.utt_id);
  for (auto &[spk, utts] : out) std::sort(utts.begin(), utts.end());
  return out;
}

}  // namespace

std::size_t TrialList::NumTargets() const {
  return static_cast<std::size_t>(
      std::count_if(trials.begin(), trials.end(), [](const Trial &t) { return t.is_target; }));
}

TrialList GenExhaustiveTrials(const CorpusManifest &manifest, EventType event) {
  std::vector<const UtteranceRecord *> utts = manifest.OfEvent(event);
  if (utts.size() < 2)
    throw InvalidArgument("GenExhaustiveTrials: event " + EventName(event) + " has fewer than 2 utterances");
  std::sort(utts.begin(), utts.end(),
            [](const UtteranceRecord *a, const UtteranceRecord *b) { return a->utt_id < b->utt_id; });
  TrialList list;
  list.event = event;
  list.trials.reserve(utts.size() * (utts.size() - 1) / 2);
  for (std::size_t i = 0; i < utts.size(); ++i)
    for (std::size_t j = i + 1; j < utts.size(); ++j)
      list.trials.push_back({utts[i]->utt_id, utts[j]->utt_id, utts[i]->spk_id == utts[j]->spk_id});
  return list;
}

TrialList GenDisguiseTrials(const CorpusManifest &manifest) {
  auto normal = manifest.OfEvent(EventType::kNormal);
  auto disguised = manifest.OfEvent(EventType::kDisguised);
  if (normal.empty() || disguised.empty())
    throw InvalidArgument("GenDisguiseTrials: need both normal and disguised utterances");
  auto by_id = [](const UtteranceRecord *a, const UtteranceRecord *b) { return a->utt_id < b->utt_id; };
  std::sort(normal.begin(), normal.end(), by_id);
  std::sort(disguised.begin(), disguised.end(), by_id);
  TrialList list;
  list.event = EventType::kDisguised;
  for (const auto *n : normal)
    for (const auto *d : disguised) list.trials.push_back({n->utt_id, d->utt_id, n->spk_id == d->spk_id});
  return list;
}

void ValidateTrialList(const TrialList &list) {
  std::set<std::pair<std::string, std::string>> seen;
  for (const auto &t : list.trials) {
    if (t.utt_a == t.utt_b) throw InvalidArgument("trial pairs utterance '" + t.utt_a + "' with itself");
    auto key = t.utt_a < t.utt_b ? std::make_pair(t.utt_a, t.utt_b) : std::make_pair(t.utt_b, t.utt_a);
    if (!seen.insert(std::move(key)).second)
      throw InvalidArgument("duplicate trial " + t.utt_a + " / " + t.utt_b);
  }
}

void WriteTrials(std::ostream &os, const TrialList &list) {
  for (const auto &t : list.trials)
    os << t.utt_a << '\t' << t.utt_b << '\t' << (t.is_target ? "target" : "nontarget") << '\n';
}

TrialList ReadTrials(std::istream &is) {
  TrialList list;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const auto f = SplitFields(line);
    if (f.size() != 3 || (f[2] != "target" && f[2] != "nontarget"))
      throw InvalidArgument("trial list line " + std::to_string(lineno) +
                            ": expected 'utt_a utt_b target|nontarget'");
    list.trials.push_back({f[0], f[1], f[2] == "target"});
  }
  return list;
}

// ---------------------------------------------------------------------------

TrialScorer::TrialScorer(ScoringMethod method, ScoringModels models) : method_(method), models_(models) {
  if (method_ == ScoringMethod::kLdaCosine && !models_.lda)
    throw InvalidArgument("lda-cosine scoring needs an LDA transform");
  if (method_ == ScoringMethod::kPlda) {
    if (!models_.plda) throw InvalidArgument("plda scoring needs a PLDA model");
    plda_.emplace(*models_.plda);
  }
}

Vector TrialScorer::Prepare(const Vector &v) const {
  if (method_ == ScoringMethod::kCosine) return v;
  Vector x = LengthNormalize(v);
  if (models_.lda) {
    if (x.size() != models_.lda->InputDim()) throw InvalidArgument("LDA: dimension mismatch");
    x = models_.lda->Apply(x);
  }
  return x;
}

double TrialScorer::Score(const Vector &a, const Vector &b) const {
  const Vector pa = Prepare(a), pb = Prepare(b);
  if (method_ == ScoringMethod::kPlda) return plda_->Score(pa, pb);
  return CosineScore(pa, pb);
}

namespace {

const SpeakerVector &Lookup(const VectorTable &vectors, const std::string &utt) {
  const auto it = vectors.find(utt);
  if (it == vectors.end()) throw InvalidArgument("no vector for utterance '" + utt + "'");
  return it->second;
}

}  // namespace

std::vector<double> ScoreTrials(const TrialList &trials, const VectorTable &vectors, ScoringMethod method,
                                ScoringModels models) {
  const TrialScorer scorer(method, models);
  std::vector<double> scores;
  scores.reserve(trials.trials.size());
  for (const auto &t : trials.trials) {
    if (t.utt_a == t.utt_b) throw InvalidArgument("trial pairs utterance '" + t.utt_a + "' with itself");
    const double s = scorer.Score(Lookup(vectors, t.utt_a).values, Lookup(vectors, t.utt_b).values);
    if (!std::isfinite(s)) throw NumericError("non-finite score for " + t.utt_a + " / " + t.utt_b);
    scores.push_back(s);
  }
  return scores;
}

std::size_t ScoreTrialStream(std::istream &trials, std::ostream &scores, const VectorTable &vectors,
                             const TrialScorer &scorer) {
  std::string line;
  std::size_t n = 0, lineno = 0;
  while (std::getline(trials, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const auto f = SplitFields(line);
    if (f.size() < 2) throw InvalidArgument("trial line " + std::to_string(lineno) + ": too few fields");
    if (f[0] == f[1]) throw InvalidArgument("trial pairs utterance '" + f[0] + "' with itself");
    const double s = scorer.Score(Lookup(vectors, f[0]).values, Lookup(vectors, f[1]).values);
    if (!std::isfinite(s)) throw NumericError("non-finite score for " + f[0] + " / " + f[1]);
    scores << f[0] << '\t' << f[1] << '\t' << FormatDouble(s) << '\n';
    ++n;
  }
  return n;
}

// ---------------------------------------------------------------------------

EvalReport ComputeEer(const std::vector<double> &scores, const std::vector<bool> &labels) {
  if (scores.size() != labels.size()) throw InvalidArgument("ComputeEer: scores and labels differ in length");
  EvalReport r;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (!std::isfinite(scores[i])) throw InvalidArgument("ComputeEer: non-finite score");
    (labels[i] ? r.n_target : r.n_nontarget)++;
  }
  if (r.n_target == 0 || r.n_nontarget == 0)
    throw InvalidArgument("ComputeEer: need both target and nontarget trials");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  const double nt = static_cast<double>(r.n_target), nn = static_cast<double>(r.n_nontarget);
  std::size_t targets_below = 0, nontargets_below = 0;
  for (std::size_t i = 0; i < order.size();) {
    const double t = scores[order[i]];
    r.det_points.push_back({t, (nn - static_cast<double>(nontargets_below)) / nn,
                            static_cast<double>(targets_below) / nt});
    for (; i < order.size() && scores[order[i]] == t; ++i)
      (labels[order[i]] ? targets_below : nontargets_below)++;
  }

  // The first point has FAR = 1, FRR = 0; the closing point (0, 1) sits at +inf.
  const DetPoint closing{std::numeric_limits<double>::infinity(), 0.0, 1.0};
  for (std::size_t i = 1; i <= r.det_points.size(); ++i) {
    const DetPoint &prev = r.det_points[i - 1];
    const DetPoint &cur = i < r.det_points.size() ? r.det_points[i] : closing;
    const double d_prev = prev.far - prev.frr, d_cur = cur.far - cur.frr;
    if (d_cur > 0.0) continue;
    const double alpha = d_prev / (d_prev - d_cur);
    r.eer = prev.far + alpha * (cur.far - prev.far);
    r.threshold_at_eer = std::isfinite(cur.threshold)
                             ? prev.threshold + alpha * (cur.threshold - prev.threshold)
                             : prev.threshold;
    break;
  }
  return r;
}

void WriteReport(std::ostream &os, const EvalReport &report, const std::string &title,
                 const std::vector<std::string> &notes) {
  os << "# " << title << "\n";
  os << "# eer: FAR/FRR crossing of the DET polyline, linearly interpolated between sweep points\n";
  for (const auto &n : notes) os << "# " << n << "\n";
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.6f", report.eer);
  os << "eer\t" << buf << "\n";
  std::snprintf(buf, sizeof(buf), "%.4f", 100.0 * report.eer);
  os << "eer_percent\t" << buf << "\n";
  os << "threshold\t" << FormatDouble(report.threshold_at_eer) << "\n";
  os << "n_target\t" << report.n_target << "\n";
  os << "n_nontarget\t" << report.n_nontarget << "\n";
  os << "# det\tthreshold\tfar\tfrr\n";
  for (const auto &p : report.det_points)
    os << "det\t" << FormatDouble(p.threshold) << '\t' << FormatDouble(p.far) << '\t' << FormatDouble(p.frr) << "\n";
}

// ---------------------------------------------------------------------------

DerCounts &DerCounts::operator+=(const DerCounts &o) {
  errors += o.errors;
  false_alarms += o.false_alarms;
  false_rejections += o.false_rejections;
  trials += o.trials;
  return *this;
}

namespace {

DerCounts CountFor(const HumanSession &s, const std::optional<EventType> &event) {
  if (s.answers.size() != s.trials.size()) throw InvalidArgument("session answers do not align with trials");
  DerCounts c;
  for (std::size_t i = 0; i < s.trials.size(); ++i) {
    const HumanTrial &t = s.trials[i];
    if (!t.counted || (event && t.event != *event)) continue;
    if (!s.answers[i]) throw InvalidArgument("trial " + std::to_string(i) + " is unanswered");
    ++c.trials;
    const bool same = *s.answers[i];
    if (same && !t.is_target) ++c.false_alarms;
    if (!same && t.is_target) ++c.false_rejections;
  }
  c.errors = c.false_alarms + c.false_rejections;
  return c;
}

}  // namespace

DerCounts CountDer(const HumanSession &session) { return CountFor(session, std::nullopt); }

double ComputeDer(const HumanSession &session) { return CountDer(session).Rate(); }

std::map<EventType, DerCounts> CountDerPerEvent(const HumanSession &session) {
  std::map<EventType, DerCounts> out;
  for (const auto &t : session.trials)
    if (t.counted) out[t.event];
  for (auto &[e, c] : out) c = CountFor(session, e);
  return out;
}

std::vector<HumanTrial> GenHumanTrials(const CorpusManifest &manifest, int per_event, double p_target,
                                       std::uint64_t seed) {
  if (per_event < 1) throw InvalidArgument("GenHumanTrials: per_event must be >= 1");
  if (!(p_target >= 0.0 && p_target <= 1.0)) throw InvalidArgument("GenHumanTrials: p_target outside [0, 1]");
  Rng rng(seed);
  std::vector<HumanTrial> out;
  for (EventType e : kTrivialEvents) {
    const auto by_spk = BySpeaker(manifest, e);
    if (by_spk.empty()) continue;
    std::vector<const std::vector<std::string> *> eligible;
    std::vector<std::string> speakers;
    for (const auto &[spk, utts] : by_spk) {
      speakers.push_back(spk);
      if (utts.size() >= 2) eligible.push_back(&utts);
    }
    if (eligible.size() < 2)
      throw InvalidArgument("GenHumanTrials: event " + EventName(e) +
                            " needs at least 2 speakers with 2 or more utterances");
    for (int k = 0; k < per_event; ++k) {
      HumanTrial t;
      t.event = e;
      t.is_target = rng.Uniform() < p_target;
      if (t.is_target) {
        const auto &utts = *eligible[rng.Index(eligible.size())];
        const std::size_t i = rng.Index(utts.size());
        std::size_t j = rng.Index(utts.size() - 1);
        if (j >= i) ++j;
        t.utt_a = utts[i];
        t.utt_b = utts[j];
      } else {
        const std::size_t s1 = rng.Index(speakers.size());
        std::size_t s2 = rng.Index(speakers.size() - 1);
        if (s2 >= s1) ++s2;
        const auto &u1 = by_spk.at(speakers[s1]);
        const auto &u2 = by_spk.at(speakers[s2]);
        t.utt_a = u1[rng.Index(u1.size())];
        t.utt_b = u2[rng.Index(u2.size())];
      }
      out.push_back(std::move(t));
    }
  }
  if (out.empty()) throw InvalidArgument("GenHumanTrials: manifest has no trivial events");
  return out;
}

std::vector<HumanTrial> GenDisguiseHumanTrials(const CorpusManifest &manifest, int counted,
                                               int imposter_noise, std::uint64_t seed) {
  if (counted < 1 || imposter_noise < 0) throw InvalidArgument("GenDisguiseHumanTrials: bad trial counts");
  const auto normal = BySpeaker(manifest, EventType::kNormal);
  const auto disguised = BySpeaker(manifest, EventType::kDisguised);
  std::vector<std::string> both;
  for (const auto &[spk, utts] : normal)
    if (disguised.count(spk)) both.push_back(spk);
  if (both.empty() || (imposter_noise > 0 && both.size() < 2))
    throw InvalidArgument("GenDisguiseHumanTrials: not enough speakers with normal and disguised speech");
  Rng rng(seed);
  auto pick = [&](const std::vector<std::string> &v) { return v[rng.Index(v.size())]; };
  std::vector<HumanTrial> out;
  auto make = [&](const std::string &spk_n, const std::string &spk_d, bool target, bool is_counted) {
    HumanTrial t;
    t.event = EventType::kDisguised;
    t.is_target = target;
    t.counted = is_counted;
    t.utt_a = pick(normal.at(spk_n));
    t.utt_b = pick(disguised.at(spk_d));
    if (rng.Uniform() < 0.5) std::swap(t.utt_a, t.utt_b);
    out.push_back(std::move(t));
  };
  for (int k = 0; k < counted; ++k) {
    const std::string spk = pick(both);
    make(spk, spk, true, true);
  }
  for (int k = 0; k < imposter_noise; ++k) {
    const std::size_t s1 = rng.Index(both.size());
    std::size_t s2 = rng.Index(both.size() - 1);
    if (s2 >= s1) ++s2;
    make(both[s1], both[s2], false, false);
  }
  rng.Shuffle(out);
  return out;
}

}  // namespace tev
