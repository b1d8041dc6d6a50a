// tev/corpus.h

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

#ifndef TEV_CORPUS_H_
#define TEV_CORPUS_H_

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "tev/common.h"

namespace tev {

constexpr int kCorpusSampleRate = 16000;

struct AudioSegment {
  std::vector<double> samples;  // normalized to [-1, 1]
  int sample_rate = kCorpusSampleRate;
  int source_precision = 16;

  double Duration() const { return static_cast<double>(samples.size()) / sample_rate; }
};

enum class EventType { kCough, kLaugh, kHmm, kTsk, kAhem, kSniff, kNormal, kDisguised };

inline constexpr std::array<EventType, 6> kTrivialEvents = {
    EventType::kCough, EventType::kLaugh, EventType::kHmm,
    EventType::kTsk,   EventType::kAhem,  EventType::kSniff};

inline constexpr std::array<EventType, 8> kAllEvents = {
    EventType::kCough, EventType::kLaugh, EventType::kHmm,    EventType::kTsk,
    EventType::kAhem,  EventType::kSniff, EventType::kNormal, EventType::kDisguised};

inline bool IsTrivialEvent(EventType e) {
  return e != EventType::kNormal && e != EventType::kDisguised;
}

std::string EventName(EventType e);
/// Throws InvalidArgument for unknown names.
EventType ParseEvent(const std::string &name);

// ---------------------------------------------------------------------------
// WAV I/O. Only 16-bit PCM mono at 16 kHz is accepted.

class WavError : public Error {
 public:
  enum class Kind { kMalformed, kUnsupportedEncoding, kUnsupportedChannels, kUnsupportedRate };
  WavError(Kind kind, const std::string &msg) : Error(msg), kind_(kind) {}
  Kind kind() const { return kind_; }

 private:
  Kind kind_;
};

AudioSegment ReadWav(const std::filesystem::path &path);
AudioSegment ParseWav(const std::string &bytes, const std::string &what = "<memory>");
/// Samples are scaled by 32768, rounded and clipped to int16.
void WriteWav(const std::filesystem::path &path, const AudioSegment &seg);
std::string EncodeWav(const AudioSegment &seg);
/// Number of samples in a WAV file, read from the header only.
std::size_t WavSampleCount(const std::filesystem::path &path);

// ---------------------------------------------------------------------------
// Manifests.

struct UtteranceRecord {
  std::string utt_id;
  std::string spk_id;
  EventType event = EventType::kCough;
  std::string path;  // relative to the manifest's directory
  double duration_s = 0.0;
};

struct CorpusManifest {
  std::string name;
  std::filesystem::path root;  // directory that record paths are relative to
  std::vector<UtteranceRecord> records;

  std::filesystem::path AudioPath(const UtteranceRecord &r) const { return root / r.path; }
  const UtteranceRecord &Find(const std::string &utt_id) const;
  std::vector<const UtteranceRecord *> OfEvent(EventType e) const;
};

struct ManifestOptions {
  bool check_audio = true;  // require files to exist and compare durations
};

/// Parses the tab-separated manifest format. Throws InvalidArgument on
/// duplicate ids, missing fields or bad values and IoError on missing audio.
CorpusManifest LoadManifest(const std::filesystem::path &path, const ManifestOptions &opts = {});
CorpusManifest ParseManifest(std::istream &is, const std::filesystem::path &root,
                             const std::string &name, const ManifestOptions &opts = {});
void SaveManifest(const std::filesystem::path &path, const CorpusManifest &manifest);

struct EventStats {
  EventType event = EventType::kCough;
  std::size_t n_speakers = 0;
  std::size_t n_utts = 0;
  double utts_per_speaker = 0.0;
  double avg_duration_s = 0.0;
};

/// One row per event present, in EventType order.
std::vector<EventStats> CorpusStats(const CorpusManifest &manifest);
std::string FormatStatsTable(const std::vector<EventStats> &stats);

// ---------------------------------------------------------------------------
// Synthetic corpora.

struct SynthSpec {
  int n_speakers = 20;
  int utts_per_speaker_per_event = 10;
  std::vector<EventType> events = {EventType::kCough};
  std::pair<double, double> duration_range_s = {0.3, 0.5};
  std::uint64_t seed = 1;
};

/// Source-filter description of one synthetic speaker.
struct SynthSpeaker {
  std::array<double, 3> formants_hz{};
  std::array<double, 3> bandwidths_hz{};
  double pulse_rate_hz = 0.0;
  double disguise_shift = 1.0;  // formant scale used for disguised speech
};

void ValidateSynthSpec(const SynthSpec &spec);
/// Draws speakers whose formant triples pairwise differ by >= 50 Hz in at
/// least one position.
std::vector<SynthSpeaker> DrawSynthSpeakers(const SynthSpec &spec);
/// Writes wav/<spk>/<utt>.wav files and manifest.tsv under out_dir.
CorpusManifest SynthCorpus(const SynthSpec &spec, const std::filesystem::path &out_dir);

}  // namespace tev

#endif  // TEV_CORPUS_H_
