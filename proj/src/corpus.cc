// corpus.cc

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
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "tev/corpus.h"

namespace tev {

namespace {

constexpr std::array<const char *, 8> kEventNames = {"cough", "laugh", "hmm",    "tsk",
                                                     "ahem",  "sniff", "normal", "disguised"};

std::vector<std::string> SplitTabs(const std::string &line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t tab = line.find('\t', start);
    out.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return out;
}

std::uint64_t SplitMix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

}  // namespace

std::string EventName(EventType e) { return kEventNames[static_cast<std::size_t>(e)]; }

EventType ParseEvent(const std::string &name) {
  for (std::size_t i = 0; i < kEventNames.size(); ++i)
    if (name == kEventNames[i]) return static_cast<EventType>(i);
  throw InvalidArgument("unknown event type '" + name + "'");
}

const UtteranceRecord &CorpusManifest::Find(const std::string &utt_id) const {
  for (const auto &r : records)
    if (r.utt_id == utt_id) return r;
  throw InvalidArgument("utterance '" + utt_id + "' not in manifest " + name);
}

std::vector<const UtteranceRecord *> CorpusManifest::OfEvent(EventType e) const {
  std::vector<const UtteranceRecord *> out;
  for (const auto &r : records)
    if (r.event == e) out.push_back(&r);
  return out;
}

CorpusManifest ParseManifest(std::istream &is, const std::filesystem::path &root,
                             const std::string &name, const ManifestOptions &opts) {
  CorpusManifest m;
  m.name = name;
  m.root = root;
  std::unordered_set<std::string> seen;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty() || line[0] == '#') continue;
    const std::string where = name + ":" + std::to_string(lineno);
    const auto fields = SplitTabs(line);
    if (fields.size() != 5)
      throw InvalidArgument(where + ": expected 5 tab-separated fields, got " +
                            std::to_string(fields.size()));
    for (const auto &f : fields)
      if (f.empty()) throw InvalidArgument(where + ": empty field");
    UtteranceRecord r;
    r.utt_id = fields[0];
    r.spk_id = fields[1];
    r.event = ParseEvent(fields[2]);
    r.path = fields[3];
    try {
      std::size_t used = 0;
      r.duration_s = std::stod(fields[4], &used);
      if (used != fields[4].size()) throw std::invalid_argument("trailing");
    } catch (const std::exception &) {
      throw InvalidArgument(where + ": bad duration '" + fields[4] + "'");
    }
    if (!(r.duration_s > 0.0)) throw InvalidArgument(where + ": duration must be positive");
    if (!seen.insert(r.utt_id).second)
      throw InvalidArgument(where + ": duplicate utt_id '" + r.utt_id + "'");
    if (opts.check_audio) {
      const auto audio = root / r.path;
      if (!std::filesystem::exists(audio))
        throw IoError(where + ": missing audio file " + audio.string());
      const double actual =
          static_cast<double>(WavSampleCount(audio)) / static_cast<double>(kCorpusSampleRate);
      if (std::abs(actual - r.duration_s) > 1e-3)
        Warn(where + ": stored duration " + fields[4] + " s differs from audio (" +
             std::to_string(actual) + " s)");
    }
    m.records.push_back(std::move(r));
  }
  return m;
}

CorpusManifest LoadManifest(const std::filesystem::path &path, const ManifestOptions &opts) {
  std::ifstream is(path);
  if (!is) throw IoError("cannot open manifest " + path.string());
  return ParseManifest(is, path.parent_path(), path.filename().string(), opts);
}

void SaveManifest(const std::filesystem::path &path, const CorpusManifest &manifest) {
  std::ofstream os(path, std::ios::trunc);
  if (!os) throw IoError("cannot write " + path.string());
  os << "# utt_id\tspk_id\tevent\tpath\tduration_s\n";
  char buf[32];
  for (const auto &r : manifest.records) {
    std::snprintf(buf, sizeof(buf), "%.6f", r.duration_s);
    os << r.utt_id << '\t' << r.spk_id << '\t' << EventName(r.event) << '\t' << r.path << '\t'
       << buf << '\n';
  }
  if (!os) throw IoError("write failed: " + path.string());
}

std::vector<EventStats> CorpusStats(const CorpusManifest &manifest) {
  std::vector<EventStats> out;
  for (EventType e : kAllEvents) {
    std::set<std::string> speakers;
    std::size_t n = 0;
    double total = 0.0;
    for (const auto &r : manifest.records) {
      if (r.event != e) continue;
      speakers.insert(r.spk_id);
      ++n;
      total += r.duration_s;
    }
    if (n == 0) continue;
    EventStats s;
    s.event = e;
    s.n_speakers = speakers.size();
    s.n_utts = n;
    s.utts_per_speaker = static_cast<double>(n) / static_cast<double>(speakers.size());
    s.avg_duration_s = total / static_cast<double>(n);
    out.push_back(s);
  }
  return out;
}

std::string FormatStatsTable(const std::vector<EventStats> &stats) {
  std::ostringstream os;
  os << std::left << std::setw(12) << "event" << std::right << std::setw(8) << "spks"
     << std::setw(12) << "total_utts" << std::setw(10) << "utts/spk" << std::setw(14)
     << "avg_dur_s" << "\n";
  os << std::fixed << std::setprecision(2);
  for (const auto &s : stats)
    os << std::left << std::setw(12) << EventName(s.event) << std::right << std::setw(8)
       << s.n_speakers << std::setw(12) << s.n_utts << std::setw(10) << s.utts_per_speaker
       << std::setw(14) << s.avg_duration_s << "\n";
  return os.str();
}

// ---------------------------------------------------------------------------
// Synthesis.

void ValidateSynthSpec(const SynthSpec &spec) {
  if (spec.n_speakers < 2)
    throw InvalidArgument("SynthSpec: verification needs at least 2 speakers");
  if (spec.utts_per_speaker_per_event < 1)
    throw InvalidArgument("SynthSpec: need at least one utterance per speaker and event");
  if (spec.events.empty()) throw InvalidArgument("SynthSpec: no events");
  const auto [lo, hi] = spec.duration_range_s;
  if (!(lo > 0.1 && hi < 3.0 && lo <= hi))
    throw InvalidArgument("SynthSpec: duration range must lie within (0.1, 3.0) s");
}

std::vector<SynthSpeaker> DrawSynthSpeakers(const SynthSpec &spec) {
  ValidateSynthSpec(spec);
  Rng rng(SplitMix(spec.seed));
  // One formant per band keeps the triple ordered; all bands lie in 300-3500 Hz.
  constexpr std::array<std::pair<double, double>, 3> kBands = {
      {{300.0, 900.0}, {900.0, 2200.0}, {2200.0, 3500.0}}};
  std::vector<SynthSpeaker> speakers;
  while (static_cast<int>(speakers.size()) < spec.n_speakers) {
    SynthSpeaker s;
    for (int k = 0; k < 3; ++k) {
      s.formants_hz[k] = rng.Uniform(kBands[k].first, kBands[k].second);
      s.bandwidths_hz[k] = rng.Uniform(60.0, 160.0);
    }
    s.pulse_rate_hz = rng.Uniform(90.0, 260.0);
    s.disguise_shift = rng.Uniform(0.85, 1.15);
    const bool distinct = std::all_of(speakers.begin(), speakers.end(), [&](const SynthSpeaker &o) {
      for (int k = 0; k < 3; ++k)
        if (std::abs(o.formants_hz[k] - s.formants_hz[k]) >= 50.0) return true;
      return false;
    });
    if (distinct) speakers.push_back(s);
  }
  return speakers;
}

namespace {

// Per-event shaping of the excitation: fraction of noise in the source and
// the amplitude envelope at normalized time u in [0, 1].
struct EventShape {
  double noise_mix;
  double (*envelope)(double u, double dur);
};

double EnvCough(double u, double) { return std::min(1.0, u / 0.05) * std::exp(-3.0 * u); }
double EnvLaugh(double u, double dur) {
  const double s = std::sin(M_PI * 5.0 * u * dur);
  return std::sin(M_PI * u) * s * s;
}
double EnvHmm(double u, double) { return std::pow(std::sin(M_PI * u), 0.5); }
double EnvTsk(double u, double) {
  const double a = std::exp(-60.0 * std::abs(u - 0.2));
  const double b = std::exp(-60.0 * std::abs(u - 0.6));
  return std::min(1.0, a + b + 0.05);
}
double EnvAhem(double u, double) {
  return std::exp(-std::pow((u - 0.25) / 0.15, 2)) + 0.8 * std::exp(-std::pow((u - 0.7) / 0.18, 2));
}
double EnvSniff(double u, double) { return std::pow(std::sin(M_PI * u), 2) * (0.4 + 0.6 * u); }
double EnvSpeech(double u, double dur) {
  const double s = std::sin(M_PI * 4.0 * u * dur);
  return std::sin(M_PI * u) * (0.35 + 0.65 * s * s);
}

EventShape ShapeOf(EventType e) {
  switch (e) {
    case EventType::kCough: return {0.7, EnvCough};
    case EventType::kLaugh: return {0.2, EnvLaugh};
    case EventType::kHmm: return {0.0, EnvHmm};
    case EventType::kTsk: return {0.9, EnvTsk};
    case EventType::kAhem: return {0.3, EnvAhem};
    case EventType::kSniff: return {1.0, EnvSniff};
    case EventType::kNormal:
    case EventType::kDisguised: return {0.05, EnvSpeech};
  }
  return {0.0, EnvHmm};
}

std::vector<double> Resonate(const std::vector<double> &x, double freq_hz, double bw_hz) {
  const double fs = kCorpusSampleRate;
  const double r = std::exp(-M_PI * bw_hz / fs);
  const double a1 = 2.0 * r * std::cos(2.0 * M_PI * freq_hz / fs);
  const double a2 = -r * r;
  const double gain = 1.0 - r;
  std::vector<double> y(x.size());
  double y1 = 0.0, y2 = 0.0;
  for (std::size_t n = 0; n < x.size(); ++n) {
    const double v = gain * x[n] + a1 * y1 + a2 * y2;
    y[n] = v;
    y2 = y1;
    y1 = v;
  }
  return y;
}

AudioSegment SynthUtterance(const SynthSpeaker &spk, EventType event, double duration_s, Rng &rng) {
  const double fs = kCorpusSampleRate;
  const auto n = static_cast<std::size_t>(std::llround(duration_s * fs));
  const EventShape shape = ShapeOf(event);

  // Within-speaker variability: formant/pitch jitter, spectral tilt, level, noise.
  const double formant_scale = (event == EventType::kDisguised ? spk.disguise_shift : 1.0);
  std::array<double, 3> formants{};
  for (int k = 0; k < 3; ++k)
    formants[k] = spk.formants_hz[k] * formant_scale * (1.0 + 0.03 * (2.0 * rng.Uniform() - 1.0));
  double f0 = spk.pulse_rate_hz * (1.0 + 0.08 * (2.0 * rng.Uniform() - 1.0));
  if (event == EventType::kDisguised) f0 *= 2.0 - spk.disguise_shift;
  const double f0_slope = 0.15 * (2.0 * rng.Uniform() - 1.0);
  const double tilt = rng.Uniform(0.0, 0.5);
  const double level = rng.Uniform(0.3, 0.8);
  const double snr_db = rng.Uniform(15.0, 30.0);

  std::vector<double> source(n, 0.0);
  double phase = rng.Uniform();
  for (std::size_t i = 0; i < n; ++i) {
    const double u = static_cast<double>(i) / static_cast<double>(n);
    phase += f0 * (1.0 + f0_slope * u) / fs;
    double pulse = 0.0;
    if (phase >= 1.0) {
      phase -= 1.0;
      pulse = 1.0;
    }
    const double noise = rng.Normal() * 0.3;
    source[i] = shape.envelope(u, duration_s) * ((1.0 - shape.noise_mix) * pulse + shape.noise_mix * noise);
  }
  // One-pole tilt of the source spectrum.
  double prev = 0.0;
  for (auto &v : source) {
    v = v + tilt * prev;
    prev = v;
  }
  std::vector<double> y = source;
  for (int k = 0; k < 3; ++k) y = Resonate(y, formants[k], spk.bandwidths_hz[k]);

  double peak = 0.0, power = 0.0;
  for (double v : y) {
    peak = std::max(peak, std::abs(v));
    power += v * v;
  }
  AudioSegment seg;
  seg.samples.resize(n);
  const double scale = peak > 0.0 ? level / peak : 0.0;
  power = power * scale * scale / std::max<std::size_t>(n, 1);
  const double noise_sd = std::sqrt(power / std::pow(10.0, snr_db / 10.0));
  for (std::size_t i = 0; i < n; ++i)
    seg.samples[i] = std::clamp(y[i] * scale + noise_sd * rng.Normal(), -1.0, 32767.0 / 32768.0);
  return seg;
}

std::string SpeakerId(int s) {
  char buf[16];
  std::snprintf(buf, sizeof(buf), "spk%03d", s);
  return buf;
}

}  // namespace

CorpusManifest SynthCorpus(const SynthSpec &spec, const std::filesystem::path &out_dir) {
  const auto speakers = DrawSynthSpeakers(spec);
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "wav", ec);
  if (ec) throw IoError("cannot create " + (out_dir / "wav").string() + ": " + ec.message());

  CorpusManifest m;
  m.name = "synthetic";
  m.root = out_dir;
  const auto [dmin, dmax] = spec.duration_range_s;
  for (int s = 0; s < spec.n_speakers; ++s) {
    const std::string spk = SpeakerId(s);
    std::filesystem::create_directories(out_dir / "wav" / spk, ec);
    if (ec) throw IoError("cannot create speaker directory: " + ec.message());
    for (EventType e : spec.events) {
      for (int k = 0; k < spec.utts_per_speaker_per_event; ++k) {
        // Per-utterance stream, independent of the requested event set.
        Rng rng(SplitMix(spec.seed ^ SplitMix((static_cast<std::uint64_t>(s) << 32) ^
                                              (static_cast<std::uint64_t>(e) << 20) ^
                                              static_cast<std::uint64_t>(k))));
        const double dur = dmin == dmax ? dmin : rng.Uniform(dmin, dmax);
        const AudioSegment seg = SynthUtterance(speakers[s], e, dur, rng);
        char id[64];
        std::snprintf(id, sizeof(id), "%s-%s-%02d", spk.c_str(), EventName(e).c_str(), k);
        UtteranceRecord r;
        r.utt_id = id;
        r.spk_id = spk;
        r.event = e;
        r.path = "wav/" + spk + "/" + r.utt_id + ".wav";
        r.duration_s = seg.Duration();
        WriteWav(out_dir / r.path, seg);
        m.records.push_back(std::move(r));
      }
    }
  }
  SaveManifest(out_dir / "manifest.tsv", m);
  return m;
}

}  // namespace tev
