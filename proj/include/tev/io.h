// tev/io.h

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

#ifndef TEV_IO_H_
#define TEV_IO_H_

#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include "tev/backend.h"
#include "tev/dsp.h"
#include "tev/embednet.h"
#include "tev/eval.h"
#include "tev/gmm.h"
#include "tev/tvspace.h"

namespace tev {

// ---------------------------------------------------------------------------
// Model container: "TEVM", u32 version, then sections of
// tag[4] u64 byte_length payload. Payloads are int32 dimensions followed by
// float32 values, all little-endian.

constexpr std::uint32_t kModelFormatVersion = 1;

struct ModelFile {
  std::optional<DiagGmm> gmm;            // "GMM "
  std::optional<Matrix> tmatrix;         // "TVM ", needs the GMM section to be usable
  std::optional<FrameNet> dnn;           // "DNN "
  std::optional<LdaTransform> lda;       // "LDA "
  std::optional<PldaModel> plda;         // "PLDA"

  /// Throws InvalidArgument when the T matrix is missing or has no UBM.
  TotalVariabilityModel Tvm() const;
};

std::string EncodeModelFile(const ModelFile &model);
/// Only sections whose tag is in `tags` are decoded (all when empty).
ModelFile DecodeModelFile(const std::string &bytes, const std::set<std::string> &tags = {});
void WriteModelFile(const std::filesystem::path &path, const ModelFile &model);
ModelFile ReadModelFile(const std::filesystem::path &path, const std::set<std::string> &tags = {});
/// Section tags present in a container, in file order.
std::vector<std::string> ModelSections(const std::filesystem::path &path);

// ---------------------------------------------------------------------------
// Matrix archive: "TEVF", u32 version, u64 count, then per record
// u32 id_len, id, u32 label_len, label, u32 rows, u32 cols, float32 row-major.

struct ArchiveRecord {
  std::string id;
  FeatureMatrix matrix;
};

void WriteArchive(const std::filesystem::path &path, const std::vector<ArchiveRecord> &records);
std::vector<ArchiveRecord> ReadArchive(const std::filesystem::path &path);

/// Stats are archived as C x (1 + D) matrices: zeroth order, then first order.
ArchiveRecord StatsToRecord(const std::string &id, const BaumWelchStats &stats);
BaumWelchStats RecordToStats(const ArchiveRecord &record);

// ---------------------------------------------------------------------------
// Text files.

/// "utt_id<TAB>kind<TAB>v1 v2 ..." per line.
void WriteVectors(const std::filesystem::path &path, const std::vector<SpeakerVector> &vectors);
std::vector<SpeakerVector> ReadVectors(const std::filesystem::path &path);
VectorTable ToTable(const std::vector<SpeakerVector> &vectors);

void WriteTrialFile(const std::filesystem::path &path, const TrialList &list);
TrialList ReadTrialFile(const std::filesystem::path &path);

struct ScoredTrial {
  std::string utt_a, utt_b;
  double score = 0.0;
};

/// "utt_a<TAB>utt_b<TAB>score" per line.
void WriteScores(const std::filesystem::path &path, const std::vector<ScoredTrial> &scores);
std::vector<ScoredTrial> ReadScores(const std::filesystem::path &path);

/// Whole file as bytes; throws IoError.
std::string ReadFileBytes(const std::filesystem::path &path);
void WriteFileBytes(const std::filesystem::path &path, const std::string &bytes);

}  // namespace tev

#endif  // TEV_IO_H_
