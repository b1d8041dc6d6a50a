// io.cc

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

#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <sstream>

#include "tev/io.h"

namespace tev {

static_assert(std::endian::native == std::endian::little, "binary formats assume a little-endian host");

namespace {

class ByteWriter {
 public:
  void U32(std::uint32_t v) { Raw(&v, 4); }
  void U64(std::uint64_t v) { Raw(&v, 8); }
  void I32(Eigen::Index v) {
    const auto x = static_cast<std::int32_t>(v);
    Raw(&x, 4);
  }
  void F32(double v) {
    const auto x = static_cast<float>(v);
    Raw(&x, 4);
  }
  void Str(const std::string &s) {
    U32(static_cast<std::uint32_t>(s.size()));
    out_ += s;
  }
  void Tag(const char *tag) { out_.append(tag, 4); }
  // Row-major, so files read naturally as one row per line of values.
  void Mat(const Matrix &m) {
    for (Eigen::Index i = 0; i < m.rows(); ++i)
      for (Eigen::Index j = 0; j < m.cols(); ++j) F32(m(i, j));
  }
  void Vec(const Vector &v) {
    for (Eigen::Index i = 0; i < v.size(); ++i) F32(v(i));
  }
  void Bytes(const std::string &s) { out_ += s; }
  std::string &str() { return out_; }

 private:
  void Raw(const void *p, std::size_t n) { out_.append(static_cast<const char *>(p), n); }
  std::string out_;
};

class ByteReader {
 public:
  ByteReader(const std::string &bytes, std::string what) : data_(bytes), what_(std::move(what)) {}

  bool AtEnd() const { return pos_ == data_.size(); }
  std::size_t pos() const { return pos_; }
  std::uint32_t U32() { return Raw<std::uint32_t>(); }
  std::uint64_t U64() { return Raw<std::uint64_t>(); }
  Eigen::Index Dim() {
    const auto v = Raw<std::int32_t>();
    if (v < 0) Fail("negative dimension");
    return v;
  }
  double F32() {
    const auto v = static_cast<double>(Raw<float>());
    if (!std::isfinite(v)) Fail("non-finite value");
    return v;
  }
  std::string Str() {
    const std::uint32_t n = U32();
    return Take(n);
  }
  std::string Take(std::size_t n) {
    if (n > data_.size() - pos_) Fail("truncated");
    std::string s = data_.substr(pos_, n);
    pos_ += n;
    return s;
  }
  void Skip(std::size_t n) {
    if (n > data_.size() - pos_) Fail("truncated");
    pos_ += n;
  }
  Matrix Mat(Eigen::Index rows, Eigen::Index cols) {
    Need(static_cast<std::size_t>(rows) * static_cast<std::size_t>(cols) * 4);
    Matrix m(rows, cols);
    for (Eigen::Index i = 0; i < rows; ++i)
      for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = F32();
    return m;
  }
  Vector Vec(Eigen::Index n) {
    Need(static_cast<std::size_t>(n) * 4);
    Vector v(n);
    for (Eigen::Index i = 0; i < n; ++i) v(i) = F32();
    return v;
  }
  [[noreturn]] void Fail(const std::string &msg) const {
    throw IoError(what_ + ": " + msg + " at byte " + std::to_string(pos_));
  }

 private:
  void Need(std::size_t n) const {
    if (n > data_.size() - pos_) Fail("truncated");
  }
  template <typename T>
  T Raw() {
    Need(sizeof(T));
    T v;
    std::memcpy(&v, data_.data() + pos_, sizeof(T));
    pos_ += sizeof(T);
    return v;
  }

  const std::string &data_;
  std::string what_;
  std::size_t pos_ = 0;
};

std::string EncodeGmm(const DiagGmm &g) {
  ByteWriter w;
  w.I32(g.NumComponents());
  w.I32(g.Dim());
  w.Vec(g.weights());
  w.Mat(g.means());
  w.Mat(g.variances());
  return w.str();
}

DiagGmm DecodeGmm(ByteReader &r) {
  const Eigen::Index c = r.Dim(), d = r.Dim();
  Vector weights = r.Vec(c);
  Matrix means = r.Mat(c, d);
  Matrix vars = r.Mat(c, d);
  return DiagGmm(std::move(weights), std::move(means), std::move(vars));
}

std::string EncodeDnn(const FrameNet &net) {
  const FrameNetConfig &cfg = net.config();
  ByteWriter w;
  w.I32(cfg.input_dim);
  w.I32(cfg.context_frames);
  w.I32(static_cast<Eigen::Index>(cfg.conv_blocks.size()));
  for (const auto &c : cfg.conv_blocks) {
    w.I32(c.out_channels);
    w.I32(c.time_kernel);
    w.I32(c.freq_kernel);
    w.I32(c.pool);
  }
  w.I32(static_cast<Eigen::Index>(cfg.tdnn_layers.size()));
  for (const auto &t : cfg.tdnn_layers) {
    w.I32(t.units);
    w.I32(static_cast<Eigen::Index>(t.offsets.size()));
    for (int o : t.offsets) w.I32(o);
  }
  w.I32(cfg.feature_dim);
  w.I32(cfg.n_speakers);
  for (const auto &l : net.layers()) {
    w.Mat(l.w);
    w.Vec(l.b);
  }
  return w.str();
}

FrameNet DecodeDnn(ByteReader &r) {
  FrameNetConfig cfg;
  cfg.input_dim = static_cast<int>(r.Dim());
  cfg.context_frames = static_cast<int>(r.Dim());
  cfg.conv_blocks.resize(r.Dim());
  for (auto &c : cfg.conv_blocks) {
    c.out_channels = static_cast<int>(r.Dim());
    c.time_kernel = static_cast<int>(r.Dim());
    c.freq_kernel = static_cast<int>(r.Dim());
    c.pool = static_cast<int>(r.Dim());
  }
  cfg.tdnn_layers.resize(r.Dim());
  for (auto &t : cfg.tdnn_layers) {
    t.units = static_cast<int>(r.Dim());
    t.offsets.resize(r.Dim());
    for (int &o : t.offsets) o = static_cast<std::int32_t>(r.U32());
  }
  cfg.feature_dim = static_cast<int>(r.Dim());
  cfg.n_speakers = static_cast<int>(r.Dim());
  FrameNet net(cfg, 0);
  for (auto &l : net.mutable_layers()) {
    l.w = r.Mat(l.w.rows(), l.w.cols());
    l.b = r.Vec(l.b.size());
  }
  return net;
}

std::string EncodeLda(const LdaTransform &lda) {
  ByteWriter w;
  w.I32(lda.InputDim());
  w.I32(lda.OutputDim());
  w.Vec(lda.mean);
  w.Mat(lda.projection);
  return w.str();
}

LdaTransform DecodeLda(ByteReader &r) {
  const Eigen::Index d = r.Dim(), k = r.Dim();
  LdaTransform lda;
  lda.mean = r.Vec(d);
  lda.projection = r.Mat(d, k);
  return lda;
}

std::string EncodePlda(const PldaModel &p) {
  ByteWriter w;
  w.I32(p.Dim());
  w.Vec(p.mu);
  w.Mat(p.between);
  w.Mat(p.within);
  return w.str();
}

PldaModel DecodePlda(ByteReader &r) {
  const Eigen::Index d = r.Dim();
  PldaModel p;
  p.mu = r.Vec(d);
  p.between = r.Mat(d, d);
  p.within = r.Mat(d, d);
  return p;
}

const std::set<std::string> kKnownTags = {"GMM ", "TVM ", "DNN ", "LDA ", "PLDA"};

}  // namespace

TotalVariabilityModel ModelFile::Tvm() const {
  if (!tmatrix) throw InvalidArgument("model file has no TVM section");
  if (!gmm) throw InvalidArgument("model file has a TVM section but no GMM section");
  return TotalVariabilityModel(*gmm, *tmatrix);
}

std::string EncodeModelFile(const ModelFile &model) {
  ByteWriter w;
  w.Tag("TEVM");
  w.U32(kModelFormatVersion);
  auto section = [&](const char *tag, const std::string &payload) {
    w.Tag(tag);
    w.U64(payload.size());
    w.Bytes(payload);
  };
  if (model.gmm) section("GMM ", EncodeGmm(*model.gmm));
  if (model.tmatrix) {
    ByteWriter t;
    t.I32(model.tmatrix->rows());
    t.I32(model.tmatrix->cols());
    t.Mat(*model.tmatrix);
    section("TVM ", t.str());
  }
  if (model.dnn) section("DNN ", EncodeDnn(*model.dnn));
  if (model.lda) section("LDA ", EncodeLda(*model.lda));
  if (model.plda) section("PLDA", EncodePlda(*model.plda));
  return std::move(w.str());
}

ModelFile DecodeModelFile(const std::string &bytes, const std::set<std::string> &tags) {
  ByteReader r(bytes, "model file");
  if (r.Take(4) != "TEVM") r.Fail("bad magic");
  const std::uint32_t version = r.U32();
  if (version != kModelFormatVersion) r.Fail("unsupported format version " + std::to_string(version));
  ModelFile m;
  while (!r.AtEnd()) {
    const std::string tag = r.Take(4);
    const std::uint64_t len = r.U64();
    if (!kKnownTags.count(tag)) r.Fail("unknown section '" + tag + "'");
    if (!tags.empty() && !tags.count(tag)) {
      r.Skip(len);
      continue;
    }
    const std::string payload = r.Take(len);
    ByteReader s(payload, "section '" + tag + "'");
    if (tag == "GMM ") {
      m.gmm = DecodeGmm(s);
    } else if (tag == "TVM ") {
      const Eigen::Index rows = s.Dim(), cols = s.Dim();
      m.tmatrix = s.Mat(rows, cols);
    } else if (tag == "DNN ") {
      m.dnn = DecodeDnn(s);
    } else if (tag == "LDA ") {
      m.lda = DecodeLda(s);
    } else {
      m.plda = DecodePlda(s);
    }
    if (!s.AtEnd()) s.Fail("trailing bytes");
  }
  return m;
}

void WriteModelFile(const std::filesystem::path &path, const ModelFile &model) {
  WriteFileBytes(path, EncodeModelFile(model));
}

ModelFile ReadModelFile(const std::filesystem::path &path, const std::set<std::string> &tags) {
  return DecodeModelFile(ReadFileBytes(path), tags);
}

std::vector<std::string> ModelSections(const std::filesystem::path &path) {
  const std::string bytes = ReadFileBytes(path);
  ByteReader r(bytes, path.string());
  if (r.Take(4) != "TEVM") r.Fail("bad magic");
  r.U32();
  std::vector<std::string> out;
  while (!r.AtEnd()) {
    out.push_back(r.Take(4));
    r.Skip(r.U64());
  }
  return out;
}

// ---------------------------------------------------------------------------

void WriteArchive(const std::filesystem::path &path, const std::vector<ArchiveRecord> &records) {
  ByteWriter w;
  w.Tag("TEVF");
  w.U32(1);
  w.U64(records.size());
  for (const auto &rec : records) {
    w.Str(rec.id);
    w.Str(rec.matrix.label);
    w.U32(static_cast<std::uint32_t>(rec.matrix.values.rows()));
    w.U32(static_cast<std::uint32_t>(rec.matrix.values.cols()));
    w.Mat(rec.matrix.values);
  }
  WriteFileBytes(path, w.str());
}

std::vector<ArchiveRecord> ReadArchive(const std::filesystem::path &path) {
  const std::string bytes = ReadFileBytes(path);
  ByteReader r(bytes, path.string());
  if (r.Take(4) != "TEVF") r.Fail("bad magic");
  if (r.U32() != 1) r.Fail("unsupported archive version");
  const std::uint64_t n = r.U64();
  std::vector<ArchiveRecord> out;
  for (std::uint64_t i = 0; i < n; ++i) {
    ArchiveRecord rec;
    rec.id = r.Str();
    rec.matrix.label = r.Str();
    const std::uint32_t rows = r.U32(), cols = r.U32();
    rec.matrix.values = r.Mat(rows, cols);
    out.push_back(std::move(rec));
  }
  if (!r.AtEnd()) r.Fail("trailing bytes");
  return out;
}

ArchiveRecord StatsToRecord(const std::string &id, const BaumWelchStats &stats) {
  Matrix m(stats.NumComponents(), 1 + stats.Dim());
  m.col(0) = stats.zeroth;
  m.rightCols(stats.Dim()) = stats.first;
  return {id, {std::move(m), "stats"}};
}

BaumWelchStats RecordToStats(const ArchiveRecord &record) {
  const Matrix &m = record.matrix.values;
  if (record.matrix.label != "stats" || m.cols() < 2)
    throw IoError("archive record '" + record.id + "' does not hold statistics");
  BaumWelchStats s;
  s.zeroth = m.col(0);
  s.first = m.rightCols(m.cols() - 1);
  s.n_frames = s.zeroth.sum();
  return s;
}

// ---------------------------------------------------------------------------

namespace {

std::string Format17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

std::ofstream OpenOut(const std::filesystem::path &path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw IoError("cannot write " + path.string());
  return os;
}

std::ifstream OpenIn(const std::filesystem::path &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw IoError("cannot open " + path.string());
  return is;
}

}  // namespace

void WriteVectors(const std::filesystem::path &path, const std::vector<SpeakerVector> &vectors) {
  std::ofstream os = OpenOut(path);
  for (const auto &v : vectors) {
    os << v.utt_id << '\t' << VectorKindName(v.kind) << '\t';
    for (Eigen::Index i = 0; i < v.values.size(); ++i) os << (i ? " " : "") << Format17(v.values(i));
    os << '\n';
  }
  if (!os) throw IoError("write failed: " + path.string());
}

std::vector<SpeakerVector> ReadVectors(const std::filesystem::path &path) {
  std::ifstream is = OpenIn(path);
  std::vector<SpeakerVector> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    const auto t1 = line.find('\t'), t2 = line.find('\t', t1 == std::string::npos ? t1 : t1 + 1);
    if (t1 == std::string::npos || t2 == std::string::npos)
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": expected utt_id, kind and values");
    SpeakerVector v;
    v.utt_id = line.substr(0, t1);
    v.kind = ParseVectorKind(line.substr(t1 + 1, t2 - t1 - 1));
    std::istringstream vs(line.substr(t2 + 1));
    std::vector<double> vals;
    double x;
    while (vs >> x) vals.push_back(x);
    if (vals.empty() || !vs.eof())
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": bad vector values");
    v.values = Eigen::Map<Vector>(vals.data(), static_cast<Eigen::Index>(vals.size()));
    out.push_back(std::move(v));
  }
  return out;
}

VectorTable ToTable(const std::vector<SpeakerVector> &vectors) {
  VectorTable t;
  for (const auto &v : vectors)
    if (!t.emplace(v.utt_id, v).second) throw InvalidArgument("duplicate vector for '" + v.utt_id + "'");
  return t;
}

void WriteTrialFile(const std::filesystem::path &path, const TrialList &list) {
  std::ofstream os = OpenOut(path);
  WriteTrials(os, list);
  if (!os) throw IoError("write failed: " + path.string());
}

TrialList ReadTrialFile(const std::filesystem::path &path) {
  std::ifstream is = OpenIn(path);
  return ReadTrials(is);
}

void WriteScores(const std::filesystem::path &path, const std::vector<ScoredTrial> &scores) {
  std::ofstream os = OpenOut(path);
  for (const auto &s : scores) os << s.utt_a << '\t' << s.utt_b << '\t' << Format17(s.score) << '\n';
  if (!os) throw IoError("write failed: " + path.string());
}

std::vector<ScoredTrial> ReadScores(const std::filesystem::path &path) {
  std::ifstream is = OpenIn(path);
  std::vector<ScoredTrial> out;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line[0] == '#') continue;
    std::istringstream ls(line);
    ScoredTrial s;
    if (!(ls >> s.utt_a >> s.utt_b >> s.score))
      throw IoError(path.string() + ":" + std::to_string(lineno) + ": expected utt_a utt_b score");
    out.push_back(std::move(s));
  }
  return out;
}

std::string ReadFileBytes(const std::filesystem::path &path) {
  std::ifstream is = OpenIn(path);
  std::ostringstream ss;
  ss << is.rdbuf();
  return ss.str();
}

void WriteFileBytes(const std::filesystem::path &path, const std::string &bytes) {
  std::ofstream os = OpenOut(path);
  os.write(bytes.data(), static_cast<std::streamsize>(bytes.size()));
  if (!os) throw IoError("write failed: " + path.string());
}

}  // namespace tev
