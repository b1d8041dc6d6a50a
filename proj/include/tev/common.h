// tev/common.h

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

#ifndef TEV_COMMON_H_
#define TEV_COMMON_H_

#include <cstdint>
#include <functional>
#include <random>
#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace tev {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;
using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

/// Base class of every error the toolkit throws.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Input violated an operation's precondition.
class InvalidArgument : public Error {
 public:
  using Error::Error;
};

/// File could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// A numerical procedure failed (non-finite values, singular systems).
class NumericError : public Error {
 public:
  using Error::Error;
};

/// Seeded generator with distribution code that does not depend on the
/// standard library's implementation-defined distributions, so streams are
/// stable across toolchains.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t Next() { return engine_(); }

  /// Uniform on [0, 1).
  double Uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }
  double Uniform(double lo, double hi) { return lo + (hi - lo) * Uniform(); }

  /// Uniform integer on [0, n).
  std::size_t Index(std::size_t n);

  /// Standard normal via Box-Muller.
  double Normal();

  template <typename Container>
  void Shuffle(Container &c) {
    for (std::size_t i = c.size(); i > 1; --i) std::swap(c[i - 1], c[Index(i)]);
  }

 private:
  std::mt19937_64 engine_;
  bool have_spare_ = false;
  double spare_ = 0.0;
};

/// Runs fn(i) for i in [0, n) on up to `threads` workers. Each index is
/// visited exactly once; callers store results by index so the outcome is
/// independent of scheduling.
void ParallelFor(std::size_t n, int threads, const std::function<void(std::size_t)> &fn);

/// Default worker count: $TEV_THREADS if set, else 1.
int DefaultThreads();

/// Warning sink; defaults to stderr. Tests may redirect it.
void Warn(const std::string &msg);
void SetWarningHandler(std::function<void(const std::string &)> handler);

}  // namespace tev

#endif  // TEV_COMMON_H_
