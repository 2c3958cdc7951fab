// Copyright 2026 The bnparam Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef BNPARAM_CORE_ERRORS_HPP
#define BNPARAM_CORE_ERRORS_HPP

#include <cstddef>
#include <stdexcept>
#include <string>

namespace bnp {

/// Coarse classification used by the C API to pick a status code.
enum class ErrorKind {
  Input,      // malformed files, invalid arguments, violated preconditions
  Numerical,  // zero-probability evidence, eigen solver failure
  Io,         // filesystem failures
};

class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}
  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

class InputError : public Error {
 public:
  explicit InputError(const std::string& what) : Error(ErrorKind::Input, what) {}
};

class NumericalError : public Error {
 public:
  explicit NumericalError(const std::string& what)
      : Error(ErrorKind::Numerical, what) {}
};

class IoError : public Error {
 public:
  explicit IoError(const std::string& what) : Error(ErrorKind::Io, what) {}
};

/// The evidence of a data case has probability zero under the current
/// parameters. `case_index` is filled in by callers that iterate datasets.
class ZeroProbabilityEvidence : public NumericalError {
 public:
  static constexpr std::size_t kNoIndex = static_cast<std::size_t>(-1);

  explicit ZeroProbabilityEvidence(std::size_t case_index = kNoIndex,
                                   const std::string& context = {})
      : NumericalError(message(case_index, context)), case_index_(case_index) {}

  std::size_t case_index() const noexcept { return case_index_; }

 private:
  static std::string message(std::size_t idx, const std::string& context) {
    std::string m = idx == kNoIndex ? std::string("evidence has zero probability")
                                    : "data case " + std::to_string(idx) + " has zero probability";
    if (!context.empty()) m += " (" + context + ")";
    return m;
  }
  std::size_t case_index_;
};

}  // namespace bnp

#endif  // BNPARAM_CORE_ERRORS_HPP
