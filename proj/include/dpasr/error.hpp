// Copyright 2026 The dpasr Authors
//
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

#ifndef DPASR_ERROR_HPP_
#define DPASR_ERROR_HPP_

#include <stdexcept>
#include <string>

namespace dpasr {

/// Raised when an operation's precondition on its arguments is violated.
class InvalidInput : public std::invalid_argument {
 public:
  explicit InvalidInput(const std::string &what) : std::invalid_argument(what) {}
};

/// Raised when an input file cannot be parsed. The message names the
/// offending file and line where one exists.
class ParseError : public std::runtime_error {
 public:
  explicit ParseError(const std::string &what) : std::runtime_error(what) {}
};

/// Raised by training when a loss becomes NaN or infinite.
class NonFiniteLoss : public std::runtime_error {
 public:
  explicit NonFiniteLoss(const std::string &what) : std::runtime_error(what) {}
};

#define DPASR_REQUIRE(cond, msg)                    \
  do {                                              \
    if (!(cond)) throw ::dpasr::InvalidInput(msg);  \
  } while (0)

}  // namespace dpasr

#endif  // DPASR_ERROR_HPP_
