// Copyright 2026 The hrtfxai Authors
// SPDX-License-Identifier: Apache-2.0
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace hrtfxai {

// Base of every error raised by the toolkit. The CLI maps the three families
// below onto exit codes 2 (usage), 3 (data) and 4 (numerical).
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class UsageError : public Error {
 public:
  using Error::Error;
};

class DataError : public Error {
 public:
  using Error::Error;
};

class NumericalError : public Error {
 public:
  using Error::Error;
};

// Container format failures. Each is distinguishable by type.
class FormatError : public DataError {
 public:
  using DataError::DataError;
};

class MagicMismatch : public FormatError {
 public:
  using FormatError::FormatError;
};

class TruncatedPayload : public FormatError {
 public:
  using FormatError::FormatError;
};

class NonFiniteValue : public FormatError {
 public:
  using FormatError::FormatError;
};

class ShapeMismatch : public FormatError {
 public:
  using FormatError::FormatError;
};

// 2 usage, 3 data, 4 numerical, 1 for anything else.
inline int exit_code_for(const std::exception& e) {
  if (dynamic_cast<const UsageError*>(&e)) return 2;
  if (dynamic_cast<const DataError*>(&e)) return 3;
  if (dynamic_cast<const NumericalError*>(&e)) return 4;
  return 1;
}

}  // namespace hrtfxai
