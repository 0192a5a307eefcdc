// error.hpp
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

#pragma once

#include <stdexcept>
#include <string>

namespace dstruct {

/// Root of every error thrown by the library. Each subclass names the
/// category of failure so callers (and tests) can discriminate them.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Tensor shapes do not agree for the requested operation.
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// NaN or otherwise unusable floating-point input.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// A hyperparameter or argument is outside its legal range.
class ParameterError : public Error {
 public:
  using Error::Error;
};

/// An index (token id, state id, symbol) is out of range.
class IndexError : public Error {
 public:
  using Error::Error;
};

/// Input data violates a documented precondition.
class InputError : public Error {
 public:
  using Error::Error;
};

/// Input exceeds a fixed model capacity (pairs, sequence length).
class CapacityError : public Error {
 public:
  using Error::Error;
};

/// A file could not be opened, read or written.
class IoError : public Error {
 public:
  using Error::Error;
};

/// A file was readable but its content does not match the schema.
class ParseError : public Error {
 public:
  using Error::Error;
};

}  // namespace dstruct
