// Copyright 2026 The Trayscan Authors. All Rights Reserved.
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

namespace trayscan {

/// Base class of every error raised by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed or inconsistent input data (bad dimensions, unknown labels, ...).
class ValidationError : public Error {
 public:
  using Error::Error;
};

/// Unreadable or unwritable files.
class IoError : public Error {
 public:
  using Error::Error;
};

/// Degenerate geometric configurations (collinear points, empty regions).
class GeometryError : public Error {
 public:
  using Error::Error;
};

/// Numerical failures such as a diverging optimizer.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace trayscan
