// Copyright 2026 The feedalign Authors. All Rights Reserved.
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

namespace feedalign {

/// Base of every error thrown by the library.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree (matmul inner dims, hadamard, feedback width).
class DimensionError : public Error {
 public:
  using Error::Error;
};

/// Tensor rank is not the one an op requires.
class RankError : public DimensionError {
 public:
  using DimensionError::DimensionError;
};

/// Convolution or pooling geometry yields a non-positive or inconsistent extent.
class GeometryError : public Error {
 public:
  using Error::Error;
};

/// A layer was asked for something its cached state cannot provide.
class StateError : public Error {
 public:
  using Error::Error;
};

/// Bad labels, empty datasets, batch larger than the dataset.
class DataError : public Error {
 public:
  using Error::Error;
};

/// On-disk bytes do not follow the expected layout.
class FormatError : public DataError {
 public:
  using DataError::DataError;
};

/// Invalid network, strategy or run configuration.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// NaN/Inf surfaced by an op, or a failed numeric check.
class NumericError : public Error {
 public:
  using Error::Error;
};

}  // namespace feedalign
