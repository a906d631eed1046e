/*
 * Copyright 2025 The FedLedger Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *      http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */
#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace fedledger {

/// Base class for every domain error thrown by the library.
struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// -- storage / ledger ---------------------------------------------------------

struct StoreError : Error {
  using Error::Error;
};

struct NotFoundError : Error {
  using Error::Error;
};

/// Hash links, block hashes or blob digests fail to recompute.
struct IntegrityError : Error {
  using Error::Error;
};

struct EmptyBlockError : Error {
  using Error::Error;
};

// -- access control -----------------------------------------------------------

struct PermissionDeniedError : Error {
  using Error::Error;
};

// -- ML kernels ---------------------------------------------------------------

struct DimensionMismatchError : Error {
  using Error::Error;
};

struct NonFiniteError : Error {
  using Error::Error;
};

struct EmptyInputError : Error {
  using Error::Error;
};

struct EmptyTestSetError : Error {
  using Error::Error;
};

struct BadKError : Error {
  using Error::Error;
};

/// A CSV cell failed to parse; coordinates are 1-based within the offending
/// blob (row counts data lines, column counts delimited cells).
struct CsvParseError : Error {
  CsvParseError(std::size_t row, std::size_t column, const std::string& what)
      : Error("parse error at row " + std::to_string(row) + ", column " +
              std::to_string(column) + ": " + what),
        row(row),
        column(column) {}
  std::size_t row;
  std::size_t column;
};

struct SchemaError : Error {
  using Error::Error;
};

// -- compute plans ------------------------------------------------------------

struct EmptyPlanError : Error {
  using Error::Error;
};

struct BadRoundsError : Error {
  using Error::Error;
};

struct UnknownRefError : Error {
  using Error::Error;
};

struct CycleError : Error {
  using Error::Error;
};

// -- scenario / simulation ----------------------------------------------------

struct ScenarioError : Error {
  using Error::Error;
};

}  // namespace fedledger
