/*
 * Copyright 2026 The AGP Lab Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef AGP_ERROR_HPP
#define AGP_ERROR_HPP

#include <stdexcept>
#include <string>

namespace agp {

/// Root of the library's exception hierarchy.
class Error : public std::runtime_error {
public:
  using std::runtime_error::runtime_error;
};

/// Operand shapes do not agree.
class DimensionError : public Error {
public:
  using Error::Error;
};

/// A NaN/Inf was produced, or a numeric precondition (invertibility, finite
/// gradient) failed.
class NumericError : public Error {
public:
  using Error::Error;
};

/// Invalid configuration or argument values.
class ConfigError : public Error {
public:
  using Error::Error;
};

/// Malformed or inconsistent data (files, graphs, datasets).
class DataError : public Error {
public:
  using Error::Error;
};

class ParseError : public DataError {
public:
  ParseError(std::size_t line, const std::string &what)
      : DataError("line " + std::to_string(line) + ": " + what), line_(line) {}
  std::size_t line() const noexcept { return line_; }

private:
  std::size_t line_;
};

} // namespace agp

#endif
