// Copyright 2026 The amp-motion Authors
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

#ifndef AMP__ERRORS_HPP_
#define AMP__ERRORS_HPP_

#include <stdexcept>
#include <string>

namespace amp
{

/// Non-finite or out-of-domain numeric input.
class DomainError : public std::domain_error
{
public:
  using std::domain_error::domain_error;
};

/// Tensor or layer width mismatch.
class ShapeError : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

/// Invalid hyper-parameter or model configuration.
class ConfigError : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

/// Degenerate geometry (e.g. coincident polyline points).
class GeometryError : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

/// API or command misuse.
class UsageError : public std::invalid_argument
{
public:
  using std::invalid_argument::invalid_argument;
};

/// Malformed serialized input; carries the 1-based line number when known.
class ParseError : public std::runtime_error
{
public:
  ParseError(const std::string & what, std::size_t line)
  : std::runtime_error("line " + std::to_string(line) + ": " + what), line_(line)
  {
  }
  std::size_t line() const { return line_; }

private:
  std::size_t line_;
};

/// Deserialized data that breaks a domain invariant; names the offending field.
class ValidationError : public std::runtime_error
{
public:
  ValidationError(const std::string & field, const std::string & what)
  : std::runtime_error(field + ": " + what), field_(field)
  {
  }
  const std::string & field() const { return field_; }

private:
  std::string field_;
};

/// Training diverged.
class NumericError : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

}  // namespace amp

#endif  // AMP__ERRORS_HPP_
