// Copyright 2026 The rsulabel Authors
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

#ifndef RSULABEL__ERROR_HPP_
#define RSULABEL__ERROR_HPP_

#include <stdexcept>
#include <string>

namespace rsulabel
{

/// Base class of every exception thrown by the library.
class Error : public std::runtime_error
{
public:
  using std::runtime_error::runtime_error;
};

/// An argument violates an operation's precondition (negative radius, bad scale, ...).
class ParameterError : public Error
{
public:
  using Error::Error;
};

/// Input geometry too degenerate to produce a result (collinear cluster, coincident points).
class DegenerateInputError : public Error
{
public:
  using Error::Error;
};

/// Invalid or inconsistent configuration.
class ConfigError : public Error
{
public:
  using Error::Error;
};

/// Malformed file content.
class ParseError : public Error
{
public:
  enum class Kind { kBadMagic, kBadVersion, kTruncated, kCountMismatch, kSchemaVersion, kSyntax };

  ParseError(Kind kind, const std::string & what) : Error(what), kind_(kind) {}

  Kind kind() const noexcept { return kind_; }

private:
  Kind kind_;
};

}  // namespace rsulabel

#endif  // RSULABEL__ERROR_HPP_
