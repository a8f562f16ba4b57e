/*******************************************************************************
 * Copyright 2026 The escgen Authors
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
 *******************************************************************************/

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace esc {

/// Base class for every error raised by the library. Errors of this type are
/// caused by bad input (files, schedules, shapes) and map to CLI exit code 1.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Malformed input text. Carries the 1-based line number of the offending
/// line.
class ParseError : public Error {
public:
    ParseError(const std::string& what, std::size_t line)
        : Error("line " + std::to_string(line) + ": " + what), line_(line) {}

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

/// Operand shapes do not conform.
class ShapeError : public Error {
public:
    using Error::Error;
};

/// A schedule is out of range or does not match the data it is applied to.
class ScheduleError : public Error {
public:
    using Error::Error;
};

/// An IR is malformed for the requested pass or interpretation.
class IrError : public Error {
public:
    using Error::Error;
};

/// A serialized or in-memory compressed matrix fails its structural checks.
class FormatError : public Error {
public:
    using Error::Error;
};

/// An internal invariant was violated. Maps to CLI exit code 2.
class InternalError : public std::logic_error {
public:
    using std::logic_error::logic_error;
};

} // namespace esc
