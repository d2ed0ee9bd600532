// Copyright 2026 The CSST Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//      http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <stdexcept>
#include <string>

namespace csst {

// Error taxonomy. Every failure surfaced by the library is one of these, so
// callers (the CLI in particular) can map them onto exit codes.
enum class ErrorKind {
    InvalidArgument,
    ResourceLimit,
    Numerical,
    NotDiagonalizable,
    InfeasibleTolerance,
    UndefinedSignal,
    Io,
    Config,
};

class Error : public std::runtime_error {
   public:
    Error(ErrorKind kind, const std::string &what) : std::runtime_error(what), kind_(kind) {}
    ErrorKind kind() const noexcept { return kind_; }

   private:
    ErrorKind kind_;
};

struct InvalidArgument : Error {
    explicit InvalidArgument(const std::string &w) : Error(ErrorKind::InvalidArgument, w) {}
};
struct ResourceLimit : Error {
    explicit ResourceLimit(const std::string &w) : Error(ErrorKind::ResourceLimit, w) {}
};
struct NumericalError : Error {
    explicit NumericalError(const std::string &w) : Error(ErrorKind::Numerical, w) {}
};
struct NotDiagonalizable : Error {
    explicit NotDiagonalizable(const std::string &w) : Error(ErrorKind::NotDiagonalizable, w) {}
};
struct InfeasibleTolerance : Error {
    explicit InfeasibleTolerance(const std::string &w) : Error(ErrorKind::InfeasibleTolerance, w) {}
};
struct UndefinedSignal : Error {
    explicit UndefinedSignal(const std::string &w) : Error(ErrorKind::UndefinedSignal, w) {}
};
struct IoError : Error {
    explicit IoError(const std::string &w) : Error(ErrorKind::Io, w) {}
};
struct ConfigError : Error {
    explicit ConfigError(const std::string &w) : Error(ErrorKind::Config, w) {}
};

namespace detail {

inline void require(bool cond, const std::string &msg) {
    if (!cond) {
        throw InvalidArgument(msg);
    }
}

}  // namespace detail

}  // namespace csst
