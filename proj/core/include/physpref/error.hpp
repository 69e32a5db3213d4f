// Copyright 2026 The physpref Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace physpref {

// Base for every error raised by the library. Callers that only need to
// report and exit can catch this one type.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed input text (JSON lines, config files). Carries the 1-based line.
class ParseError : public Error {
public:
    ParseError(const std::string& source, std::size_t line, const std::string& what);

    std::size_t line() const noexcept { return line_; }

private:
    std::size_t line_;
};

// Well-formed input that violates a value or shape contract.
class ValidationError : public Error {
public:
    using Error::Error;
};

// Filesystem or OS failure that must not be mistaken for data filtering.
class IoError : public Error {
public:
    using Error::Error;
};

// A pipeline invariant was broken (cross-group pair, heldout leakage,
// tampered manifest, adapter restore mismatch). Always aborts the run.
class IntegrityError : public Error {
public:
    using Error::Error;
};

// Judge response or request violating the single-key verdict schema.
class ProtocolError : public Error {
public:
    using Error::Error;
};

// Non-finite loss or activation during training or sampling.
class NumericalError : public Error {
public:
    using Error::Error;
};

// A quota, split or selection rule cannot be satisfied by the given data.
class SelectionError : public Error {
public:
    using Error::Error;
};

}  // namespace physpref
