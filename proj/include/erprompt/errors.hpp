#pragma once

#include <stdexcept>
#include <string>

namespace erprompt {

// Base class for every error raised by the library. The CLI maps the
// subclasses onto process exit codes (see tools/erprompt_main.cpp).
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

// Input data could not be read (missing file, undecodable bytes).
class IngestError : public Error {
public:
    using Error::Error;
};

// Input data was read but violates the expected format (bad header,
// bad label, malformed line).
class FormatError : public Error {
public:
    using Error::Error;
};

// Cross-file referential integrity violation (unknown ids in pair files,
// labels inconsistent with the ground-truth mapping).
class IntegrityError : public Error {
public:
    using Error::Error;
};

// Invalid configuration (bad pattern setup, missing mock truth, ...).
class ConfigError : public Error {
public:
    using Error::Error;
};

// Judgments and labels do not cover the same pair set.
class AlignmentError : public Error {
public:
    using Error::Error;
};

// Endpoint kept failing after all retries, or the network is down.
class TransportError : public Error {
public:
    using Error::Error;
};

// The endpoint rejected the request (4xx other than 429).
class RequestError : public Error {
public:
    using Error::Error;
};

// The endpoint returned an empty completion.
class EmptyResponseError : public Error {
public:
    using Error::Error;
};

// A cache record failed its digest check on read.
class CacheError : public Error {
public:
    using Error::Error;
};

// Estimated spend crossed the configured --budget-usd cap.
class BudgetError : public Error {
public:
    using Error::Error;
};

// A report was requested over a run that is missing judgments.
class IncompleteRunError : public Error {
public:
    using Error::Error;
};

} // namespace erprompt
