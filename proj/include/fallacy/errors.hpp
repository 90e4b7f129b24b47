#pragma once

#include <stdexcept>
#include <string>

namespace fallacy {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

/// Bad flags, config files or environment. CLI exit code 1.
struct ConfigError : Error {
    using Error::Error;
};

/// Malformed or inconsistent input data. CLI exit code 2.
struct DataError : Error {
    using Error::Error;
};
struct SchemaError : DataError {
    using DataError::DataError;
};
struct CountMismatch : DataError {
    using DataError::DataError;
};
struct UnknownLabel : DataError {
    using DataError::DataError;
};
struct MissingGold : DataError {
    using DataError::DataError;
};

/// Anything raised while talking to a generation service. CLI exit code 3.
struct BackendError : Error {
    using Error::Error;
};
struct TransportError : BackendError {
    using BackendError::BackendError;
};
struct ProviderError : BackendError {
    ProviderError(int status, const std::string& message)
        : BackendError("provider error " + std::to_string(status) + ": " + message), status(status) {}
    int status;
};
/// A mock script had no rule for the prompt.
struct MockScriptError : BackendError {
    using BackendError::BackendError;
};

struct LabelSpanNotFound : Error {
    using Error::Error;
};

struct TemplateError : Error {
    using Error::Error;
};
struct MissingDefinition : TemplateError {
    explicit MissingDefinition(const std::string& label)
        : TemplateError("no definition for label '" + label + "'"), label(label) {}
    std::string label;
};
struct RankingIncomplete : TemplateError {
    using TemplateError::TemplateError;
};

struct EmptyGeneration : BackendError {
    using BackendError::BackendError;
};

struct NeighborSourceUnavailable : Error {
    using Error::Error;
};

}  // namespace fallacy
