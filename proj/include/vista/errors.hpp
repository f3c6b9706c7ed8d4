#pragma once

#include <stdexcept>
#include <string>

namespace vista {

/// Base class for all errors raised by this library.
class VistaError : public std::runtime_error {
public:
    explicit VistaError(const std::string& what) : std::runtime_error(what) {}
};

/// A structured input document violated its schema. Carries enough context
/// (entry name, line number) in the message to locate the offending record.
class SchemaError : public VistaError {
public:
    using VistaError::VistaError;
};

/// A token sequence violated the dependency-annotation structure
/// (out-of-range head index, missing root).
class StructuralError : public VistaError {
public:
    using VistaError::VistaError;
};

/// An operation was called with arguments outside its contract.
class PreconditionError : public VistaError {
public:
    using VistaError::VistaError;
};

/// Cosine similarity requested against a zero vector.
class UndefinedCosineError : public VistaError {
public:
    using VistaError::VistaError;
};

/// Free-form text could not be parsed into the expected shape
/// (reliability verdict, template slot).
class ParseError : public VistaError {
public:
    using VistaError::VistaError;
};

class BackendError : public VistaError {
public:
    using VistaError::VistaError;
};

/// Transport-level failure that survived the retry budget.
class BackendUnavailableError : public BackendError {
public:
    using BackendError::BackendError;
};

/// The backend answered but refused to complete; carries the backend message.
class ContentRefusalError : public BackendError {
public:
    using BackendError::BackendError;
};

/// Fewer samples arrived than requested.
class PartialResultError : public BackendError {
public:
    PartialResultError(const std::string& what, int received, int requested)
        : BackendError(what), received_(received), requested_(requested) {}

    int received() const { return received_; }
    int requested() const { return requested_; }

private:
    int received_;
    int requested_;
};

/// The backend does not implement the requested capability.
class UnsupportedOperationError : public BackendError {
public:
    using BackendError::BackendError;
};

/// The backend answered with a payload violating its own contract
/// (e.g. mixed embedding dimensions in one batch).
class BackendContractError : public BackendError {
public:
    using BackendError::BackendError;
};

}  // namespace vista
