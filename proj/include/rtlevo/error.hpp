#pragma once

#include <stdexcept>
#include <string>

namespace rtlevo {

class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid configuration, manifest, or task description. Maps to CLI exit 2.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Unwritable history sink, queue, or skill directory.
class StorageError : public Error {
public:
    using Error::Error;
};

/// Another process holds an exclusive store lock. Maps to CLI exit 3.
class LockError : public Error {
public:
    using Error::Error;
};

/// A tool required by the active mode cannot be resolved. Maps to CLI exit 4.
class ToolMissingError : public Error {
public:
    using Error::Error;
};

class ProviderError : public Error {
public:
    using Error::Error;
};

class ExtractionError : public Error {
public:
    using Error::Error;
};

/// Input outside a reference model's declared domain.
class DomainError : public Error {
public:
    using Error::Error;
};

class PreconditionError : public Error {
public:
    using Error::Error;
};

class ParseError : public Error {
public:
    using Error::Error;
};

} // namespace rtlevo
