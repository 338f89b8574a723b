#pragma once

#include <stdexcept>
#include <string>

namespace lkd {

/// Base class for all errors raised by this library.
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& message) : std::runtime_error(message) {}
};

// corpus
class NotFoundError : public Error { public: using Error::Error; };
class EmptyCorpusError : public Error { public: using Error::Error; };
class DecodeError : public Error { public: using Error::Error; };
class EmptyTextError : public Error { public: using Error::Error; };

// llm gateway
class TransportError : public Error { public: using Error::Error; };
class AuthError : public Error { public: using Error::Error; };
class ContextOverflowError : public Error { public: using Error::Error; };
class ParseError : public Error { public: using Error::Error; };
class InvalidRequestError : public Error { public: using Error::Error; };

// embedding store
class ProviderError : public Error { public: using Error::Error; };
class ZeroVectorError : public Error { public: using Error::Error; };
class DuplicateIdError : public Error { public: using Error::Error; };
class DimensionMismatchError : public Error { public: using Error::Error; };

// clustering
class BadKError : public Error { public: using Error::Error; };
class SingleClusterError : public Error { public: using Error::Error; };
class BadRangeError : public Error { public: using Error::Error; };

// schema
class EmptySchemaError : public Error { public: using Error::Error; };

// pipeline / cli
class ConfigError : public Error { public: using Error::Error; };
class IoError : public Error { public: using Error::Error; };
class MissingArtifactError : public Error { public: using Error::Error; };
class PrerequisiteMissingError : public Error { public: using Error::Error; };
class LockError : public Error { public: using Error::Error; };

} // namespace lkd
