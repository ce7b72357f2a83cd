#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace t2sql {

// Base of every error the library raises. Callers that only want to report
// a failure can catch this; callers that branch on kind catch the subclass.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Malformed JSON input. `offset` is the byte position reported by the parser.
class JsonParseError : public Error {
public:
    JsonParseError(const std::string& what, std::size_t offset)
        : Error(what), offset_(offset) {}
    std::size_t offset() const noexcept { return offset_; }

private:
    std::size_t offset_;
};

class SchemaIntegrityError : public Error {
public:
    SchemaIntegrityError(std::string db_id, const std::string& what)
        : Error("schema '" + db_id + "': " + what), db_id_(std::move(db_id)) {}
    const std::string& db_id() const noexcept { return db_id_; }

private:
    std::string db_id_;
};

class IntegrityError : public Error {
public:
    using Error::Error;
};

class ContentError : public Error {
public:
    using Error::Error;
};

// Lexical or syntax error in SQL text; `position` is a byte offset.
class SqlSyntaxError : public Error {
public:
    SqlSyntaxError(const std::string& what, std::size_t position)
        : Error(what + " at position " + std::to_string(position)), position_(position) {}
    std::size_t position() const noexcept { return position_; }

private:
    std::size_t position_;
};

// Well-formed SQL that uses a construct outside the supported dialect.
class DialectError : public Error {
public:
    explicit DialectError(std::string construct)
        : Error("unsupported SQL construct: " + construct), construct_(std::move(construct)) {}
    const std::string& construct() const noexcept { return construct_; }

private:
    std::string construct_;
};

class ResolutionError : public Error {
public:
    explicit ResolutionError(std::string identifier)
        : Error("cannot resolve identifier '" + identifier + "'"),
          identifier_(std::move(identifier)) {}
    const std::string& identifier() const noexcept { return identifier_; }

private:
    std::string identifier_;
};

class AnnotationError : public Error {
public:
    using Error::Error;
};

class FormatError : public Error {
public:
    using Error::Error;
};

class PromptSpecError : public Error {
public:
    using Error::Error;
};

class SelectionError : public Error {
public:
    using Error::Error;
};

class MissingTranscriptError : public Error {
public:
    explicit MissingTranscriptError(std::string hash)
        : Error("no transcript recorded for request " + hash), hash_(std::move(hash)) {}
    const std::string& hash() const noexcept { return hash_; }

private:
    std::string hash_;
};

class BackendError : public Error {
public:
    BackendError(const std::string& what, int last_status)
        : Error(what), last_status_(last_status) {}
    int last_status() const noexcept { return last_status_; }

private:
    int last_status_;
};

class ExecutionError : public Error {
public:
    using Error::Error;
};

class QueryTimeoutError : public ExecutionError {
public:
    using ExecutionError::ExecutionError;
};

// A gold query failed on a database it is supposed to run on.
class FixtureIntegrityError : public Error {
public:
    using Error::Error;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

}  // namespace t2sql
