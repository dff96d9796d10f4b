#pragma once

#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

namespace g2s {

/// Root of every error raised by the toolkit.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A caller broke an operation's precondition (empty input, bad dimensions).
class PreconditionError : public Error {
public:
    using Error::Error;
};

/// JSON document does not match the expected schema.
class SchemaError : public Error {
public:
    SchemaError(std::string field, const std::string& what,
                std::optional<std::size_t> record_index = std::nullopt)
        : Error(format_message(field, what, record_index)),
          field_(std::move(field)),
          record_index_(record_index) {}

    const std::string& field() const noexcept { return field_; }
    std::optional<std::size_t> record_index() const noexcept { return record_index_; }

private:
    static std::string format_message(const std::string& field, const std::string& what,
                                      std::optional<std::size_t> idx) {
        std::string msg;
        if (idx) msg += "record " + std::to_string(*idx) + ": ";
        msg += "field '" + field + "': " + what;
        return msg;
    }

    std::string field_;
    std::optional<std::size_t> record_index_;
};

/// A value parsed fine but violates a domain invariant.
class InvariantError : public Error {
public:
    InvariantError(std::vector<std::string> violations, std::string context = {})
        : Error(format_message(violations, context)), violations_(std::move(violations)) {}

    const std::vector<std::string>& violations() const noexcept { return violations_; }

private:
    static std::string format_message(const std::vector<std::string>& v, const std::string& ctx) {
        std::string msg = ctx.empty() ? "invariant violation:" : ctx + ": invariant violation:";
        for (const auto& s : v) msg += " " + s;
        return msg;
    }

    std::vector<std::string> violations_;
};

class ConfigError : public Error {
public:
    using Error::Error;
};

class TemplateError : public Error {
public:
    using Error::Error;
};

/// Network or server failure. `retryable` marks timeouts, 5xx and resets.
class TransportError : public Error {
public:
    TransportError(const std::string& what, int status, bool retryable)
        : Error(what), status_(status), retryable_(retryable) {}

    int status() const noexcept { return status_; }
    bool retryable() const noexcept { return retryable_; }

private:
    int status_;
    bool retryable_;
};

class AuthError : public Error {
public:
    using Error::Error;
};

/// Backend answered, but the body lacks the expected fields.
class ResponseShapeError : public Error {
public:
    using Error::Error;
};

/// Scripted backend received a request no fixture entry matches.
class ScriptMismatchError : public Error {
public:
    using Error::Error;
};

/// Format repair gave up; carries every text that was tried.
class FormatExhaustedError : public Error {
public:
    FormatExhaustedError(const std::string& what, std::vector<std::string> attempts)
        : Error(what), attempts_(std::move(attempts)) {}

    const std::vector<std::string>& attempts() const noexcept { return attempts_; }

private:
    std::vector<std::string> attempts_;
};

/// Agent answered with parseable JSON of the wrong shape, count or content.
class WrongOutputError : public Error {
public:
    using Error::Error;
};

class StageMismatchError : public Error {
public:
    using Error::Error;
};

class JudgeFormatError : public Error {
public:
    JudgeFormatError(const std::string& what, std::string raw)
        : Error(what), raw_(std::move(raw)) {}

    const std::string& raw() const noexcept { return raw_; }

private:
    std::string raw_;
};

class UnmatchedGoalError : public Error {
public:
    using Error::Error;
};

}  // namespace g2s
