#pragma once

#include <cstddef>
#include <cstdint>
#include <stdexcept>
#include <string>

namespace snapsim {

// Base class for recoverable data/domain errors. The CLI maps these to exit
// code 2; anything else escaping to main is treated as an internal bug (3).
class Error : public std::runtime_error {
public:
    explicit Error(const std::string& what) : std::runtime_error(what) {}
};

class MalformedRecord : public Error {
public:
    MalformedRecord(std::size_t line_no, const std::string& why)
        : Error("record at line " + std::to_string(line_no) + ": " + why), line_no(line_no) {}
    std::size_t line_no;
};

class DuplicateHandle : public Error {
public:
    explicit DuplicateHandle(const std::string& handle)
        : Error("duplicate handle: " + handle) {}
};

class UnknownUser : public Error {
public:
    explicit UnknownUser(const std::string& user_id)
        : Error("unknown user: " + user_id) {}
};

class TooFewSamples : public Error {
public:
    explicit TooFewSamples(const std::string& why) : Error(why) {}
};

class SingleCluster : public Error {
public:
    SingleCluster() : Error("silhouette undefined with fewer than two non-empty clusters") {}
};

class NoTopic : public Error {
public:
    explicit NoTopic(const std::string& user_id)
        : Error("no eligible topic token for user " + user_id) {}
};

class DimensionMismatch : public Error {
public:
    DimensionMismatch(std::size_t line_no, const std::string& why)
        : Error("embedding line " + std::to_string(line_no) + ": " + why), line_no(line_no) {}
    std::size_t line_no;
};

class EmptyFile : public Error {
public:
    explicit EmptyFile(const std::string& path) : Error("empty file: " + path) {}
};

class EmptyCorpus : public Error {
public:
    EmptyCorpus() : Error("training corpus contains no text") {}
};

class NonFiniteLoss : public Error {
public:
    explicit NonFiniteLoss(int epoch)
        : Error("training diverged (non-finite loss at epoch " + std::to_string(epoch) + ")") {}
};

class InsufficientText : public Error {
public:
    explicit InsufficientText(const std::string& why) : Error(why) {}
};

class UntrainedModel : public Error {
public:
    UntrainedModel() : Error("model has not been trained") {}
};

class NoHistory : public Error {
public:
    NoHistory() : Error("activity histogram is empty") {}
};

class UnknownCode : public Error {
public:
    explicit UnknownCode(const std::string& code) : Error("unknown short code: " + code) {}
};

class CodeCollision : public Error {
public:
    explicit CodeCollision(const std::string& destination)
        : Error("could not allocate a unique short code for: " + destination) {}
};

class InvalidClick : public Error {
public:
    explicit InvalidClick(const std::string& why) : Error(why) {}
};

class InvalidCounts : public Error {
public:
    explicit InvalidCounts(const std::string& why) : Error(why) {}
};

class HandleTooLong : public Error {
public:
    explicit HandleTooLong(const std::string& handle)
        : Error("handle leaves no room for post body: " + handle) {}
};

class MeasurementPending : public Error {
public:
    MeasurementPending(std::int64_t now, std::int64_t ready)
        : Error("measurement window not elapsed (sim time " + std::to_string(now) +
                " < " + std::to_string(ready) + ")") {}
};

class RateLimited : public Error {
public:
    explicit RateLimited(std::int64_t retry_after_seconds)
        : Error("rate limited; retry after " + std::to_string(retry_after_seconds) + "s"),
          retry_after_seconds(retry_after_seconds) {}
    std::int64_t retry_after_seconds;
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& why) : Error(why) {}
};

} // namespace snapsim
