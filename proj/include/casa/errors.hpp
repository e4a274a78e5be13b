#pragma once

#include <stdexcept>
#include <string>

namespace casa {

struct Error : std::runtime_error {
    explicit Error(const std::string& msg) : std::runtime_error(msg) {}
};

struct ShapeMismatch : Error {
    explicit ShapeMismatch(const std::string& msg) : Error("ShapeMismatch: " + msg) {}
};

struct DimMismatch : Error {
    explicit DimMismatch(const std::string& msg) : Error("DimMismatch: " + msg) {}
};

struct NonScalarLoss : Error {
    explicit NonScalarLoss(const std::string& msg) : Error("NonScalarLoss: " + msg) {}
};

struct NotPositiveDefinite : Error {
    explicit NotPositiveDefinite(const std::string& msg) : Error("NotPositiveDefinite: " + msg) {}
};

struct DegenerateFrame : Error {
    explicit DegenerateFrame(const std::string& msg) : Error("DegenerateFrame: " + msg) {}
};

struct InconsistentBoneLengths : Error {
    explicit InconsistentBoneLengths(const std::string& msg) : Error("InconsistentBoneLengths: " + msg) {}
};

struct LatentNotFitted : Error {
    explicit LatentNotFitted(const std::string& msg) : Error("LatentNotFitted: " + msg) {}
};

struct IndexOutOfRange : Error {
    explicit IndexOutOfRange(const std::string& msg) : Error("IndexOutOfRange: " + msg) {}
};

struct TooShort : Error {
    explicit TooShort(const std::string& msg) : Error("TooShort: " + msg) {}
};

struct DegenerateLabels : Error {
    explicit DegenerateLabels(const std::string& msg) : Error("DegenerateLabels: " + msg) {}
};

struct EmptyTrainSubset : Error {
    explicit EmptyTrainSubset(const std::string& msg) : Error("EmptyTrainSubset: " + msg) {}
};

struct PoolTooSmall : Error {
    explicit PoolTooSmall(const std::string& msg) : Error("PoolTooSmall: " + msg) {}
};

struct EmptyDataset : Error {
    explicit EmptyDataset(const std::string& msg) : Error("EmptyDataset: " + msg) {}
};

struct InvalidSpec : Error {
    explicit InvalidSpec(const std::string& msg) : Error("InvalidSpec: " + msg) {}
};

struct ParseError : Error {
    explicit ParseError(const std::string& msg) : Error("ParseError: " + msg) {}
};

struct InvariantViolation : Error {
    explicit InvariantViolation(const std::string& msg) : Error("InvariantViolation: " + msg) {}
};

struct ConfigError : Error {
    explicit ConfigError(const std::string& msg) : Error("ConfigError: " + msg) {}
};

}  // namespace casa
