#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace drglm {

// Base for all engine errors. `kind()` is the stable machine-readable tag
// used in error JSON; `what()` carries the human message.
class Error : public std::runtime_error {
public:
    Error(std::string kind, const std::string& msg)
        : std::runtime_error(msg), kind_(std::move(kind)) {}
    const std::string& kind() const { return kind_; }

private:
    std::string kind_;
};

class DimensionError : public Error {
public:
    explicit DimensionError(const std::string& msg) : Error("DimensionMismatch", msg) {}
};

class DomainError : public Error {
public:
    explicit DomainError(const std::string& msg) : Error("DomainError", msg) {}
};

// Rank-deficient Gram / design matrix. `column` is the first dependent
// design column (0-based), -1 when unknown.
class SingularDesignError : public Error {
public:
    SingularDesignError(const std::string& msg, int column)
        : Error("SingularDesign", msg), column(column) {}
    int column;
};

class SingularInformationError : public Error {
public:
    SingularInformationError(const std::string& msg, int subset_index)
        : Error("SingularInformation", msg), subset_index(subset_index) {}
    int subset_index;
};

class SeparationError : public Error {
public:
    explicit SeparationError(const std::string& msg) : Error("Separation", msg) {}
};

// Recombination refused because some subset fits did not converge.
class CombineRejectedError : public Error {
public:
    CombineRejectedError(const std::string& msg, std::vector<int> subsets)
        : Error("CombineRejected", msg), subsets(std::move(subsets)) {}
    std::vector<int> subsets;
};

class DataError : public Error {
public:
    explicit DataError(const std::string& msg) : Error("DataError", msg) {}
};

class ConfigError : public Error {
public:
    explicit ConfigError(const std::string& msg) : Error("ConfigError", msg) {}
};

class UsageError : public Error {
public:
    explicit UsageError(const std::string& msg) : Error("UsageError", msg) {}
};

} // namespace drglm
