#pragma once

#include <stdexcept>
#include <string>

namespace lateralis {

enum class ErrorCode {
    io,
    malformed_file,
    invalid_label,
    invalid_patch_size,
    empty_source,
    empty_input,
    dimension_mismatch,
    insufficient_data,
    divergence,
    invalid_size,
    invalid_neighborhood,
    too_small,
    label_out_of_range,
    insufficient_sample,
    fold_infeasible,
    invalid_argument,
    config,
    dependency,
};

const char* to_string(ErrorCode code) noexcept;

// Single exception type for the library; callers branch on code().
class Error : public std::runtime_error {
public:
    Error(ErrorCode code, const std::string& what)
        : std::runtime_error(std::string(to_string(code)) + ": " + what), code_(code) {}

    ErrorCode code() const noexcept { return code_; }

private:
    ErrorCode code_;
};

// Raised when a stage's upstream artifact is missing or corrupt.
class DependencyError : public Error {
public:
    DependencyError(std::string stage, const std::string& what)
        : Error(ErrorCode::dependency, what + " (rerun stage '" + stage + "')"),
          stage_(std::move(stage)) {}

    const std::string& stage() const noexcept { return stage_; }

private:
    std::string stage_;
};

inline void require(bool cond, ErrorCode code, const std::string& what) {
    if (!cond) throw Error(code, what);
}

}  // namespace lateralis
