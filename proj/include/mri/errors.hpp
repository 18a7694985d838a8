#pragma once

#include <stdexcept>
#include <string>

namespace mri {

/// Base class for all toolkit errors. The category drives CLI exit codes.
class Error : public std::runtime_error {
public:
    enum class Category {
        invalid_config, // bad parameters / configuration (exit 2)
        data_format,    // malformed or corrupt files, bad input data (exit 3)
        numeric,        // numeric failure: divergence, non-finite values (exit 4)
    };

    Error(Category cat, const std::string& msg) : std::runtime_error(msg), category_(cat) {}
    Category category() const { return category_; }

private:
    Category category_;
};

/// Invalid configuration value (negative lambda, accel < 1, step sizes...).
class InvalidConfigError : public Error {
public:
    explicit InvalidConfigError(const std::string& msg) : Error(Category::invalid_config, msg) {}
};

/// Invalid input data: shape mismatches, non-finite samples.
class InvalidInputError : public Error {
public:
    explicit InvalidInputError(const std::string& msg) : Error(Category::data_format, msg) {}
};

/// File format violations. `kind` distinguishes magic/version/crc/truncation.
class DataFormatError : public Error {
public:
    enum class Kind { bad_magic, bad_version, bad_crc, truncated, bad_field };

    DataFormatError(Kind kind, const std::string& msg)
        : Error(Category::data_format, msg), kind_(kind) {}
    Kind kind() const { return kind_; }

private:
    Kind kind_;
};

/// Too few calibration (ACS) lines to estimate sensitivity maps.
class InsufficientCalibrationError : public InvalidInputError {
public:
    explicit InsufficientCalibrationError(const std::string& msg) : InvalidInputError(msg) {}
};

/// Numeric failure (non-finite loss, rejected optimizer step, ...).
class NumericError : public Error {
public:
    explicit NumericError(const std::string& msg) : Error(Category::numeric, msg) {}
};

} // namespace mri
