#pragma once

#include <stdexcept>
#include <string>

namespace deduce {

/// Base class for anticipated failures. The CLI maps these to exit code 2.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// Invalid input data: malformed records, unknown names, shape mismatches.
class DataError : public Error {
public:
    using Error::Error;
};

/// Schema violation while reading a line-delimited file.
class SchemaError : public DataError {
public:
    SchemaError(const std::string& file, std::size_t line, const std::string& field,
                const std::string& what);

    std::size_t line() const noexcept { return line_; }
    const std::string& field() const noexcept { return field_; }

private:
    std::size_t line_;
    std::string field_;
};

/// A model was asked to run without an asset it needs (head, codebook, blob).
class MissingAssetError : public Error {
public:
    using Error::Error;
};

/// Numerical failure during optimisation.
class TrainingError : public Error {
public:
    using Error::Error;
};

} // namespace deduce
