#include "deduce/error.hpp"

namespace deduce {

SchemaError::SchemaError(const std::string& file, std::size_t line, const std::string& field,
                         const std::string& what)
    : DataError(file + ":" + std::to_string(line) + ": field '" + field + "': " + what),
      line_(line), field_(field) {}

} // namespace deduce
