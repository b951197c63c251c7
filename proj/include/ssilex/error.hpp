#pragma once

#include <stdexcept>
#include <string>

namespace ssilex {

// Raised for malformed input files, failed validation and unreadable paths.
// The CLI maps it to exit status 2.
class DataError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

}  // namespace ssilex
