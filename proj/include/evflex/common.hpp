#pragma once

#include <stdexcept>
#include <string>

namespace evflex {

// Error taxonomy maps onto the CLI exit codes: ConfigError -> 1,
// DataError -> 2, SolverError -> 3.
class ConfigError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class DataError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class SolverError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

}
