#pragma once

#include <stdexcept>
#include <string>

namespace psdn {

// File and stream problems (CLI exit code 2).
class io_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// An operation the object does not support, e.g. sampling from an improper
// prior (CLI exit code 3).
class capability_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// Invalid patch geometry, including grids that leave pixels uncovered
// (CLI exit code 4).
class geometry_error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

// A solver iterate went non-finite (CLI exit code 5). Carries the iteration
// at which the breakdown was detected.
class divergence_error : public std::runtime_error {
public:
    divergence_error(const std::string& what, int iteration)
        : std::runtime_error(what), iteration_(iteration) {}

    int iteration() const { return iteration_; }

private:
    int iteration_;
};

} // namespace psdn
