#pragma once

#include <cstddef>
#include <stdexcept>
#include <string>

namespace blbf {

/// Invalid or inconsistent input data (bad file, bad row, invariant violation).
struct DataError : std::runtime_error {
    explicit DataError(const std::string& what) : std::runtime_error(what) {}
};

/// Numeric failure during computation (divergence, zero overlap, ...).
struct NumericError : std::runtime_error {
    explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

/// Training objective became non-finite.
struct DivergenceError : NumericError {
    DivergenceError(const std::string& what, int epoch_)
        : NumericError(what), epoch(epoch_) {}
    int epoch;
};

/// ATENP requires both groups nonempty; carries the observed sizes.
struct EmptyGroupError : NumericError {
    EmptyGroupError(const std::string& what, std::size_t g1, std::size_t g2)
        : NumericError(what), group_one(g1), group_two(g2) {}
    std::size_t group_one;
    std::size_t group_two;
};

}  // namespace blbf
