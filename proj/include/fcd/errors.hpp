#pragma once

#include <stdexcept>
#include <string>

namespace fcd {

/// Failure of a numerical precondition discovered mid-computation
/// (collapsed noise level, rank-degenerate variance, factorization failure).
class numerical_error : public std::runtime_error {
  public:
    explicit numerical_error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace fcd
