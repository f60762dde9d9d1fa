#pragma once

#include <stdexcept>
#include <string>

namespace prmix {

/// Thrown when a predictive value f_{i-1}(Y_i) falls below the representable
/// floor (1e-300). Signals an observation incompatible with the support of
/// the current mixture; never clamped.
class DegeneratePredictiveError : public std::runtime_error {
public:
    DegeneratePredictiveError(std::string what, long step_one_based, double y)
        : std::runtime_error(std::move(what)), step(step_one_based), observation(y) {}

    long step;          ///< 1-based recursion step, 0 if outside a run
    double observation; ///< the offending observation
};

} // namespace prmix
