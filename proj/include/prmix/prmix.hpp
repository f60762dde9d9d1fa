#pragma once

// Umbrella header: predictive recursion mixing-density estimation with
// permutation-based uncertainty quantification.

#include "prmix/coverage.hpp"
#include "prmix/defaults.hpp"
#include "prmix/errors.hpp"
#include "prmix/examples.hpp"
#include "prmix/functional.hpp"
#include "prmix/grid.hpp"
#include "prmix/kernel.hpp"
#include "prmix/parallel.hpp"
#include "prmix/perm_uq.hpp"
#include "prmix/pr.hpp"
#include "prmix/rng.hpp"
