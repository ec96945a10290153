// SPDX-License-Identifier: Apache-2.0
#pragma once

// Convenience include for the whole library.

#include "mgsim/analytics.hpp"
#include "mgsim/controllers.hpp"
#include "mgsim/csv.hpp"
#include "mgsim/domain.hpp"
#include "mgsim/excess_pmf.hpp"
#include "mgsim/experiments.hpp"
#include "mgsim/oracles.hpp"
#include "mgsim/rng.hpp"
#include "mgsim/scenario.hpp"
#include "mgsim/selftest.hpp"
#include "mgsim/sim.hpp"
#include "mgsim/slot_solver.hpp"
