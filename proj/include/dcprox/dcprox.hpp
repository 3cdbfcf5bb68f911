#pragma once

// Difference-of-convex composite optimization: proximal Newton-type solver
// with memoryless BFGS metrics, a two-dimensional semi-smooth Newton inner
// solver for scaled proximal mappings, proximal DC baselines, and a
// deterministic benchmark harness.

#include "dcprox/bench.hpp"
#include "dcprox/instance.hpp"
#include "dcprox/metric.hpp"
#include "dcprox/problem.hpp"
#include "dcprox/rng.hpp"
#include "dcprox/solver.hpp"
#include "dcprox/subproblem.hpp"
