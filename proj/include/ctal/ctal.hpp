#pragma once

// Umbrella header.

#include "ctal/cluster.hpp"
#include "ctal/data.hpp"
#include "ctal/forest.hpp"
#include "ctal/harness.hpp"
#include "ctal/metrics.hpp"
#include "ctal/rng.hpp"
#include "ctal/strategies.hpp"
#include "ctal/tree.hpp"
