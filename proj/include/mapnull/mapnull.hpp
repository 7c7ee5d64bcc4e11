#pragma once

// Core library. The io/ headers (CSV, JSON config and reports) additionally
// need nlohmann/json on the include path; verification/ holds the theory
// checks used by tests and the oracle subcommand.

#include "mapnull/community.hpp"
#include "mapnull/data.hpp"
#include "mapnull/distances.hpp"
#include "mapnull/error.hpp"
#include "mapnull/filters.hpp"
#include "mapnull/mapper.hpp"
#include "mapnull/nulltest.hpp"
#include "mapnull/numerics.hpp"
#include "mapnull/parallel.hpp"
#include "mapnull/rng.hpp"
#include "mapnull/simulation.hpp"
#include "mapnull/teststat.hpp"
