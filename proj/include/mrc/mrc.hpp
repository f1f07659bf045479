#pragma once

#include "mrc/common.hpp"
#include "mrc/ltl.hpp"
#include "mrc/geometry.hpp"
#include "mrc/dynamics.hpp"
#include "mrc/cts.hpp"
#include "mrc/product.hpp"
#include "mrc/trajectory.hpp"
#include "mrc/coordination.hpp"
#include "mrc/planner.hpp"
#include "mrc/sim.hpp"
#include "mrc/scenario.hpp"
