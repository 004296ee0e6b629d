#pragma once

#include "whipdyn/diagnostics.hpp"
#include "whipdyn/errors.hpp"
#include "whipdyn/grid.hpp"
#include "whipdyn/io.hpp"
#include "whipdyn/maps.hpp"
#include "whipdyn/refdyn.hpp"
#include "whipdyn/regdyn.hpp"
#include "whipdyn/scenario.hpp"
#include "whipdyn/sphere_partition.hpp"
#include "whipdyn/sweep.hpp"
#include "whipdyn/tension.hpp"
#include "whipdyn/verify.hpp"
#include "whipdyn/youngmeasure.hpp"
