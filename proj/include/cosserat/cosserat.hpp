#pragma once

#include "cosserat/algebra.hpp"
#include "cosserat/analysis.hpp"
#include "cosserat/energy.hpp"
#include "cosserat/error.hpp"
#include "cosserat/grid.hpp"
#include "cosserat/optimize.hpp"
#include "cosserat/state_io.hpp"
