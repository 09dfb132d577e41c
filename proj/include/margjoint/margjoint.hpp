#pragma once

#include "binary_core.hpp"
#include "binary_estimate.hpp"
#include "binary_sim.hpp"
#include "errors.hpp"
#include "fixture.hpp"
#include "gauss_corr.hpp"
#include "io.hpp"
#include "math.hpp"
#include "parallel.hpp"
#include "rng.hpp"
